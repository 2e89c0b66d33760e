//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any of them fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use geodissip::control;
use geodissip::exterior::{self, AlternatingForm};
use geodissip::instances;
use geodissip::integrate::ControlMode;
use geodissip::leafgeom::{self, max_rel_dev};
use geodissip::manifold::ChartPoint;
use geodissip::models::{LandauLifschitzModel, RigidBodyModel};
use geodissip::verify;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Outcome {
    let s = elapsed.as_secs_f64();
    check(s <= limit_s, format!("{detail}, {s:.2}s (limit {limit_s}s)"))
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Deterministic points spread over [−1,1]³.
fn spread_points(count: usize) -> Vec<ChartPoint> {
    (0..count)
        .map(|i| {
            let t = i as f64 + 1.0;
            ChartPoint::new(vec![(1.3 * t).sin(), (2.7 * t + 0.4).sin(), (0.9 * t + 1.1).cos()]).unwrap()
        })
        .collect()
}

fn four_formulations() -> Outcome {
    let start = Instant::now();
    let suite = instances::instances(42, 100).map_err(err)?;
    let mut worst = 0.0f64;
    for inst in &suite {
        let (p, x) = (&inst.problem, &inst.point);
        let v = control::v0(p, x).map_err(err)?.into_inner();
        for r in [
            exterior::v0_hodge(p, x).map_err(err)?,
            leafgeom::v0_via_t(p, x).map_err(err)?,
            leafgeom::v0_via_projection(p, x).map_err(err)?,
        ] {
            worst = worst.max(max_rel_dev(r.components(), &v));
        }
    }
    let detail = format!("max relative deviation {worst:.3e} over {} instances", suite.len());
    if worst > 1e-8 {
        return Err(detail);
    }
    within(start.elapsed(), 30.0, detail)
}

fn defining_system() -> Outcome {
    let suite = instances::instances(42, 100).map_err(err)?;
    let (mut orth, mut rate_dev, mut min_rate) = (0.0f64, 0.0f64, f64::INFINITY);
    for inst in &suite {
        let (p, x) = (&inst.problem, &inst.point);
        let k = inst.k();
        let frame = p.frame(x).map_err(err)?;
        let g = frame.metric();
        let v = control::v0(p, x).map_err(err)?.into_inner();
        let vn = g.inner(&v, &v).sqrt();
        for i in 0..k {
            orth = orth.max(g.inner(&v, frame.gradient(i)).abs() / (vn * frame.inner(i, i).sqrt()));
        }
        let all: Vec<usize> = (0..=k).collect();
        let det = frame.sigma_det(&all, &all);
        let rate = g.inner(&v, frame.gradient(k));
        rate_dev = rate_dev.max((rate - det).abs() / det.abs().max(rate.abs()));
        min_rate = min_rate.min(rate);
    }
    check(
        orth <= 1e-9 && rate_dev <= 1e-9 && min_rate >= -1e-10,
        format!("orthogonality {orth:.3e}, rate vs det {rate_dev:.3e}, min rate {min_rate:.3e}"),
    )
}

fn landau_lifschitz_run() -> Outcome {
    let start = Instant::now();
    let run = verify::ll_benchmark(1e-3).map_err(err)?;
    let end = (run.final_m3 + 1.0).abs();
    let detail = format!("norm drift {:.3e}, H violations {}, |M3+1| {end:.3e}", run.norm_drift, run.h_violations);
    if run.norm_drift > 1e-8 || run.h_violations != 0 || end >= 1e-2 {
        return Err(detail);
    }
    within(start.elapsed(), 5.0, detail)
}

fn rigid_body_run() -> Outcome {
    let start = Instant::now();
    let run = verify::rb_benchmark(1e-3, ControlMode::V0).map_err(err)?;
    let elapsed = start.elapsed();
    let m = RigidBodyModel::new(3.0, 2.0, 1.0).map_err(err)?;
    let p = m.problem().map_err(err)?;
    let mut morrison = 0.0f64;
    for x in spread_points(50) {
        // ∇C₀ = x
        let h = m.morrison_matrix(&x).map_err(err)?;
        let u = &h * x.coords();
        let v = control::v0(&p, &x).map_err(err)?.into_inner();
        morrison = morrison.max(max_rel_dev(&u, &v));
    }
    let detail = format!(
        "H drift {:.3e}, C0 violations {}, C0 gain {:.3e}, Morrison vs v0 {morrison:.3e}",
        run.h_drift, run.c0_violations, run.c0_gain
    );
    if run.h_drift > 1e-8 || run.c0_violations != 0 || morrison > 1e-12 {
        return Err(detail);
    }
    within(elapsed, 10.0, detail)
}

fn leaf_geometry() -> Outcome {
    let (gamma, lambda, c): (f64, f64, f64) = (1.0, 2.0, 1.5);
    let b = [0.3, -0.2, 1.0];
    let ll = LandauLifschitzModel::new(gamma, lambda, b).map_err(err)?;
    let llp = ll.problem().map_err(err)?;
    let chart = ll.leaf_chart(c).map_err(err)?;
    let r = (gamma / lambda).sqrt() * c;
    let (mut tau, mut ll_grad, mut ll_push) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..20 {
        let theta = 0.15 + 2.8 * (i as f64) / 19.0;
        let phi = -3.0 + 0.31 * i as f64;
        let y = [theta, phi];
        let got = leafgeom::leaf_metric(&llp, &chart, &y).map_err(err)?;
        let s = gamma * gamma * c * c / (lambda * lambda);
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![s, s * theta.sin().powi(2)]));
        tau = tau.max((&got - &want).amax() / want.amax());

        let rep = leafgeom::leaf_gradient_check(&llp, &chart, &y).map_err(err)?;
        let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
        let dh_theta = r * (b[0] * ct * cp + b[1] * ct * sp - b[2] * st);
        let dh_phi = r * (-b[0] * st * sp + b[1] * st * cp);
        let k = lambda * lambda / (gamma * gamma * c * c);
        let want = DVector::from_vec(vec![-k * dh_theta, -k * dh_phi / (st * st)]);
        ll_grad = ll_grad.max(max_rel_dev(&rep.leaf_gradient, &want));
        ll_push = ll_push.max(rep.max_rel_deviation);
    }

    let rb = RigidBodyModel::new(3.0, 2.0, 1.0).map_err(err)?;
    let rbp = rb.problem().map_err(err)?;
    let rb_chart = rb.leaf_chart(c).map_err(err)?;
    let axi = RigidBodyModel::axisymmetric(2.0, 1.0).map_err(err)?;
    let axp = axi.problem().map_err(err)?;
    let ax_chart = axi.leaf_chart(c).map_err(err)?;
    let (mut rb_grad, mut rb_push, mut phi_max) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..20 {
        let theta = 0.2 + 2.7 * (i as f64) / 19.0;
        let phi = -2.9 + 0.29 * i as f64;
        let y = [theta, phi];
        let rep = leafgeom::leaf_gradient_check(&rbp, &rb_chart, &y).map_err(err)?;
        let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
        let want = DVector::from_vec(vec![
            2.0 * c * st * ct * (1.0 - sp * sp / 2.0 - cp * cp / 3.0),
            2.0 * c * (1.0 / 3.0 - 1.0 / 2.0) * sp * cp,
        ]);
        rb_grad = rb_grad.max(max_rel_dev(&rep.leaf_gradient, &want));
        rb_push = rb_push.max(rep.max_rel_deviation);
        let ax = leafgeom::leaf_gradient_check(&axp, &ax_chart, &y).map_err(err)?;
        phi_max = phi_max.max(ax.leaf_gradient[1].abs());
    }
    check(
        tau <= 1e-10 && ll_grad <= 1e-6 && rb_grad <= 1e-6 && ll_push <= 1e-6 && rb_push <= 1e-6 && phi_max <= 1e-10,
        format!(
            "tau {tau:.3e}, LL gradient {ll_grad:.3e} (push-forward {ll_push:.3e}), RB gradient {rb_grad:.3e} (push-forward {rb_push:.3e}), axisymmetric phi {phi_max:.3e}"
        ),
    )
}

fn exterior_identities() -> Outcome {
    let start = Instant::now();
    let mut failed = Vec::new();
    for r in 1..=4 {
        if !exterior::kronecker_epsilon_check(r) {
            failed.push(format!("epsilon product r={r}"));
        }
        if !exterior::ricci_shift_check(r) {
            failed.push(format!("index shift r={r}"));
        }
    }
    for n in 1..=5 {
        for r in 1..=4.min(n) {
            if !exterior::kronecker_sign_check(n, r) {
                failed.push(format!("sign law n={n} r={r}"));
            }
            for p in r..=n {
                if !exterior::delta_contraction_check(n, r, p) {
                    failed.push(format!("contraction n={n} r={r} p={p}"));
                }
            }
        }
    }
    let (mut hodge, mut det_dev) = (0.0f64, 0.0f64);
    for inst in instances::instances(7, 50).map_err(err)? {
        let (g, x) = (inst.problem.metric(), &inst.point);
        let n = inst.dim();
        for deg in 0..=n {
            let head: Vec<usize> = (1..=deg).collect();
            let tail: Vec<usize> = (n - deg + 1..=n).collect();
            let mut a = AlternatingForm::zero(n, deg);
            a.add_term(&head, 1.0).map_err(err)?;
            a.add_term(&tail, -0.5).map_err(err)?;
            let twice = exterior::hodge(g, x, &exterior::hodge(g, x, &a).map_err(err)?).map_err(err)?;
            let sign = if (deg * (n - deg)) % 2 == 0 { 1.0 } else { -1.0 };
            hodge = hodge.max(twice.max_abs_diff(&a.scale(sign)) / a.max_abs());
        }
        let p = &inst.problem;
        let a = exterior::gram_det_by_expansion(p.metric(), p.conserved(), x).map_err(err)?;
        let b = p.det_sigma_conserved(x).map_err(err)?;
        det_dev = det_dev.max((a - b).abs() / a.abs().max(b.abs()));
    }
    let detail = format!("enumeration failures {}, double Hodge {hodge:.3e}, two-route det {det_dev:.3e}", failed.len());
    if !failed.is_empty() || hodge > 1e-9 || det_dev > 1e-9 {
        return Err(format!("{detail} {failed:?}"));
    }
    within(start.elapsed(), 20.0, detail)
}

fn scaling_laws() -> Outcome {
    let mut rng = instances::rng(2024);
    let (mut worst, mut failures) = (0.0f64, 0usize);
    for i in 0..50 {
        let k = 1 + i % 3;
        let n = k + 1 + i % 2;
        let inst = instances::random_instance_with(&mut rng, i, n, k).map_err(err)?;
        let (a, b) = instances::random_linear_map(&mut rng, k);
        let h = instances::linear_reparametrization(inst.problem.conserved(), &a, &b).map_err(err)?;
        let rep = leafgeom::dependent_rescale_check(&inst.problem, h, a.determinant(), &inst.point).map_err(err)?;
        worst = worst.max(rep.v0_rel_deviation).max(rep.gram_rel_deviation);
        if !rep.passed {
            failures += 1;
        }
    }
    check(worst <= 1e-8 && failures == 0, format!("max relative deviation {worst:.3e} over 50 maps"))
}

fn convergence_order() -> Outcome {
    let coarse = verify::ll_benchmark(1e-3).map_err(err)?;
    let fine = verify::ll_benchmark(5e-4).map_err(err)?;
    let ratio = coarse.norm_drift / fine.norm_drift;
    check(
        (12.0..=20.0).contains(&ratio),
        format!("drift {:.3e} -> {:.3e}, ratio {ratio:.2}", coarse.norm_drift, fine.norm_drift),
    )
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_geodissip"))
            .args(["verify", "--suite", "all", "--seed", "42", "--json", "-"])
            .output()
            .map_err(err)
    };
    let (a, b) = (run()?, run()?);
    if !a.status.success() || !b.status.success() {
        return Err(format!("exit codes {:?} {:?}", a.status.code(), b.status.code()));
    }
    check(!a.stdout.is_empty() && a.stdout == b.stdout, format!("{} bytes, identical: {}", a.stdout.len(), a.stdout == b.stdout))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("four-formulation equivalence", four_formulations),
        ("defining system", defining_system),
        ("landau-lifschitz run", landau_lifschitz_run),
        ("rigid-body run", rigid_body_run),
        ("leaf geometry", leaf_geometry),
        ("exterior identities", exterior_identities),
        ("scaling laws", scaling_laws),
        ("convergence order", convergence_order),
        ("determinism", determinism),
    ];
    let mut all = true;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("PASS {} {name}: {d}", i + 1),
            Err(d) => {
                all = false;
                println!("FAIL {} {name}: {d}", i + 1);
            }
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
