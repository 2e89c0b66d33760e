use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use geodissip::control::{self, ControlProblem};
use geodissip::exterior::{self, AlternatingForm};
use geodissip::gram;
use geodissip::instances::{self, Instance};
use geodissip::integrate::{self, ControlMode, FlowSpec};
use geodissip::leafgeom::{self, max_rel_dev};
use geodissip::manifold::{self, ChartPoint, MetricField, ScalarField, TangentVector};
use geodissip::models::LandauLifschitzModel;

fn instance(seed: u64) -> Instance {
    let mut rng = instances::rng(seed);
    instances::random_instance(&mut rng, 0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn differential_matches_metric_pairing(seed in any::<u64>(), y in prop::collection::vec(-1.0f64..1.0, 5)) {
        let inst = instance(seed);
        let n = inst.dim();
        let y = TangentVector::new(y[..n].to_vec());
        let f = &inst.problem.conserved()[0];
        let g = inst.problem.metric();
        let df = f.partials(&inst.point).unwrap().dot(y.components());
        let grad = manifold::gradient(g, f, &inst.point).unwrap();
        let ip = manifold::inner(g, &inst.point, &grad, &y).unwrap();
        let scale = f.partials(&inst.point).unwrap().amax() * y.max_abs();
        prop_assert!((df - ip).abs() <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn gradient_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let inst = instance(seed);
        let p = &inst.problem;
        let (f, h) = (p.conserved()[0].clone(), p.target().clone());
        let combo = ScalarField::compose(&[f.clone(), h.clone()], move |v| a * v[0] + b * v[1], move |_| vec![a, b]).unwrap();
        let g = p.metric();
        let x = &inst.point;
        let lhs = manifold::gradient(g, &combo, x).unwrap();
        let rhs = a * manifold::gradient(g, &f, x).unwrap() + b * manifold::gradient(g, &h, x).unwrap();
        prop_assert!(max_rel_dev(lhs.components(), rhs.components()) <= 1e-12);
    }

    #[test]
    fn euclidean_gradient_is_partials(seed in any::<u64>()) {
        let inst = instance(seed);
        let f = &inst.problem.conserved()[0];
        let e = MetricField::euclidean(inst.dim());
        let grad = manifold::gradient(&e, f, &inst.point).unwrap();
        let d = f.partials(&inst.point).unwrap();
        prop_assert!((grad.components() - &d).amax() <= 1e-14 * d.amax().max(1.0));
    }

    #[test]
    fn gram_is_positive_semidefinite(seed in any::<u64>()) {
        let inst = instance(seed);
        let mut fields = inst.problem.conserved().to_vec();
        fields.push(inst.problem.target().clone());
        let s = gram::sigma(inst.problem.metric(), &fields, &fields, &inst.point).unwrap();
        let eig = s.entries.symmetric_eigen().eigenvalues;
        prop_assert!(eig.min() >= -1e-10 * eig.amax().max(1.0));
    }

    #[test]
    fn cramer_agrees_with_lu(seed in any::<u64>(), h in -2.0f64..2.0) {
        let inst = instance(seed);
        let p = &inst.problem;
        let k = inst.k();
        let frame = p.frame(&inst.point).unwrap();
        let all: Vec<usize> = (0..=k).collect();
        let m = frame.sigma(&all, &all).entries;
        prop_assume!(m.determinant().abs() > 1e-6);
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = h;
        let lu = m.lu().solve(&rhs).unwrap();
        let cr = gram::cramer_solve(p.metric(), p.conserved(), p.target(), h, &inst.point).unwrap();
        let mut got = cr.alphas.clone();
        got.push(cr.alpha);
        prop_assert!(max_rel_dev(&DVector::from_vec(got), &lu) <= 1e-9);
    }

    #[test]
    fn cauchy_schwarz_for_one_conserved(seed in any::<u64>()) {
        let mut rng = instances::rng(seed);
        let inst = instances::random_instance_with(&mut rng, 0, 3, 1).unwrap();
        let frame = inst.problem.frame(&inst.point).unwrap();
        let det = frame.sigma_det(&[0, 1], &[0, 1]);
        let expected = frame.inner(0, 0) * frame.inner(1, 1) - frame.inner(0, 1).powi(2);
        prop_assert!(det >= -1e-12);
        prop_assert!(rel(det, expected) <= 1e-10);
    }

    #[test]
    fn v0_solves_the_defining_system(seed in any::<u64>()) {
        let inst = instance(seed);
        let (p, x) = (&inst.problem, &inst.point);
        let frame = p.frame(x).unwrap();
        let k = inst.k();
        let v = control::v0(p, x).unwrap();
        let g = frame.metric();
        let vn = g.inner(v.components(), v.components()).sqrt();
        for i in 0..k {
            let ip = g.inner(v.components(), frame.gradient(i));
            prop_assert!(ip.abs() <= 1e-9 * vn * frame.inner(i, i).sqrt());
        }
        let all: Vec<usize> = (0..=k).collect();
        let det = frame.sigma_det(&all, &all);
        let rate = g.inner(v.components(), frame.gradient(k));
        prop_assert!(rel(rate, det) <= 1e-9);
        prop_assert!(rate >= -1e-10);

        // v0 lies in the span of the gradients
        let basis = DMatrix::from_columns(&(0..=k).map(|i| frame.gradient(i).clone()).collect::<Vec<_>>());
        let coef = basis.clone().svd(true, true).solve(v.components(), 1e-14).unwrap();
        let residual = (&basis * coef - v.components()).amax();
        prop_assert!(residual <= 1e-9 * v.max_abs());

        if det.abs() > 1e-6 {
            let c = control::control_via_cramer(p, x, det).unwrap();
            prop_assert!(max_rel_dev(c.components(), v.components()) <= 1e-9);
        }
    }

    #[test]
    fn four_formulations_agree(seed in any::<u64>()) {
        let inst = instance(seed);
        let (p, x) = (&inst.problem, &inst.point);
        let v = control::v0(p, x).unwrap().into_inner();
        let routes = [
            exterior::v0_hodge(p, x).unwrap(),
            leafgeom::v0_via_t(p, x).unwrap(),
            leafgeom::v0_via_projection(p, x).unwrap(),
        ];
        for r in routes {
            prop_assert!(max_rel_dev(r.components(), &v) <= 1e-8);
        }
    }

    #[test]
    fn double_hodge_sign(seed in any::<u64>(), coeffs in prop::collection::vec(-1.0f64..1.0, 32), r in 0usize..6) {
        let inst = instance(seed);
        let n = inst.dim();
        let r = r.min(n);
        let mut a = AlternatingForm::zero(n, r);
        let mut c = coeffs.iter().cycle();
        for idx in increasing(n, r) {
            a.add_term(&idx, *c.next().unwrap()).unwrap();
        }
        let g = inst.problem.metric();
        let twice = exterior::hodge(g, &inst.point, &exterior::hodge(g, &inst.point, &a).unwrap()).unwrap();
        let sign = if (r * (n - r)).is_multiple_of(2) { 1.0 } else { -1.0 };
        prop_assert!(twice.max_abs_diff(&a.scale(sign)) <= 1e-10 * a.max_abs());
    }

    #[test]
    fn hodge_isometry_on_one_forms(seed in any::<u64>(), coeffs in prop::collection::vec(-1.0f64..1.0, 5)) {
        let inst = instance(seed);
        let n = inst.dim();
        let a = AlternatingForm::one_form(&coeffs[..n]);
        let g = inst.problem.metric();
        let top = a.wedge(&exterior::hodge(g, &inst.point, &a).unwrap()).unwrap();
        let full: Vec<usize> = (1..=n).collect();
        let vol = g.at(&inst.point).unwrap().det().sqrt();
        let expected = exterior::cometric_inner(g, &inst.point, &a, &a).unwrap() * vol;
        prop_assert!(rel(top.coeff(&full), expected) <= 1e-10);
    }

    #[test]
    fn gram_determinant_two_routes(seed in any::<u64>()) {
        let inst = instance(seed);
        let p = &inst.problem;
        let a = exterior::gram_det_by_expansion(p.metric(), p.conserved(), &inst.point).unwrap();
        let b = p.det_sigma_conserved(&inst.point).unwrap();
        prop_assert!(rel(a, b) <= 1e-9);
    }

    #[test]
    fn tensor_t_on_tangential_forms(seed in any::<u64>(), beta in prop::collection::vec(-1.0f64..1.0, 5), gamma in prop::collection::vec(-1.0f64..1.0, 5)) {
        let inst = instance(seed);
        let (p, x) = (&inst.problem, &inst.point);
        let n = inst.dim();
        let frame = p.conserved_frame(x).unwrap();
        let ginv = frame.metric().inverse();
        let det = p.det_sigma_conserved(x).unwrap();
        // cometric projection of a covector away from Sp[dF_s]
        let dfs = DMatrix::from_columns(&(0..inst.k()).map(|s| frame.differential(s).clone()).collect::<Vec<_>>());
        let gram = dfs.transpose() * &ginv * &dfs;
        let b0 = DVector::from_column_slice(&beta[..n]);
        let coef = gram.lu().solve(&(dfs.transpose() * &ginv * &b0)).unwrap();
        let alpha = &b0 - &dfs * coef;
        let other = DVector::from_column_slice(&gamma[..n]);
        let t = leafgeom::tensor_t(p, x).unwrap();
        let lhs = t.pair(&alpha, &other);
        let rhs = det * alpha.dot(&(&ginv * &other));
        let scale = det * alpha.norm() * other.norm() * ginv.amax();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale);
        let aa = t.pair(&alpha, &alpha);
        prop_assert!(rel(aa, det * alpha.dot(&(&ginv * &alpha))) <= 1e-9);
    }

    #[test]
    fn projector_properties(seed in any::<u64>()) {
        let inst = instance(seed);
        let (p, x) = (&inst.problem, &inst.point);
        let proj = leafgeom::projector(p, x).unwrap();
        let g = p.metric().matrix(x).unwrap();
        let s = proj.amax();
        prop_assert!((&proj * &proj - &proj).amax() <= 1e-9 * s);
        let gp = &g * &proj;
        prop_assert!((&gp - gp.transpose()).amax() <= 1e-9 * gp.amax());
        prop_assert!((proj.trace() - (inst.dim() - inst.k()) as f64).abs() <= 1e-9);
        let frame = p.conserved_frame(x).unwrap();
        for i in 0..inst.k() {
            let grad = frame.gradient(i);
            prop_assert!((&proj * grad).amax() <= 1e-9 * s * grad.amax());
        }
    }

    #[test]
    fn flat_t_is_conformal_on_the_sphere(theta in 0.2f64..2.9, phi in -3.0f64..3.0, c in 0.3f64..2.0, lambda in 0.2f64..2.0) {
        let m = LandauLifschitzModel::new(1.0, lambda, [0.1, 0.2, 1.0]).unwrap();
        let p = m.problem().unwrap();
        let chart = m.leaf_chart(c).unwrap();
        let y = [theta, phi];
        let x = chart.embed(&y).unwrap();
        let det = p.det_sigma_conserved(&x).unwrap();
        let b = chart.basis(&y).unwrap();
        for a in 0..2 {
            let v = TangentVector::from_vector(b.column(a).into_owned());
            let got = leafgeom::flat_t(&p, &x, &v).unwrap();
            let want = p.metric().at(&x).unwrap().lower(v.components()) / det;
            prop_assert!(max_rel_dev(&got, &want) <= 1e-9);
        }
    }
}

fn increasing(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..r {
        out = out
            .into_iter()
            .flat_map(|t: Vec<usize>| {
                let start = t.last().map_or(1, |l| l + 1);
                (start..=n).map(move |i| {
                    let mut u = t.clone();
                    u.push(i);
                    u
                })
            })
            .collect();
    }
    out
}

#[test]
fn rate_mode_tracks_prescribed_rate() {
    // F = ½‖x‖², G = x₃ on ℝ³; h = 0.3 + 0.1 x₁ stays far from the pole
    let p = ControlProblem::new(
        MetricField::euclidean(3),
        vec![ScalarField::half_norm_squared(3)],
        ScalarField::coordinate(3, 2),
    )
    .unwrap()
    .with_rate(ScalarField::analytic(3, |x| 0.3 + 0.1 * x[0], |_| vec![0.1, 0.0, 0.0]))
    .unwrap();
    let spec = FlowSpec::new(p, ControlMode::Rate, ChartPoint::new(vec![1.0, 0.2, -0.5]).unwrap())
        .with_time(0.0, 2.0, 1e-3);
    let traj = integrate::integrate(&spec).unwrap();
    let rep = integrate::conservation_report(&traj).unwrap();
    assert!(rep.max_rate_mismatch <= 1e-4, "{rep:?}");
    assert!(rep.max_drift() <= 1e-10, "{rep:?}");
}

#[test]
fn v0_flows_never_decrease_target() {
    for seed in 0..5u64 {
        let mut rng = instances::rng(seed);
        let inst = instances::random_instance_with(&mut rng, 0, 3, 1).unwrap();
        let spec = FlowSpec::new(inst.problem.clone(), ControlMode::V0, inst.point.clone()).with_time(0.0, 0.05, 1e-4);
        let traj = integrate::integrate(&spec).unwrap();
        let rep = integrate::conservation_report(&traj).unwrap();
        assert_eq!(rep.g_monotonicity_violations, 0, "seed {seed}");
        assert!(rep.max_rate_mismatch <= 1e-5, "seed {seed}: {rep:?}");
    }
}
