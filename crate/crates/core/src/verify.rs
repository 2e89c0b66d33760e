//! Seeded property suites over every module, reported as one row per
//! property with the worst deviation seen and the tolerance applied.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{self, ControlProblem};
use crate::error::{Error, Result};
use crate::exterior::{self, AlternatingForm};
use crate::gram;
use crate::instances::{self, Instance};
use crate::integrate::{self, ControlMode, FlowSpec};
use crate::leafgeom::{self, max_rel_dev};
use crate::manifold::{ChartPoint, ScalarField};
use crate::models::{LandauLifschitzModel, RigidBodyModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Formulations,
    Gram,
    ExteriorIdentities,
    Leaf,
    Models,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::Formulations, Suite::Gram, Suite::ExteriorIdentities, Suite::Leaf, Suite::Models];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Formulations => "formulations",
            Suite::Gram => "gram",
            Suite::ExteriorIdentities => "exterior-identities",
            Suite::Leaf => "leaf",
            Suite::Models => "models",
        }
    }

    /// Instance count used when none is given.
    pub fn default_count(self) -> usize {
        match self {
            Suite::Formulations | Suite::Gram => 100,
            Suite::ExteriorIdentities => 50,
            Suite::Leaf => 20,
            Suite::Models => 50,
        }
    }

    fn seed_offset(self) -> u64 {
        match self {
            Suite::Formulations => 0,
            Suite::Gram => 1,
            Suite::ExteriorIdentities => 2,
            Suite::Leaf => 3,
            Suite::Models => 4,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a suite name; `all` expands to every suite.
pub fn parse_suites(name: &str) -> Result<Vec<Suite>> {
    if name == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    Suite::from_str(name).map(|s| vec![s])
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).chain(["all"]).collect();
            Error::InvalidParameter(format!("unknown suite '{s}', expected one of: {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyConfig {
    pub suites: Vec<Suite>,
    pub seed: u64,
    /// Instances per suite; `None` uses [`Suite::default_count`].
    pub count: Option<usize>,
    /// Replaces every tolerance.
    pub tolerance: Option<f64>,
    /// Per-property tolerances keyed by property name; these win over
    /// `tolerance`.
    pub overrides: BTreeMap<String, f64>,
}

impl VerifyConfig {
    pub fn new(suites: Vec<Suite>, seed: u64) -> Self {
        Self { suites, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.suites.is_empty() {
            return Err(Error::InvalidParameter("suite: at least one suite is required".into()));
        }
        if self.count == Some(0) {
            return Err(Error::InvalidParameter("count must be at least 1".into()));
        }
        let bad = |t: f64| !(t.is_finite() && t >= 0.0);
        if self.tolerance.is_some_and(bad) || self.overrides.values().copied().any(bad) {
            return Err(Error::InvalidParameter("tolerance must be a finite nonnegative number".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub suite: Suite,
    pub name: String,
    pub instances: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Instances whose evaluation returned an error.
    pub errors: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<Suite>,
    pub properties: Vec<PropertyResult>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyResult> {
        self.properties.iter().filter(|p| !p.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.properties {
            writeln!(
                f,
                "{} {}/{} n={} max_dev={:e} tol={:e}{}",
                if p.passed { "PASS" } else { "FAIL" },
                p.suite,
                p.name,
                p.instances,
                p.max_deviation,
                p.tolerance,
                if p.errors > 0 { format!(" errors={}", p.errors) } else { String::new() }
            )?;
        }
        write!(f, "{}", if self.passed { "all properties passed" } else { "some properties failed" })
    }
}

struct Property {
    name: &'static str,
    tolerance: f64,
    instances: usize,
    max_deviation: f64,
    errors: usize,
}

impl Property {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, instances: 0, max_deviation: 0.0, errors: 0 }
    }

    fn record(&mut self, deviation: Result<f64>) {
        self.instances += 1;
        match deviation {
            Ok(d) if d.is_finite() => self.max_deviation = self.max_deviation.max(d),
            _ => self.errors += 1,
        }
    }

    /// Exact check: deviation 1 on failure.
    fn record_bool(&mut self, ok: bool) {
        self.record(Ok(if ok { 0.0 } else { 1.0 }));
    }
}

struct Collector<'a> {
    suite: Suite,
    config: &'a VerifyConfig,
    props: Vec<Property>,
}

impl<'a> Collector<'a> {
    fn new(suite: Suite, config: &'a VerifyConfig) -> Self {
        Self { suite, config, props: Vec::new() }
    }

    fn prop(&mut self, name: &'static str, tolerance: f64) -> usize {
        if let Some(i) = self.props.iter().position(|p| p.name == name) {
            return i;
        }
        self.props.push(Property::new(name, tolerance));
        self.props.len() - 1
    }

    fn record(&mut self, name: &'static str, tolerance: f64, deviation: Result<f64>) {
        let i = self.prop(name, tolerance);
        self.props[i].record(deviation);
    }

    fn record_bool(&mut self, name: &'static str, ok: bool) {
        let i = self.prop(name, 0.0);
        self.props[i].record_bool(ok);
    }

    fn finish(self) -> Vec<PropertyResult> {
        let (suite, config) = (self.suite, self.config);
        self.props
            .into_iter()
            .map(|p| {
                let tolerance = config
                    .overrides
                    .get(p.name)
                    .copied()
                    .or(config.tolerance)
                    .unwrap_or(p.tolerance);
                PropertyResult {
                    suite,
                    name: p.name.to_string(),
                    instances: p.instances,
                    max_deviation: p.max_deviation,
                    tolerance,
                    errors: p.errors,
                    passed: p.errors == 0 && p.instances > 0 && p.max_deviation <= tolerance,
                }
            })
            .collect()
    }
}

/// Runs the configured suites in order.
pub fn run(config: &VerifyConfig) -> Result<VerifyReport> {
    config.validate()?;
    let mut suites = config.suites.clone();
    suites.sort();
    suites.dedup();
    let mut properties = Vec::new();
    for &suite in &suites {
        let count = config.count.unwrap_or(suite.default_count());
        let seed = config.seed.wrapping_add(suite.seed_offset());
        let mut c = Collector::new(suite, config);
        match suite {
            Suite::Formulations => formulations(&mut c, seed, count)?,
            Suite::Gram => gram_suite(&mut c, seed, count)?,
            Suite::ExteriorIdentities => exterior_suite(&mut c, seed, count)?,
            Suite::Leaf => leaf_suite(&mut c, seed, count)?,
            Suite::Models => models_suite(&mut c, seed, count)?,
        }
        properties.extend(c.finish());
    }
    let passed = properties.iter().all(|p| p.passed);
    Ok(VerifyReport { seed: config.seed, suites, properties, passed })
}

fn vec_dev(a: Result<DVector<f64>>, b: &DVector<f64>) -> Result<f64> {
    Ok(max_rel_dev(&a?, b))
}

fn mat_dev(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.amax().max(b.amax());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).amax() / scale
    }
}

fn scalar_dev(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Relative orthogonality and rate residuals of v₀ on one instance.
fn defining_system(inst: &Instance) -> Result<(f64, f64, f64)> {
    let frame = inst.problem.frame(&inst.point)?;
    let k = inst.k();
    let v = control::v0_from_frame(&frame, k);
    let g = frame.metric();
    let vn = g.inner(v.components(), v.components()).sqrt();
    let mut perp = 0.0f64;
    for i in 0..k {
        let gn = frame.inner(i, i).sqrt();
        let ip = g.inner(v.components(), frame.gradient(i)).abs();
        if vn * gn > 0.0 {
            perp = perp.max(ip / (vn * gn));
        }
    }
    let all: Vec<usize> = (0..=k).collect();
    let det = frame.sigma_det(&all, &all);
    let rate = g.inner(v.components(), frame.gradient(k));
    let scale = vn * frame.inner(k, k).sqrt();
    let rate_dev = if scale > 0.0 { (rate - det).abs() / scale } else { (rate - det).abs() };
    Ok((perp, rate_dev, (-rate).max(0.0)))
}

fn formulations(c: &mut Collector, seed: u64, count: usize) -> Result<()> {
    for inst in instances::instances(seed, count)? {
        let (p, x) = (&inst.problem, &inst.point);
        let v = control::v0(p, x)?.into_inner();
        c.record("v0-hodge", 1e-8, vec_dev(exterior::v0_hodge(p, x).map(|t| t.into_inner()), &v));
        c.record("v0-tensor-t", 1e-8, vec_dev(leafgeom::v0_via_t(p, x).map(|t| t.into_inner()), &v));
        c.record("v0-projection", 1e-8, vec_dev(leafgeom::v0_via_projection(p, x).map(|t| t.into_inner()), &v));
        let det = p.det_sigma_full(x)?;
        c.record(
            "v0-cramer",
            1e-8,
            vec_dev(control::control_via_cramer(p, x, det).map(|t| t.into_inner()), &v),
        );
        let sys = defining_system(&inst);
        c.record("conserved-orthogonal", 1e-9, sys.clone().map(|s| s.0));
        c.record("rate-equals-det-sigma", 1e-9, sys.clone().map(|s| s.1));
        c.record("target-nondecreasing", 1e-10, sys.map(|s| s.2));
    }
    Ok(())
}

fn gram_suite(c: &mut Collector, seed: u64, count: usize) -> Result<()> {
    let mut rng = instances::rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    for inst in instances::instances(seed, count)? {
        let (p, x) = (&inst.problem, &inst.point);
        let k = inst.k();
        let frame = p.frame(x)?;
        let all: Vec<usize> = (0..=k).collect();
        let full = frame.sigma(&all, &all).entries;
        let eig = full.clone().symmetric_eigen().eigenvalues;
        c.record("gram-psd", 1e-12, Ok((-eig.min()).max(0.0) / eig.amax()));
        c.record("gram-symmetric", 0.0, Ok((&full - full.transpose()).amax()));

        // Cramer coefficients against an LU solve of the same system
        let h = rng.random_range(-2.0..2.0);
        let lu = {
            let mut rhs = DVector::zeros(k + 1);
            rhs[k] = h;
            full.clone().lu().solve(&rhs).ok_or(Error::SingularMetric)
        };
        let cr = gram::cramer_solve(p.metric(), p.conserved(), p.target(), h, x);
        let dev = match (cr, lu) {
            (Ok(cr), Ok(lu)) => {
                let mut a = cr.alphas.clone();
                a.push(cr.alpha);
                Ok(max_rel_dev(&DVector::from_vec(a), &lu))
            }
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
        c.record("cramer-vs-lu", 1e-8, dev);

        // G = a·F₁ makes Σ singular with rank_conserved_rows = rank_full
        let a = rng.random_range(0.5..2.0);
        let dep = ControlProblem::new(p.metric().clone(), p.conserved().to_vec(), p.conserved()[0].scaled(a))?;
        let dep = dep.with_rate(ScalarField::constant(inst.dim(), 1.0))?;
        let ok = match control::control_field(&dep, x) {
            Err(Error::DegenerateGram { diagnostic: Some(d), .. }) => !d.compatible(1.0) && d.compatible(0.0),
            _ => false,
        };
        c.record_bool("degenerate-rank-diagnostic", ok);

        if inst.index < count.min(50) {
            let (m, b) = instances::random_linear_map(&mut rng, k);
            let hs = instances::linear_reparametrization(p.conserved(), &m, &b)?;
            let rep = leafgeom::dependent_rescale_check(p, hs, m.determinant(), x);
            c.record(
                "dependent-rescale",
                leafgeom::RESCALE_REL_TOL,
                rep.map(|r| r.v0_rel_deviation.max(r.gram_rel_deviation)),
            );
        }
    }
    Ok(())
}

fn increasing_tuples(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..=n {
            cur.push(i);
            go(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, n, r, &mut Vec::new(), &mut out);
    out
}

fn random_form(rng: &mut ChaCha8Rng, n: usize, r: usize) -> Result<AlternatingForm> {
    let mut a = AlternatingForm::zero(n, r);
    for idx in increasing_tuples(n, r) {
        a.add_term(&idx, rng.random_range(-1.0..1.0))?;
    }
    Ok(a)
}

fn double_hodge_dev(rng: &mut ChaCha8Rng, inst: &Instance) -> Result<f64> {
    let n = inst.dim();
    let r = rng.random_range(0..=n);
    let a = random_form(rng, n, r)?;
    let g = inst.problem.metric();
    let twice = exterior::hodge(g, &inst.point, &exterior::hodge(g, &inst.point, &a)?)?;
    let sign = if (r * (n - r)).is_multiple_of(2) { 1.0 } else { -1.0 };
    let expected = a.scale(sign);
    Ok(twice.max_abs_diff(&expected) / expected.max_abs().max(twice.max_abs()))
}

fn exterior_suite(c: &mut Collector, seed: u64, count: usize) -> Result<()> {
    for r in 1..=5 {
        c.record_bool("kronecker-epsilon-product", exterior::kronecker_epsilon_check(r));
        c.record_bool("ricci-index-shift", exterior::ricci_shift_check(r));
    }
    for n in 1..=5 {
        for r in 1..=n.min(4) {
            c.record_bool("kronecker-sign-law", exterior::kronecker_sign_check(n, r));
            for p in r..=n {
                c.record_bool("kronecker-contraction", exterior::delta_contraction_check(n, r, p));
            }
        }
    }
    let mut rng = instances::rng(seed ^ 0x5851_f42d_4c95_7f2d);
    for inst in instances::instances(seed, count)? {
        c.record("double-hodge-sign", 1e-9, double_hodge_dev(&mut rng, &inst));
        let p = &inst.problem;
        let exp = exterior::gram_det_by_expansion(p.metric(), p.conserved(), &inst.point);
        let direct = p.det_sigma_conserved(&inst.point);
        let dev = match (exp, direct) {
            (Ok(a), Ok(b)) => Ok(scalar_dev(a, b)),
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
        c.record("det-sigma-two-routes", 1e-9, dev);
    }
    Ok(())
}

fn chart_point(rng: &mut ChaCha8Rng) -> [f64; 2] {
    [rng.random_range(0.1..std::f64::consts::PI - 0.1), rng.random_range(-3.1..3.1)]
}

fn random_ll(rng: &mut ChaCha8Rng) -> Result<LandauLifschitzModel> {
    let gamma = rng.random_range(0.5..2.0);
    let lambda = rng.random_range(0.1..2.0);
    let b = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.2..1.5)];
    LandauLifschitzModel::new(gamma, lambda, b)
}

fn random_rb(rng: &mut ChaCha8Rng) -> Result<RigidBodyModel> {
    let i3 = rng.random_range(0.5..1.5);
    let i2 = i3 + rng.random_range(0.2..1.5);
    let i1 = i2 + rng.random_range(0.2..1.5);
    RigidBodyModel::new(i1, i2, i3)
}

fn projector_dev(inst: &Instance) -> Result<f64> {
    let (p, x) = (&inst.problem, &inst.point);
    let proj = leafgeom::projector(p, x)?;
    let g = p.metric().matrix(x)?;
    let frame = p.conserved_frame(x)?;
    let idem = mat_dev(&(&proj * &proj), &proj);
    let selfadj = mat_dev(&(&g * &proj), &(&g * &proj).transpose());
    let mut kernel = 0.0f64;
    for i in 0..inst.k() {
        let grad = frame.gradient(i);
        kernel = kernel.max((&proj * grad).amax() / (proj.amax() * grad.amax()));
    }
    Ok(idem.max(selfadj).max(kernel))
}

fn leaf_suite(c: &mut Collector, seed: u64, count: usize) -> Result<()> {
    let mut rng = instances::rng(seed);
    for _ in 0..count {
        let ll = random_ll(&mut rng)?;
        let p = ll.problem()?;
        let lc = rng.random_range(0.3..2.0);
        let chart = ll.leaf_chart(lc)?;
        let y = chart_point(&mut rng);
        let tau = leafgeom::leaf_metric(&p, &chart, &y);
        c.record(
            "ll-leaf-metric",
            1e-10,
            tau.clone().map(|t| mat_dev(&t, &ll.leaf_metric_closed_form(lc, y[0]))),
        );
        c.record(
            "leaf-metric-via-t",
            1e-8,
            tau.and_then(|t| Ok(mat_dev(&leafgeom::leaf_metric_via_t(&p, &chart, &y)?, &t))),
        );
        c.record(
            "ll-induced-metric",
            1e-10,
            leafgeom::induced_metric(&p, &chart, &y).map(|g| mat_dev(&g, &ll.induced_metric_closed_form(lc, y[0]))),
        );
        let x = chart.embed(&y);
        c.record(
            "ll-spherical-t",
            1e-8,
            x.and_then(|x| {
                let t = leafgeom::tensor_t(&p, &x)?;
                Ok(mat_dev(&ll.spherical_t(&t, &x)?, &ll.spherical_t_closed_form(&x)?))
            }),
        );
        c.record(
            "ll-leaf-gradient",
            1e-6,
            leafgeom::leaf_gradient_check(&p, &chart, &y).and_then(|r| {
                let closed = ll.leaf_gradient_closed_form(lc, &y)?;
                Ok(max_rel_dev(&r.leaf_gradient, &closed).max(r.max_rel_deviation))
            }),
        );

        let rb = random_rb(&mut rng)?;
        let p = rb.problem()?;
        let rc = rng.random_range(0.3..2.0);
        let chart = rb.leaf_chart(rc)?;
        let y = chart_point(&mut rng);
        c.record(
            "rb-induced-metric",
            1e-10,
            leafgeom::induced_metric(&p, &chart, &y)
                .map(|g| mat_dev(&g, &rb.induced_metric_closed_form(rc, y[0], y[1]))),
        );
        c.record(
            "rb-grad-h-norm",
            1e-10,
            chart.embed(&y).and_then(|x| {
                let gh = rb.hamiltonian().partials(&x)?;
                Ok(scalar_dev(gh.norm_squared(), rb.grad_h_norm_sq_closed_form(rc, y[0], y[1])))
            }),
        );
        c.record(
            "rb-leaf-gradient",
            1e-6,
            leafgeom::leaf_gradient_check(&p, &chart, &y).map(|r| {
                max_rel_dev(&r.leaf_gradient, &rb.leaf_gradient_closed_form(rc, y[0], y[1])).max(r.max_rel_deviation)
            }),
        );

        let [_, i2, i3] = rb.inertia();
        let axi = RigidBodyModel::axisymmetric(i2, i3)?;
        let chart = axi.leaf_chart(rc)?;
        c.record(
            "rb-axisymmetric-phi",
            1e-10,
            leafgeom::leaf_gradient_check(&axi.problem()?, &chart, &y).map(|r| r.leaf_gradient[1].abs()),
        );
    }
    for inst in instances::instances(seed, count)? {
        c.record("projector-properties", 1e-9, projector_dev(&inst));
    }
    Ok(())
}

fn random_point3(rng: &mut ChaCha8Rng) -> Result<ChartPoint> {
    ChartPoint::new((0..3).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>())
}

/// Outcome of the benchmark Landau-Lifschitz run (γ = λ = 1, H = M₃,
/// M(0) = (1,0,0), t ∈ [0,10]).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LlRun {
    pub norm_drift: f64,
    pub h_violations: usize,
    pub final_m3: f64,
}

pub fn ll_benchmark(dt: f64) -> Result<LlRun> {
    let m = LandauLifschitzModel::new(1.0, 1.0, [0.0, 0.0, 1.0])?;
    let spec = FlowSpec::new(m.problem()?, ControlMode::V0, ChartPoint::new(vec![1.0, 0.0, 0.0])?)
        .with_base(m.base_vector_field())
        .with_time(0.0, 10.0, dt);
    let traj = integrate::integrate(&spec).map_err(|f| f.error)?;
    let mut norm_drift = 0.0f64;
    let mut h_violations = 0;
    for w in traj.samples.windows(2) {
        // H = M₃ = −G
        if w[1].x[2] > w[0].x[2] + integrate::MONOTONICITY_SLACK {
            h_violations += 1;
        }
    }
    for s in &traj.samples {
        let r = s.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        norm_drift = norm_drift.max((r - 1.0).abs());
    }
    let final_m3 = traj.samples.last().ok_or(Error::EmptyTrajectory)?.x[2];
    Ok(LlRun { norm_drift, h_violations, final_m3 })
}

/// Outcome of the benchmark metriplectic rigid-body run (I = (3,2,1),
/// x(0) = (0.1, 1, 0.1), t ∈ [0,50]).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RbRun {
    pub h_drift: f64,
    pub c0_drift: f64,
    pub c0_violations: usize,
    pub c0_gain: f64,
}

pub fn rb_benchmark(dt: f64, mode: ControlMode) -> Result<RbRun> {
    let m = RigidBodyModel::new(3.0, 2.0, 1.0)?;
    let spec = FlowSpec::new(m.problem()?, mode, ChartPoint::new(vec![0.1, 1.0, 0.1])?)
        .with_base(m.base_vector_field())
        .with_time(0.0, 50.0, dt);
    let traj = integrate::integrate(&spec).map_err(|f| f.error)?;
    let rep = integrate::conservation_report(&traj)?;
    let first = traj.samples.first().ok_or(Error::EmptyTrajectory)?;
    let last = traj.samples.last().ok_or(Error::EmptyTrajectory)?;
    Ok(RbRun {
        h_drift: rep.max_drift(),
        c0_drift: traj.samples.iter().fold(0.0f64, |m, s| m.max((s.g_value - first.g_value).abs())),
        c0_violations: rep.g_monotonicity_violations,
        c0_gain: last.g_value - first.g_value,
    })
}

fn models_suite(c: &mut Collector, seed: u64, count: usize) -> Result<()> {
    let mut rng = instances::rng(seed);
    let rb = RigidBodyModel::new(3.0, 2.0, 1.0)?;
    let rbp = rb.problem()?;
    for _ in 0..count {
        let x = random_point3(&mut rng)?;
        let u = rb.dissipation(&x)?.into_inner();
        c.record("rb-morrison-equals-v0", 1e-12, vec_dev(control::v0(&rbp, &x).map(|v| v.into_inner()), &u));
        let h = rb.morrison_matrix(&x)?;
        c.record("rb-morrison-gradient-form", 1e-12, Ok(mat_dev(&h, &rb.morrison_matrix_from_gradient(&x)?)));
        let gh = rb.hamiltonian().partials(&x)?;
        c.record("rb-morrison-kernel", 1e-12, Ok((&h * &gh).amax() / (h.amax() * gh.amax())));
        let xb = rb.base_field(&x)?.into_inner();
        let dh = gh.dot(&xb).abs();
        let dc = x.coords().dot(&xb).abs();
        c.record("rb-base-conserves", 1e-12, Ok(dh.max(dc)));

        let ll = random_ll(&mut rng)?;
        let llp = ll.problem()?;
        let pert = ll.perturbation(&x)?.into_inner();
        c.record("ll-perturbation-equals-v0", 1e-10, vec_dev(control::v0(&llp, &x).map(|v| v.into_inner()), &pert));
        c.record("ll-cross-form", 1e-10, vec_dev(ll.damping_cross_form(&x).map(|v| v.into_inner()), &pert));
        let xb = ll.base_field(&x)?.into_inner();
        let ghl = ll.hamiltonian().partials(&x)?;
        let scale = xb.amax().max(1e-300) * x.coords().amax().max(ghl.amax());
        c.record(
            "ll-base-orthogonal",
            1e-12,
            Ok(xb.dot(x.coords()).abs().max(xb.dot(&ghl).abs()) / scale),
        );
        let scale = pert.amax().max(1e-300) * x.coords().amax();
        c.record("ll-perturbation-tangent", 1e-12, Ok(pert.dot(x.coords()).abs() / scale));
    }

    let ll = ll_benchmark(1e-3);
    c.record("ll-run-norm-drift", 1e-8, ll.clone().map(|r| r.norm_drift));
    c.record("ll-run-h-violations", 0.0, ll.clone().map(|r| r.h_violations as f64));
    c.record("ll-run-final-m3", 1e-2, ll.map(|r| (r.final_m3 + 1.0).abs()));
    let rb_run = rb_benchmark(1e-3, ControlMode::V0);
    c.record("rb-run-h-drift", 1e-8, rb_run.clone().map(|r| r.h_drift));
    c.record("rb-run-c0-violations", 0.0, rb_run.map(|r| r.c0_violations as f64));
    let free = rb_benchmark(1e-3, ControlMode::Off);
    c.record("rb-free-run-drift", 1e-8, free.map(|r| r.h_drift.max(r.c0_drift)));
    Ok(())
}
