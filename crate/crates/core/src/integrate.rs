//! Fixed-step RK4 integration of ẋ = X(x) + u(x) with per-sample
//! conservation and dissipation diagnostics.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::{self, ControlProblem};
use crate::error::{Error, Result};
use crate::manifold::{expect_dim, ChartPoint, TangentVector, VectorField};

/// Slack used when counting decreases of G.
pub const MONOTONICITY_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    /// u = v₀ (+ w when the problem carries one).
    V0,
    /// u = (h/det Σ)·v₀ + w, or q·v₀ + w with a prolongation.
    Rate,
    /// u = 0; the problem still supplies the diagnostics.
    Off,
}

#[derive(Clone, Debug)]
pub struct FlowSpec {
    pub base: Option<VectorField>,
    pub problem: ControlProblem,
    pub mode: ControlMode,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub x0: ChartPoint,
}

impl FlowSpec {
    pub fn new(problem: ControlProblem, mode: ControlMode, x0: ChartPoint) -> Self {
        Self { base: None, problem, mode, t0: 0.0, t1: 1.0, dt: 1e-3, x0 }
    }

    pub fn with_base(mut self, base: VectorField) -> Self {
        self.base = Some(base);
        self
    }

    pub fn with_time(mut self, t0: f64, t1: f64, dt: f64) -> Self {
        self.t0 = t0;
        self.t1 = t1;
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.problem.dim();
        self.x0.expect_dim(n)?;
        if let Some(b) = &self.base {
            expect_dim(n, b.dim())?;
        }
        if !(self.t0.is_finite() && self.t1.is_finite()) || self.t1 <= self.t0 {
            return Err(Error::InvalidParameter(format!("t1 ({}) must exceed t0 ({})", self.t1, self.t0)));
        }
        if self.dt.is_nan() || self.dt <= 0.0 || self.dt > self.t1 - self.t0 {
            return Err(Error::InvalidParameter(format!("dt ({}) must lie in (0, t1 - t0]", self.dt)));
        }
        if self.mode == ControlMode::Rate && self.problem.rate().is_none() {
            return Err(Error::MissingRate);
        }
        Ok(())
    }

    /// Right-hand side X(x) + u(x).
    pub fn velocity(&self, x: &ChartPoint) -> Result<TangentVector> {
        let n = self.problem.dim();
        let mut v = match &self.base {
            Some(b) => b.eval(x)?,
            None => TangentVector::zeros(n),
        };
        match self.mode {
            ControlMode::V0 => {
                v = v + control::v0(&self.problem, x)?;
                if let Some(w) = self.problem.transverse() {
                    v = v + w.eval(x)?;
                }
            }
            ControlMode::Rate => v = v + control::control_field(&self.problem, x)?,
            ControlMode::Off => {}
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: Vec<f64>,
    pub f_values: Vec<f64>,
    pub g_value: f64,
    /// det Σ^{(F..G)}_{(F..G)} at x.
    pub det_sigma_full: f64,
    /// Finite-difference dG/dt, filled once the trajectory is complete.
    pub g_rate_fd: f64,
    /// h(x) for rate-mode flows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub mode: ControlMode,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.x.len())
    }

    pub fn k(&self) -> usize {
        self.samples.first().map_or(0, |s| s.f_values.len())
    }

    /// Fills `g_rate_fd` with three-point derivatives (central inside,
    /// one-sided at the ends), valid for uneven spacing.
    pub fn fill_rate_fd(&mut self) {
        let s = &mut self.samples;
        let m = s.len();
        if m < 2 {
            if let Some(first) = s.first_mut() {
                first.g_rate_fd = 0.0;
            }
            return;
        }
        if m == 2 {
            let r = (s[1].g_value - s[0].g_value) / (s[1].t - s[0].t);
            s[0].g_rate_fd = r;
            s[1].g_rate_fd = r;
            return;
        }
        let rates: Vec<f64> = (0..m)
            .map(|j| {
                let c = j.clamp(1, m - 2);
                let (t0, t1, t2) = (s[c - 1].t, s[c].t, s[c + 1].t);
                let (g0, g1, g2) = (s[c - 1].g_value, s[c].g_value, s[c + 1].g_value);
                let t = s[j].t;
                // derivative of the quadratic interpolant through the three points
                let l0 = (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2));
                let l1 = (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2));
                let l2 = (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1));
                g0 * l0 + g1 * l1 + g2 * l2
            })
            .collect();
        for (sample, r) in s.iter_mut().zip(rates) {
            sample.g_rate_fd = r;
        }
    }
}

/// Failure during integration, with the samples produced before it.
#[derive(Clone, Debug)]
pub struct IntegrationFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} samples)", self.error, self.partial.samples.len())
    }
}

impl std::error::Error for IntegrationFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn sample_at(spec: &FlowSpec, t: f64, x: &ChartPoint) -> Result<TrajectorySample> {
    let p = &spec.problem;
    let f_values = p.conserved().iter().map(|f| f.value(x)).collect::<Result<Vec<_>>>()?;
    let h_value = match (spec.mode, p.rate()) {
        (ControlMode::Rate, Some(h)) => Some(h.value(x)?),
        _ => None,
    };
    Ok(TrajectorySample {
        t,
        x: x.as_slice().to_vec(),
        f_values,
        g_value: p.target().value(x)?,
        det_sigma_full: p.det_sigma_full(x)?,
        g_rate_fd: f64::NAN,
        h_value,
    })
}

/// RK4 increment (x_{n+1} − x_n) over one step of length `dt`.
fn rk4_increment(spec: &FlowSpec, x: &ChartPoint, dt: f64) -> Result<DVector<f64>> {
    let shifted = |k: &TangentVector, a: f64| -> Result<ChartPoint> {
        ChartPoint::from_vector(x.coords() + k.components() * a)
    };
    let k1 = spec.velocity(x)?;
    let k2 = spec.velocity(&shifted(&k1, 0.5 * dt)?)?;
    let k3 = spec.velocity(&shifted(&k2, 0.5 * dt)?)?;
    let k4 = spec.velocity(&shifted(&k3, dt)?)?;
    Ok((k1.components() + k2.components() * 2.0 + k3.components() * 2.0 + k4.components()) * (dt / 6.0))
}

/// State accumulated with Kahan compensation, so that rounding in
/// x_{n+1} = x_n + Δx does not build up over many small steps.
struct CompensatedState {
    x: ChartPoint,
    carry: DVector<f64>,
}

impl CompensatedState {
    fn new(x: ChartPoint) -> Self {
        let carry = DVector::zeros(x.dim());
        Self { x, carry }
    }

    fn advance(&mut self, incr: &DVector<f64>) -> Result<()> {
        let y = incr - &self.carry;
        let t = self.x.coords() + &y;
        self.carry = (&t - self.x.coords()) - y;
        self.x = ChartPoint::from_vector(t)?;
        Ok(())
    }
}

/// Integrates `spec` with classical RK4, sampling after every step. The
/// last step is shortened to land on t1. No projection onto the level
/// sets is applied.
pub fn integrate(spec: &FlowSpec) -> std::result::Result<Trajectory, IntegrationFailure> {
    let mut traj = Trajectory { mode: spec.mode, samples: Vec::new() };
    let fail = |error: Error, mut partial: Trajectory| {
        partial.fill_rate_fd();
        IntegrationFailure { error, partial }
    };
    if let Err(e) = spec.validate() {
        return Err(fail(e, traj));
    }
    let steps = ((spec.t1 - spec.t0) / spec.dt * (1.0 - 1e-12)).ceil() as usize;
    let mut state = CompensatedState::new(spec.x0.clone());
    match sample_at(spec, spec.t0, &state.x) {
        Ok(s) => traj.samples.push(s),
        Err(e) => return Err(fail(e, traj)),
    }
    for j in 1..=steps {
        let t_prev = spec.t0 + (j - 1) as f64 * spec.dt;
        let t = if j == steps { spec.t1 } else { spec.t0 + j as f64 * spec.dt };
        let stepped = rk4_increment(spec, &state.x, t - t_prev).and_then(|incr| state.advance(&incr));
        match stepped {
            Ok(()) => {}
            Err(Error::NonFinite(_)) => return Err(fail(Error::StepFailure { t: t_prev }, traj)),
            Err(e) => return Err(fail(e, traj)),
        }
        match sample_at(spec, t, &state.x) {
            Ok(s) => traj.samples.push(s),
            Err(Error::NonFinite(_)) => return Err(fail(Error::StepFailure { t }, traj)),
            Err(e) => return Err(fail(e, traj)),
        }
    }
    traj.fill_rate_fd();
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    /// max_j |F_i(t_j) − F_i(t_0)| per conserved field.
    pub max_f_drift: Vec<f64>,
    /// Samples where G dropped by more than `MONOTONICITY_SLACK`.
    pub g_monotonicity_violations: usize,
    /// max_j |dG/dt_fd − expected| / max_j |expected|, where the expected
    /// rate is det Σ (v0 mode) or h (rate mode); 0 when the mode is off.
    pub max_rate_mismatch: f64,
}

impl ConservationReport {
    pub fn max_drift(&self) -> f64 {
        self.max_f_drift.iter().copied().fold(0.0, f64::max)
    }
}

pub fn conservation_report(traj: &Trajectory) -> Result<ConservationReport> {
    let first = traj.samples.first().ok_or(Error::EmptyTrajectory)?;
    let mut max_f_drift = vec![0.0f64; first.f_values.len()];
    for s in &traj.samples {
        for (d, (f, f0)) in max_f_drift.iter_mut().zip(s.f_values.iter().zip(&first.f_values)) {
            *d = d.max((f - f0).abs());
        }
    }
    let g_monotonicity_violations = traj
        .samples
        .windows(2)
        .filter(|w| w[1].g_value < w[0].g_value - MONOTONICITY_SLACK)
        .count();
    let expected: Vec<Option<f64>> = traj
        .samples
        .iter()
        .map(|s| match traj.mode {
            ControlMode::V0 => Some(s.det_sigma_full),
            ControlMode::Rate => s.h_value,
            ControlMode::Off => None,
        })
        .collect();
    let peak = expected.iter().flatten().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut worst = 0.0f64;
    for (s, e) in traj.samples.iter().zip(&expected) {
        if let Some(e) = e {
            worst = worst.max((s.g_rate_fd - e).abs());
        }
    }
    let max_rate_mismatch = if peak > 0.0 { worst / peak } else { worst };
    Ok(ConservationReport { max_f_drift, g_monotonicity_violations, max_rate_mismatch })
}
