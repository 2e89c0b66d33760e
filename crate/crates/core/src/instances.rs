//! Seeded random control problems for property suites.
//!
//! Metrics are R·diag(e^{s_i}(1 + ½ sin(w_i·x + p_i)))·Rᵀ with a fixed
//! random rotation R, so their condition number stays below 3·e⁵ ≈ 445.
//! Fields mix linear, quadratic and trigonometric terms with analytic
//! partials. Draws whose Gram matrix is nearly singular are rejected.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::ControlProblem;
use crate::error::Result;
use crate::gram::GradientFrame;
use crate::manifold::{ChartPoint, MetricField, ScalarField};

/// Spread of the log-eigenvalues of the generated metrics.
pub const LOG_EIGEN_SPREAD: f64 = 5.0;

/// Minimum of det Gram / ∏ diag accepted for a draw.
pub const MIN_GRAM_CONDITION: f64 = 1e-4;

const MAX_ATTEMPTS: usize = 1000;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random orthogonal matrix from the QR factors of a uniform matrix.
pub fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_vec(n, n, uniform_vec(rng, n * n, -1.0, 1.0));
        if a.determinant().abs() > 1e-3 {
            return a.qr().q();
        }
    }
}

pub fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> MetricField {
    let rot = random_rotation(rng, n);
    let scales: Vec<f64> = uniform_vec(rng, n, 0.0, LOG_EIGEN_SPREAD).into_iter().map(f64::exp).collect();
    let freqs: Vec<Vec<f64>> = (0..n).map(|_| uniform_vec(rng, n, -1.0, 1.0)).collect();
    let phases = uniform_vec(rng, n, 0.0, std::f64::consts::TAU);
    MetricField::from_fn(n, move |x| {
        let d = DVector::from_fn(n, |i, _| {
            let arg: f64 = freqs[i].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + phases[i];
            scales[i] * (1.0 + 0.5 * arg.sin())
        });
        let m = &rot * DMatrix::from_diagonal(&d) * rot.transpose();
        (&m + m.transpose()) * 0.5
    })
}

/// a·x + ½xᵀQx + Σ_j c_j sin(w_j·x + p_j) with two sine terms.
pub fn random_field(rng: &mut ChaCha8Rng, n: usize) -> ScalarField {
    let a = uniform_vec(rng, n, -1.0, 1.0);
    let q = DMatrix::from_vec(n, n, uniform_vec(rng, n * n, -1.0, 1.0));
    let q = (&q + q.transpose()) * 0.5;
    let terms: Vec<(f64, Vec<f64>, f64)> = (0..2)
        .map(|_| {
            let c = rng.random_range(-0.5..0.5);
            let w = uniform_vec(rng, n, -2.0, 2.0);
            (c, w, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let (a2, q2, t2) = (a.clone(), q.clone(), terms.clone());
    ScalarField::analytic(
        n,
        move |x| {
            let xv = DVector::from_column_slice(x);
            let lin: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
            let trig: f64 = terms
                .iter()
                .map(|(c, w, p)| c * (w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + p).sin())
                .sum();
            lin + 0.5 * xv.dot(&(&q * &xv)) + trig
        },
        move |x| {
            let xv = DVector::from_column_slice(x);
            let mut d = &q2 * &xv + DVector::from_column_slice(&a2);
            for (c, w, p) in &t2 {
                let arg = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + p;
                let s = c * arg.cos();
                for (di, wi) in d.iter_mut().zip(w) {
                    *di += s * wi;
                }
            }
            d.as_slice().to_vec()
        },
    )
}

/// One random problem with a regular evaluation point.
#[derive(Clone, Debug)]
pub struct Instance {
    pub index: usize,
    pub problem: ControlProblem,
    pub point: ChartPoint,
}

impl Instance {
    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn k(&self) -> usize {
        self.problem.k()
    }
}

fn well_conditioned(frame: &GradientFrame) -> bool {
    let labels: Vec<usize> = (0..frame.len()).collect();
    let diag: f64 = labels.iter().map(|&i| frame.inner(i, i)).product();
    diag > 0.0 && frame.sigma_det(&labels, &labels) / diag >= MIN_GRAM_CONDITION
}

/// Draws n ∈ {3,4,5}, k ∈ {1,…,min(3, n−1)}, then a metric, k+1 fields and
/// a point in [−1,1]ⁿ, redrawing until the full Gram matrix is well
/// conditioned.
pub fn random_instance(rng: &mut ChaCha8Rng, index: usize) -> Result<Instance> {
    let n = rng.random_range(3..=5usize);
    let k = rng.random_range(1..=3usize.min(n - 1));
    random_instance_with(rng, index, n, k)
}

pub fn random_instance_with(rng: &mut ChaCha8Rng, index: usize, n: usize, k: usize) -> Result<Instance> {
    for _ in 0..MAX_ATTEMPTS {
        let metric = random_metric(rng, n);
        let conserved: Vec<ScalarField> = (0..k).map(|_| random_field(rng, n)).collect();
        let target = random_field(rng, n);
        let point = ChartPoint::new(uniform_vec(rng, n, -1.0, 1.0))?;
        let problem = ControlProblem::new(metric, conserved, target)?;
        let frame = problem.frame(&point)?;
        if well_conditioned(&frame) {
            return Ok(Instance { index, problem, point });
        }
    }
    Err(crate::error::Error::InvalidParameter(format!(
        "no well-conditioned draw for n={n}, k={k} after {MAX_ATTEMPTS} attempts"
    )))
}

/// `count` instances from one seed; identical seeds give identical lists.
pub fn instances(seed: u64, count: usize) -> Result<Vec<Instance>> {
    let mut r = rng(seed);
    (0..count).map(|i| random_instance(&mut r, i)).collect()
}

/// Random invertible k×k matrix with |det| ≥ 0.1 and offset vector.
pub fn random_linear_map(rng: &mut ChaCha8Rng, k: usize) -> (DMatrix<f64>, DVector<f64>) {
    loop {
        let a = DMatrix::from_vec(k, k, uniform_vec(rng, k * k, -2.0, 2.0));
        if a.determinant().abs() >= 0.1 {
            return (a, DVector::from_vec(uniform_vec(rng, k, -1.0, 1.0)));
        }
    }
}

/// H_i = Σ_j A_ij F_j + b_i.
pub fn linear_reparametrization(fields: &[ScalarField], a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Vec<ScalarField>> {
    (0..a.nrows())
        .map(|i| {
            let row: Vec<f64> = a.row(i).iter().copied().collect();
            let (row2, bi) = (row.clone(), b[i]);
            ScalarField::compose(
                fields,
                move |v| row.iter().zip(v).map(|(r, f)| r * f).sum::<f64>() + bi,
                move |_| row2.clone(),
            )
        })
        .collect()
}
