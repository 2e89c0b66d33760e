//! Single-chart Riemannian geometry: points, metrics, scalar fields and the
//! musical operations needed to build gradients.
//!
//! A "manifold" here is one open chart of ℝⁿ. Sets excluded from a chart
//! (the origin for Landau-Lifschitz, the poles of a spherical chart) are
//! reported as errors at evaluation time.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetry tolerance for evaluated metric matrices.
pub const METRIC_SYMMETRY_TOL: f64 = 1e-12;

/// Central-difference step for coordinate `value`.
pub fn fd_step(value: f64) -> f64 {
    (1e-6 * value.abs()).max(1e-6)
}

/// Coordinates of a point in an n-dimensional chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint(DVector<f64>);

impl ChartPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(coords.into()))
    }

    pub fn from_vector(coords: DVector<f64>) -> Result<Self> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Self(coords))
        } else {
            Err(Error::NonFinite("chart point"))
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub(crate) fn expect_dim(&self, dim: usize) -> Result<()> {
        expect_dim(dim, self.dim())
    }
}

pub(crate) fn expect_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Contravariant components Xⁱ of a tangent vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector(DVector<f64>);

impl TangentVector {
    pub fn new(components: impl Into<Vec<f64>>) -> Self {
        Self(DVector::from_vec(components.into()))
    }

    pub fn from_vector(components: DVector<f64>) -> Self {
        Self(components)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }
}

impl Add for TangentVector {
    type Output = TangentVector;
    fn add(self, rhs: TangentVector) -> TangentVector {
        TangentVector(self.0 + rhs.0)
    }
}

impl Sub for TangentVector {
    type Output = TangentVector;
    fn sub(self, rhs: TangentVector) -> TangentVector {
        TangentVector(self.0 - rhs.0)
    }
}

impl Mul<TangentVector> for f64 {
    type Output = TangentVector;
    fn mul(self, rhs: TangentVector) -> TangentVector {
        TangentVector(rhs.0 * self)
    }
}

impl Neg for TangentVector {
    type Output = TangentVector;
    fn neg(self) -> TangentVector {
        TangentVector(-self.0)
    }
}

type MetricFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// Map from a chart point to the components g_ij(x).
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    eval: Arc<MetricFn>,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl MetricField {
    pub fn from_fn<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self { dim, eval: Arc::new(eval) }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::from_fn(dim, move |_| DMatrix::identity(dim, dim))
    }

    pub fn constant(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        check_symmetric(&matrix)?;
        let dim = matrix.nrows();
        Ok(Self::from_fn(dim, move |_| matrix.clone()))
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::constant(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates g_ij(x), checking shape, finiteness and symmetry.
    pub fn matrix(&self, x: &ChartPoint) -> Result<DMatrix<f64>> {
        x.expect_dim(self.dim)?;
        let m = (self.eval)(x.as_slice());
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: m.nrows() });
        }
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("metric"));
        }
        check_symmetric(&m)?;
        Ok(m)
    }

    /// Evaluates and factors the metric at `x`.
    pub fn at(&self, x: &ChartPoint) -> Result<MetricAt> {
        MetricAt::new(self.matrix(x)?)
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > METRIC_SYMMETRY_TOL {
        Err(Error::AsymmetricMetric(worst))
    } else {
        Ok(())
    }
}

/// A metric evaluated and Cholesky-factored at one point.
#[derive(Clone, Debug)]
pub struct MetricAt {
    matrix: DMatrix<f64>,
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl MetricAt {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        match matrix.clone().cholesky() {
            Some(factor) => Ok(Self { matrix, factor }),
            // Positive-definiteness is only examined once Cholesky has failed.
            None => {
                if matrix.clone().lu().is_invertible() {
                    Err(Error::IndefiniteMetric)
                } else {
                    Err(Error::SingularMetric)
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Covariant components g_ij.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Contravariant components g^{ij}.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }

    /// |g|, the determinant of g_ij.
    pub fn det(&self) -> f64 {
        self.factor.determinant()
    }

    /// Index raising: g⁻¹ · covector.
    pub fn raise(&self, covector: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(covector)
    }

    /// Index lowering: g · vector.
    pub fn lower(&self, vector: &DVector<f64>) -> DVector<f64> {
        &self.matrix * vector
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.matrix * v))
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type PartialsFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Smooth function on the chart, with analytic partials when available
/// and central differences otherwise.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    value: Arc<ValueFn>,
    partials: Option<Arc<PartialsFn>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("analytic", &self.partials.is_some())
            .finish_non_exhaustive()
    }
}

impl ScalarField {
    /// Field without analytic partials; the differential falls back to
    /// central differences.
    pub fn new<V>(dim: usize, value: V) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { dim, value: Arc::new(value), partials: None }
    }

    pub fn analytic<V, P>(dim: usize, value: V, partials: P) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        P: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { dim, value: Arc::new(value), partials: Some(Arc::new(partials)) }
    }

    /// The coordinate function x ↦ x[index] (0-based).
    pub fn coordinate(dim: usize, index: usize) -> Self {
        Self::analytic(
            dim,
            move |x| x[index],
            move |x| {
                let mut p = vec![0.0; x.len()];
                p[index] = 1.0;
                p
            },
        )
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::analytic(dim, move |_| c, move |x| vec![0.0; x.len()])
    }

    /// ½‖x‖² in chart coordinates.
    pub fn half_norm_squared(dim: usize) -> Self {
        Self::analytic(dim, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>(), |x| x.to_vec())
    }

    /// x ↦ ½ xᵀQx + lᵀx + c with Q symmetrized.
    pub fn quadratic(q: DMatrix<f64>, l: DVector<f64>, c: f64) -> Result<Self> {
        let dim = l.len();
        if q.nrows() != dim || q.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: q.nrows() });
        }
        let q = (&q + q.transpose()) * 0.5;
        let (qv, lv) = (q.clone(), l.clone());
        Ok(Self::analytic(
            dim,
            move |x| {
                let x = DVector::from_column_slice(x);
                0.5 * x.dot(&(&qv * &x)) + lv.dot(&x) + c
            },
            move |x| {
                let x = DVector::from_column_slice(x);
                (&q * &x + &l).as_slice().to_vec()
            },
        ))
    }

    /// x ↦ outer(F₁(x),…,F_m(x)), with the chain rule for partials when
    /// every inner field is analytic.
    pub fn compose<O, D>(inner: &[ScalarField], outer: O, outer_grad: D) -> Result<Self>
    where
        O: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        D: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        let dim = inner.first().map(|f| f.dim).ok_or_else(|| {
            Error::InvalidParameter("composition needs at least one inner field".into())
        })?;
        for f in inner {
            expect_dim(dim, f.dim)?;
        }
        let fields: Arc<Vec<ScalarField>> = Arc::new(inner.to_vec());
        let outer = Arc::new(outer);
        let values = {
            let fields = Arc::clone(&fields);
            move |x: &[f64]| fields.iter().map(|f| (f.value)(x)).collect::<Vec<_>>()
        };
        let values = Arc::new(values);
        let value = {
            let (values, outer) = (Arc::clone(&values), Arc::clone(&outer));
            move |x: &[f64]| outer(&values(x))
        };
        if fields.iter().all(|f| f.partials.is_some()) {
            let partials = move |x: &[f64]| {
                let w = outer_grad(&values(x));
                let mut out = vec![0.0; x.len()];
                for (f, wi) in fields.iter().zip(w) {
                    let p = (f.partials.as_ref().expect("checked analytic"))(x);
                    for (o, pi) in out.iter_mut().zip(p) {
                        *o += wi * pi;
                    }
                }
                out
            };
            Ok(Self::analytic(dim, value, partials))
        } else {
            Ok(Self::new(dim, value))
        }
    }

    /// a·F.
    pub fn scaled(&self, a: f64) -> Self {
        let v = Arc::clone(&self.value);
        match &self.partials {
            Some(p) => {
                let p = Arc::clone(p);
                Self::analytic(self.dim, move |x| a * v(x), move |x| p(x).into_iter().map(|d| a * d).collect())
            }
            None => Self::new(self.dim, move |x| a * v(x)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn value(&self, x: &ChartPoint) -> Result<f64> {
        x.expect_dim(self.dim)?;
        let v = (self.value)(x.as_slice());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("scalar field value"))
        }
    }

    /// Coefficients ∂F/∂xᵃ at `x`.
    pub fn partials(&self, x: &ChartPoint) -> Result<DVector<f64>> {
        match &self.partials {
            Some(p) => {
                x.expect_dim(self.dim)?;
                let d = p(x.as_slice());
                expect_dim(self.dim, d.len())?;
                if !d.iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("scalar field partials"));
                }
                Ok(DVector::from_vec(d))
            }
            None => self.fd_partials(x),
        }
    }

    /// Central-difference partials with step `fd_step` per coordinate.
    pub fn fd_partials(&self, x: &ChartPoint) -> Result<DVector<f64>> {
        x.expect_dim(self.dim)?;
        let mut probe = x.as_slice().to_vec();
        let mut out = DVector::zeros(self.dim);
        for a in 0..self.dim {
            let xa = probe[a];
            let h = fd_step(xa);
            probe[a] = xa + h;
            let up = (self.value)(&probe);
            probe[a] = xa - h;
            let down = (self.value)(&probe);
            probe[a] = xa;
            out[a] = (up - down) / (2.0 * h);
        }
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::NonFinite("finite-difference partials"))
        }
    }
}

type VectorFn = dyn Fn(&ChartPoint) -> Result<TangentVector> + Send + Sync;

/// A vector field x ↦ X(x) on the chart.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    eval: Arc<VectorFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl VectorField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&ChartPoint) -> Result<TangentVector> + Send + Sync + 'static,
    {
        Self { dim, eval: Arc::new(eval) }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| Ok(TangentVector::zeros(dim)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &ChartPoint) -> Result<TangentVector> {
        x.expect_dim(self.dim)?;
        let v = (self.eval)(x)?;
        expect_dim(self.dim, v.dim())?;
        Ok(v)
    }
}

/// ∇F = g⁻¹ dF at `x`.
pub fn gradient(g: &MetricField, f: &ScalarField, x: &ChartPoint) -> Result<TangentVector> {
    expect_dim(g.dim(), f.dim())?;
    let metric = g.at(x)?;
    Ok(TangentVector(metric.raise(&f.partials(x)?)))
}

/// uᵀ g(x) v.
pub fn inner(g: &MetricField, x: &ChartPoint, u: &TangentVector, v: &TangentVector) -> Result<f64> {
    expect_dim(g.dim(), u.dim())?;
    expect_dim(g.dim(), v.dim())?;
    let m = g.matrix(x)?;
    Ok(u.0.dot(&(&m * &v.0)))
}

/// Outcome of comparing analytic partials against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialsReport {
    pub max_relative_error: f64,
    pub passed: bool,
}

pub const PARTIALS_REL_TOL: f64 = 1e-5;
pub const PARTIALS_ABS_FLOOR: f64 = 1e-8;

/// Compares analytic partials of `f` with central differences at `x`.
///
/// Components whose absolute discrepancy is below `PARTIALS_ABS_FLOOR`
/// count as exact. A field without analytic partials, or one that cannot
/// be evaluated at `x`, fails the check.
pub fn check_partials(f: &ScalarField, x: &ChartPoint) -> PartialsReport {
    let failed = PartialsReport { max_relative_error: f64::INFINITY, passed: false };
    if !f.has_analytic_partials() {
        return failed;
    }
    let (Ok(analytic), Ok(numeric)) = (f.partials(x), f.fd_partials(x)) else {
        return failed;
    };
    let mut worst = 0.0f64;
    for (a, d) in analytic.iter().zip(numeric.iter()) {
        let diff = (a - d).abs();
        if diff <= PARTIALS_ABS_FLOOR {
            continue;
        }
        worst = worst.max(diff / a.abs().max(d.abs()));
    }
    PartialsReport { max_relative_error: worst, passed: worst <= PARTIALS_REL_TOL }
}
