//! Geometry of the regular leaves L_c = F⁻¹(c): the degenerate tensor T
//! with v₀ = i_{dG}T, the orthogonal projector onto T_xL_c, the leaf
//! metric τ_c and the rescaling law for functionally dependent conserved
//! quantities.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::control::{self, ControlProblem};
use crate::error::{Error, Result};
use crate::gram::{determinant, GradientFrame};
use crate::manifold::{expect_dim, fd_step, ChartPoint, ScalarField, TangentVector};

/// Contravariant components T^{pq} at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorT {
    components: DMatrix<f64>,
}

impl TensorT {
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// T(α, β) for covectors given by their coefficients.
    pub fn pair(&self, alpha: &DVector<f64>, beta: &DVector<f64>) -> f64 {
        alpha.dot(&(&self.components * beta))
    }

    /// ♯_T(α) = T(α, ·) as a vector.
    pub fn sharp(&self, alpha: &DVector<f64>) -> TangentVector {
        TangentVector::from_vector(self.components.transpose() * alpha)
    }
}

fn sign(exp: usize) -> f64 {
    if exp.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn t_from_frame(frame: &GradientFrame, k: usize) -> TensorT {
    let labels: Vec<usize> = (0..k).collect();
    let mut t = frame.metric().inverse() * frame.sigma_det(&labels, &labels);
    for i in 0..k {
        let cols: Vec<usize> = labels.iter().copied().filter(|&c| c != i).collect();
        for j in 0..k {
            let rows: Vec<usize> = labels.iter().copied().filter(|&r| r != j).collect();
            // empty minor for k = 1 is det() = 1
            let minor = determinant(&frame.sigma(&rows, &cols).entries);
            // (−1)^{i+j+1} with 1-based i, j has the parity of i+j+1 0-based
            let c = sign(i + j + 1) * minor;
            t += frame.gradient(i) * frame.gradient(j).transpose() * c;
        }
    }
    TensorT { components: t }
}

/// T = Σ_{i,j}(−1)^{i+j+1} det Σ^{(F₁..F̂ⱼ..F_k)}_{(F₁..F̂ᵢ..F_k)} ∇Fᵢ⊗∇Fⱼ + det Σ^{(F₁..F_k)}_{(F₁..F_k)} g⁻¹.
pub fn tensor_t(p: &ControlProblem, x: &ChartPoint) -> Result<TensorT> {
    Ok(t_from_frame(&p.conserved_frame(x)?, p.k()))
}

/// v₀ = i_{dG}T.
pub fn v0_via_t(p: &ControlProblem, x: &ChartPoint) -> Result<TangentVector> {
    let t = tensor_t(p, x)?;
    Ok(t.sharp(&p.target().partials(x)?))
}

fn require_regular(frame: &GradientFrame, k: usize) -> Result<f64> {
    let labels: Vec<usize> = (0..k).collect();
    let det = frame.sigma_det(&labels, &labels);
    let threshold = frame.regularity_threshold(&labels);
    if det.abs() <= threshold {
        Err(Error::DegenerateGram { det, threshold, diagnostic: None })
    } else {
        Ok(det)
    }
}

/// Expands the formal determinant
/// | Σ^{(F)}_{(F)}  ⟨v,∇F⟩ |
/// | ∇F₁ … ∇F_k     v      |
/// along its vector-valued last row.
fn formal_determinant(frame: &GradientFrame, k: usize, v: &DVector<f64>) -> DVector<f64> {
    let metric = frame.metric();
    // top k rows of the (k+1)×(k+1) scalar block
    let top = DMatrix::from_fn(k, k + 1, |a, b| {
        if b < k {
            frame.inner(b, a)
        } else {
            metric.inner(v, frame.gradient(a))
        }
    });
    let mut out = DVector::zeros(frame.dim());
    for col in 0..=k {
        let minor = top.clone().remove_column(col);
        let cofactor = sign(k + col) * determinant(&minor);
        let entry = if col < k { frame.gradient(col) } else { v };
        out += entry * cofactor;
    }
    out
}

/// Orthogonal projector of T_xM onto T_xL_c as an n×n matrix acting on
/// contravariant components.
pub fn projector(p: &ControlProblem, x: &ChartPoint) -> Result<DMatrix<f64>> {
    let frame = p.conserved_frame(x)?;
    let k = p.k();
    let det = require_regular(&frame, k)?;
    let n = frame.dim();
    let mut m = DMatrix::zeros(n, n);
    for q in 0..n {
        let e = DVector::from_fn(n, |i, _| if i == q { 1.0 } else { 0.0 });
        m.set_column(q, &(formal_determinant(&frame, k, &e) / det));
    }
    Ok(m)
}

/// v₀ = det Σ^{(F)}_{(F)} · P_{T_xL_c}(∇G).
pub fn v0_via_projection(p: &ControlProblem, x: &ChartPoint) -> Result<TangentVector> {
    let frame = p.conserved_frame(x)?;
    let det = require_regular(&frame, p.k())?;
    let grad_g = frame.metric().raise(&p.target().partials(x)?);
    let proj = projector(p, x)?;
    Ok(TangentVector::from_vector(proj * grad_g * det))
}

/// ♭_T(X) for a leaf-tangent X: the tangential covector α with
/// ♯_T(α) = X, found by least squares on [T; dF-constraints].
pub fn flat_t(p: &ControlProblem, x: &ChartPoint, v: &TangentVector) -> Result<DVector<f64>> {
    let frame = p.conserved_frame(x)?;
    let k = p.k();
    require_regular(&frame, k)?;
    let n = frame.dim();
    expect_dim(n, v.dim())?;
    let t = t_from_frame(&frame, k).components;
    let mut a = DMatrix::zeros(n + k, n);
    a.view_mut((0, 0), (n, n)).copy_from(&t.transpose());
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(v.components());
    for s in 0..k {
        // α(∇F_s) = 0
        a.row_mut(n + s).copy_from(&frame.gradient(s).transpose());
    }
    let svd = a.svd(true, true);
    svd.solve(&rhs, 1e-13).map_err(|e| Error::InvalidParameter(e.to_string()))
}

type EmbeddingFn = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;
type BasisFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
type DomainFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// Explicit parametrization i_c of a regular leaf.
#[derive(Clone)]
pub struct LeafChart {
    leaf_dim: usize,
    ambient_dim: usize,
    embedding: Arc<EmbeddingFn>,
    basis: Option<Arc<BasisFn>>,
    domain: Option<Arc<DomainFn>>,
}

impl fmt::Debug for LeafChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LeafChart")
            .field("leaf_dim", &self.leaf_dim)
            .field("ambient_dim", &self.ambient_dim)
            .finish_non_exhaustive()
    }
}

impl LeafChart {
    /// Chart whose tangent basis is obtained by central differences of the
    /// embedding.
    pub fn new<E>(leaf_dim: usize, ambient_dim: usize, embedding: E) -> Self
    where
        E: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        Self { leaf_dim, ambient_dim, embedding: Arc::new(embedding), basis: None, domain: None }
    }

    /// Analytic pushforward of the coordinate frame (n×m, one column per
    /// leaf coordinate).
    pub fn with_basis<B>(mut self, basis: B) -> Self
    where
        B: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.basis = Some(Arc::new(basis));
        self
    }

    pub fn with_domain<D>(mut self, domain: D) -> Self
    where
        D: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        self.domain = Some(Arc::new(domain));
        self
    }

    pub fn leaf_dim(&self) -> usize {
        self.leaf_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        expect_dim(self.leaf_dim, y.len())?;
        match &self.domain {
            Some(d) if !d(y) => Err(Error::OutsideChart(y.to_vec())),
            _ => Ok(()),
        }
    }

    /// i_c(y).
    pub fn embed(&self, y: &[f64]) -> Result<ChartPoint> {
        self.check(y)?;
        let x = (self.embedding)(y);
        expect_dim(self.ambient_dim, x.len())?;
        ChartPoint::from_vector(x)
    }

    /// Tangent basis i_{c*}(∂/∂yᵃ) as columns of an n×m matrix.
    pub fn basis(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        self.check(y)?;
        let b = match &self.basis {
            Some(b) => b(y),
            None => fd_jacobian(&*self.embedding, y, self.ambient_dim),
        };
        if b.shape() != (self.ambient_dim, self.leaf_dim) {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim, found: b.nrows() });
        }
        Ok(b)
    }

    /// Partials of f∘i_c in leaf coordinates: Bᵀ·df when f has analytic
    /// partials, central differences of the composite otherwise.
    pub fn leaf_partials(&self, f: &ScalarField, y: &[f64]) -> Result<DVector<f64>> {
        self.check(y)?;
        if f.has_analytic_partials() {
            return Ok(self.basis(y)?.transpose() * f.partials(&self.embed(y)?)?);
        }
        let mut probe = y.to_vec();
        let mut out = DVector::zeros(self.leaf_dim);
        for a in 0..self.leaf_dim {
            let ya = probe[a];
            let h = fd_step(ya);
            probe[a] = ya + h;
            let up = f.value(&ChartPoint::from_vector((self.embedding)(&probe))?)?;
            probe[a] = ya - h;
            let down = f.value(&ChartPoint::from_vector((self.embedding)(&probe))?)?;
            probe[a] = ya;
            out[a] = (up - down) / (2.0 * h);
        }
        Ok(out)
    }
}

fn fd_jacobian(f: &EmbeddingFn, y: &[f64], rows: usize) -> DMatrix<f64> {
    let mut probe = y.to_vec();
    let mut out = DMatrix::zeros(rows, y.len());
    for a in 0..y.len() {
        let ya = probe[a];
        let h = fd_step(ya);
        probe[a] = ya + h;
        let up = f(&probe);
        probe[a] = ya - h;
        let down = f(&probe);
        probe[a] = ya;
        out.set_column(a, &((up - down) / (2.0 * h)));
    }
    out
}

/// First fundamental form i_c^*g = Bᵀ g B at leaf point `y`.
pub fn induced_metric(p: &ControlProblem, chart: &LeafChart, y: &[f64]) -> Result<DMatrix<f64>> {
    expect_dim(p.dim(), chart.ambient_dim())?;
    let x = chart.embed(y)?;
    let b = chart.basis(y)?;
    let g = p.metric().matrix(&x)?;
    Ok(b.transpose() * g * b)
}

/// τ_c = (1/det Σ^{(F)}_{(F)} ∘ i_c) · i_c^*g.
pub fn leaf_metric(p: &ControlProblem, chart: &LeafChart, y: &[f64]) -> Result<DMatrix<f64>> {
    let x = chart.embed(y)?;
    let frame = p.conserved_frame(&x)?;
    let det = require_regular(&frame, p.k())?;
    Ok(induced_metric(p, chart, y)? / det)
}

/// τ_c through the tensor route T⁻¹(X, Y) = T(♭_T X, ♭_T Y) on the basis
/// vectors of the chart.
pub fn leaf_metric_via_t(p: &ControlProblem, chart: &LeafChart, y: &[f64]) -> Result<DMatrix<f64>> {
    let x = chart.embed(y)?;
    let b = chart.basis(y)?;
    let t = tensor_t(p, &x)?;
    let flats = (0..chart.leaf_dim())
        .map(|a| flat_t(p, &x, &TangentVector::from_vector(b.column(a).into_owned())))
        .collect::<Result<Vec<_>>>()?;
    let m = chart.leaf_dim();
    Ok(DMatrix::from_fn(m, m, |a, c| t.pair(&flats[a], &flats[c])))
}

/// Leaf gradient ∇_{τ_c}(G∘i_c) compared with v₀ at i_c(y).
#[derive(Clone, Debug, PartialEq)]
pub struct LeafGradientReport {
    /// Components in leaf coordinates.
    pub leaf_gradient: DVector<f64>,
    /// i_{c*} of the leaf gradient.
    pub pushed_forward: DVector<f64>,
    pub v0: DVector<f64>,
    /// max |pushed_forward − v0| / max(‖v0‖∞, ‖pushed_forward‖∞)
    pub max_rel_deviation: f64,
}

pub fn leaf_gradient_check(p: &ControlProblem, chart: &LeafChart, y: &[f64]) -> Result<LeafGradientReport> {
    let tau = leaf_metric(p, chart, y)?;
    let dg = chart.leaf_partials(p.target(), y)?;
    let leaf_gradient = tau
        .cholesky()
        .ok_or(Error::IndefiniteMetric)?
        .solve(&dg);
    let pushed_forward = chart.basis(y)? * &leaf_gradient;
    let v0 = control::v0(p, &chart.embed(y)?)?.into_inner();
    let max_rel_deviation = max_rel_dev(&pushed_forward, &v0);
    Ok(LeafGradientReport { leaf_gradient, pushed_forward, v0, max_rel_deviation })
}

/// max_i |a_i − b_i| / max(‖a‖∞, ‖b‖∞), and 0 when both vanish.
pub fn max_rel_dev(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.amax().max(b.amax());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).amax() / scale
    }
}

/// Comparison of v₀ and det Σ for conserved lists H = h∘F and F.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaleReport {
    /// (det Dh)²
    pub factor: f64,
    pub v0_rel_deviation: f64,
    pub gram_rel_deviation: f64,
    pub passed: bool,
}

pub const RESCALE_REL_TOL: f64 = 1e-8;

/// Checks v₀^{(H)} = (det Dh)²·v₀^{(F)} and det Σ^{(H)} = (det Dh)²·det Σ^{(F)}
/// at `x`, with `p` carrying the F list.
pub fn dependent_rescale_check(
    p: &ControlProblem,
    h_fields: Vec<ScalarField>,
    h_jacobian_det: f64,
    x: &ChartPoint,
) -> Result<RescaleReport> {
    if h_fields.len() != p.k() {
        return Err(Error::DimensionMismatch { expected: p.k(), found: h_fields.len() });
    }
    let ph = p.with_conserved(h_fields)?;
    let det_f = require_regular(&p.conserved_frame(x)?, p.k())?;
    let det_h = require_regular(&ph.conserved_frame(x)?, ph.k())?;
    let factor = h_jacobian_det * h_jacobian_det;
    let vf = control::v0(p, x)?.into_inner() * factor;
    let vh = control::v0(&ph, x)?.into_inner();
    let v0_rel_deviation = max_rel_dev(&vh, &vf);
    let expected = factor * det_f;
    let gram_rel_deviation = (det_h - expected).abs() / det_h.abs().max(expected.abs());
    Ok(RescaleReport {
        factor,
        v0_rel_deviation,
        gram_rel_deviation,
        passed: v0_rel_deviation <= RESCALE_REL_TOL && gram_rel_deviation <= RESCALE_REL_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::MetricField;

    fn pt(c: &[f64]) -> ChartPoint {
        ChartPoint::new(c.to_vec()).unwrap()
    }

    fn sphere_problem() -> ControlProblem {
        ControlProblem::new(
            MetricField::euclidean(3),
            vec![ScalarField::half_norm_squared(3)],
            ScalarField::coordinate(3, 2),
        )
        .unwrap()
    }

    fn assert_mat(m: &DMatrix<f64>, expect: &[f64], tol: f64) {
        for (a, b) in m.transpose().iter().zip(expect) {
            assert!((a - b).abs() <= tol, "{m} vs {expect:?}");
        }
    }

    #[test]
    fn tensor_t_examples() {
        let t = tensor_t(&sphere_problem(), &pt(&[1.0, 0.0, 0.0])).unwrap();
        assert_mat(t.components(), &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 1e-15);

        let f = ScalarField::analytic(3, |x| x[0] * x[0], |x| vec![2.0 * x[0], 0.0, 0.0]);
        let p = ControlProblem::new(MetricField::euclidean(3), vec![f], ScalarField::coordinate(3, 2)).unwrap();
        let t = tensor_t(&p, &pt(&[0.0, 1.0, 1.0])).unwrap();
        assert_eq!(t.components().amax(), 0.0);
    }

    #[test]
    fn v0_via_t_examples() {
        let v = v0_via_t(&sphere_problem(), &pt(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 0.0, 1.0]);
        let f = ScalarField::half_norm_squared(3);
        let same = ControlProblem::new(MetricField::euclidean(3), vec![f.clone()], f).unwrap();
        assert!(v0_via_t(&same, &pt(&[0.4, -0.3, 1.2])).unwrap().max_abs() <= 1e-15);
    }

    #[test]
    fn projector_examples() {
        let p = sphere_problem();
        let m = projector(&p, &pt(&[0.0, 0.0, 1.0])).unwrap();
        assert_mat(&m, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 1e-15);
        let x = pt(&[0.3, -0.8, 0.5]);
        let m = projector(&p, &x).unwrap();
        let grad = DVector::from_column_slice(&[0.3, -0.8, 0.5]);
        assert!((&m * grad).amax() <= 1e-15);
        assert!((m.trace() - 2.0).abs() < 1e-14);
        assert!(matches!(projector(&p, &pt(&[0.0, 0.0, 0.0])), Err(Error::DegenerateGram { .. })));
    }

    #[test]
    fn v0_via_projection_examples() {
        let v = v0_via_projection(&sphere_problem(), &pt(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 0.0, 1.0]);
        // grad G in span of grad F
        let v = v0_via_projection(&sphere_problem(), &pt(&[0.0, 0.0, 3.0])).unwrap();
        assert!(v.max_abs() <= 1e-15);
    }

    #[test]
    fn circle_leaf_metric_is_unit() {
        // F = ½‖x‖² on ℝ², leaf F = c is the circle of radius √(2c)
        let c: f64 = 0.8;
        let r = (2.0 * c).sqrt();
        let p = ControlProblem::new(
            MetricField::euclidean(2),
            vec![ScalarField::half_norm_squared(2)],
            ScalarField::coordinate(2, 0),
        )
        .unwrap();
        let chart = LeafChart::new(1, 2, move |y| DVector::from_column_slice(&[r * y[0].cos(), r * y[0].sin()]));
        let tau = leaf_metric(&p, &chart, &[0.7]).unwrap();
        assert!((tau[(0, 0)] - 1.0).abs() < 1e-9, "{tau}");
        let via_t = leaf_metric_via_t(&p, &chart, &[0.7]).unwrap();
        assert!((via_t[(0, 0)] - 1.0).abs() < 1e-8, "{via_t}");
        let rep = leaf_gradient_check(&p, &chart, &[0.7]).unwrap();
        assert!(rep.max_rel_deviation < 1e-7, "{rep:?}");
    }

    #[test]
    fn rescale_scalar_case() {
        let p = sphere_problem();
        let x = pt(&[0.4, 1.0, -0.2]);
        let h = vec![ScalarField::half_norm_squared(3).scaled(2.0)];
        let rep = dependent_rescale_check(&p, h, 2.0, &x).unwrap();
        assert_eq!(rep.factor, 4.0);
        assert!(rep.passed, "{rep:?}");
        let id = dependent_rescale_check(&p, vec![ScalarField::half_norm_squared(3)], 1.0, &x).unwrap();
        assert!(id.passed && id.v0_rel_deviation == 0.0);
    }

    #[test]
    fn outside_chart_is_rejected() {
        let chart = LeafChart::new(1, 2, |y| DVector::from_column_slice(&[y[0], 0.0])).with_domain(|y| y[0] > 0.0);
        assert!(matches!(chart.embed(&[-1.0]), Err(Error::OutsideChart(_))));
        assert!(chart.embed(&[1.0]).is_ok());
    }
}
