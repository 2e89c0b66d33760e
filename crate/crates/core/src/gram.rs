//! Σ matrices of pairwise gradient inner products, their determinants, and
//! the Cramer solution of the defining linear system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{expect_dim, ChartPoint, MetricAt, MetricField, ScalarField, TangentVector};

/// Determinant with the empty-matrix convention det() = 1.
///
/// Sizes up to 3 use cofactor expansion, larger ones LU with partial
/// pivoting.
pub fn determinant(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "determinant of a non-square matrix");
    match m.nrows() {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => m.clone().lu().determinant(),
    }
}

/// Gradients of an ordered list of fields at one point, with their Gram
/// matrix precomputed. Labels used by [`GradientFrame::sigma`] are
/// positions in that list.
#[derive(Clone, Debug)]
pub struct GradientFrame {
    metric: MetricAt,
    differentials: Vec<DVector<f64>>,
    gradients: Vec<DVector<f64>>,
    gram: DMatrix<f64>,
}

impl GradientFrame {
    pub fn new(g: &MetricField, fields: &[&ScalarField], x: &ChartPoint) -> Result<Self> {
        for f in fields {
            expect_dim(g.dim(), f.dim())?;
        }
        let metric = g.at(x)?;
        let differentials = fields.iter().map(|f| f.partials(x)).collect::<Result<Vec<_>>>()?;
        let gradients: Vec<_> = differentials.iter().map(|d| metric.raise(d)).collect();
        let m = fields.len();
        let mut gram = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let v = metric.inner(&gradients[a], &gradients[b]);
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
        }
        Ok(Self { metric, differentials, gradients, gram })
    }

    pub fn len(&self) -> usize {
        self.gradients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gradients.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &MetricAt {
        &self.metric
    }

    pub fn gradient(&self, label: usize) -> &DVector<f64> {
        &self.gradients[label]
    }

    pub fn differential(&self, label: usize) -> &DVector<f64> {
        &self.differentials[label]
    }

    /// ⟨∇a, ∇b⟩.
    pub fn inner(&self, a: usize, b: usize) -> f64 {
        self.gram[(a, b)]
    }

    /// Σ with entries[i][j] = ⟨∇cols[j], ∇rows[i]⟩.
    pub fn sigma(&self, rows: &[usize], cols: &[usize]) -> SigmaMatrix {
        let entries = DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.gram[(cols[j], rows[i])]);
        SigmaMatrix { rows: rows.to_vec(), cols: cols.to_vec(), entries }
    }

    pub fn sigma_det(&self, rows: &[usize], cols: &[usize]) -> f64 {
        determinant(&self.sigma(rows, cols).entries)
    }

    /// Regularity cutoff ε_reg for the Gram matrix over `labels`.
    pub fn regularity_threshold(&self, labels: &[usize]) -> f64 {
        let scale = labels.iter().map(|&a| self.gram[(a, a)]).fold(1.0f64, f64::max);
        REGULARITY_FACTOR * scale * scale
    }
}

/// ε_reg = `REGULARITY_FACTOR` · max(1, largest diagonal Gram entry)².
pub const REGULARITY_FACTOR: f64 = 1e-10;

/// r×s matrix of gradient inner products, Σ^{(rows)}_{(cols)}.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaMatrix {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub entries: DMatrix<f64>,
}

impl SigmaMatrix {
    pub fn det(&self) -> f64 {
        determinant(&self.entries)
    }
}

/// Σ^{(rowFields)}_{(colFields)} at `x`.
pub fn sigma(
    g: &MetricField,
    row_fields: &[ScalarField],
    col_fields: &[ScalarField],
    x: &ChartPoint,
) -> Result<SigmaMatrix> {
    let all: Vec<&ScalarField> = row_fields.iter().chain(col_fields).collect();
    let frame = GradientFrame::new(g, &all, x)?;
    let r = row_fields.len();
    let rows: Vec<usize> = (0..r).collect();
    let cols: Vec<usize> = (r..all.len()).collect();
    let mut s = frame.sigma(&rows, &cols);
    s.cols = (0..col_fields.len()).collect();
    Ok(s)
}

/// Determinant of the Gram matrix of `fields` at `x`. The raw value is
/// returned; it is nonnegative up to round-off.
pub fn gram_det(g: &MetricField, fields: &[ScalarField], x: &ChartPoint) -> Result<f64> {
    let refs: Vec<&ScalarField> = fields.iter().collect();
    let frame = GradientFrame::new(g, &refs, x)?;
    let labels: Vec<usize> = (0..fields.len()).collect();
    Ok(frame.sigma_det(&labels, &labels))
}

/// Rank comparison for the degenerate case det Σ = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostic {
    /// rank Σ^{(F₁..F_k,G)}_{(F₁..F_k,G)}
    pub rank_full: usize,
    /// rank Σ^{(F₁..F_k)}_{(F₁..F_k,G)}
    pub rank_conserved_rows: usize,
}

impl RankDiagnostic {
    /// Whether the defining system admits a solution for rate value `h`.
    pub fn compatible(&self, h: f64) -> bool {
        self.rank_conserved_rows < self.rank_full || h == 0.0
    }
}

/// Numerical rank with tolerance 1e-10·σ_max.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax).count()
}

pub(crate) fn rank_diagnostic(frame: &GradientFrame, k: usize) -> RankDiagnostic {
    let all: Vec<usize> = (0..=k).collect();
    let conserved: Vec<usize> = (0..k).collect();
    RankDiagnostic {
        rank_full: numerical_rank(&frame.sigma(&all, &all).entries),
        rank_conserved_rows: numerical_rank(&frame.sigma(&conserved, &all).entries),
    }
}

/// Coefficients of v = Σ αᵢ∇Fᵢ + α∇G solving the defining system.
#[derive(Clone, Debug, PartialEq)]
pub struct CramerSolution {
    pub alphas: Vec<f64>,
    pub alpha: f64,
}

impl CramerSolution {
    /// Assembles Σ αᵢ∇Fᵢ + α∇G from a frame labelled (F₁..F_k, G).
    pub fn assemble(&self, frame: &GradientFrame) -> TangentVector {
        let k = self.alphas.len();
        let mut v = frame.gradient(k) * self.alpha;
        for (i, a) in self.alphas.iter().enumerate() {
            v += frame.gradient(i) * *a;
        }
        TangentVector::from_vector(v)
    }
}

/// Signed minor (−1)^{i+k+1} det Σ^{(F₁..F_k)}_{(F₁..F̂ᵢ..F_k,G)}, `i` 0-based.
pub(crate) fn signed_conserved_minor(frame: &GradientFrame, k: usize, i: usize) -> f64 {
    let rows: Vec<usize> = (0..k).collect();
    let cols: Vec<usize> = (0..=k).filter(|&c| c != i).collect();
    // 1-based exponent (i+1)+k+1 has the parity of i+k.
    let sign = if (i + k).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * frame.sigma_det(&rows, &cols)
}

pub(crate) fn cramer_from_frame(frame: &GradientFrame, k: usize, h: f64) -> Result<CramerSolution> {
    let all: Vec<usize> = (0..=k).collect();
    let det_full = frame.sigma_det(&all, &all);
    let threshold = frame.regularity_threshold(&all);
    if det_full.abs() <= threshold {
        return Err(Error::DegenerateGram {
            det: det_full,
            threshold,
            diagnostic: Some(rank_diagnostic(frame, k)),
        });
    }
    let conserved: Vec<usize> = (0..k).collect();
    let scale = h / det_full;
    let alphas = (0..k).map(|i| scale * signed_conserved_minor(frame, k, i)).collect();
    let alpha = scale * frame.sigma_det(&conserved, &conserved);
    Ok(CramerSolution { alphas, alpha })
}

/// Cramer solution of the defining system with right-hand side
/// (0,…,0,h) at `x`.
pub fn cramer_solve(
    g: &MetricField,
    conserved: &[ScalarField],
    target: &ScalarField,
    h_value: f64,
    x: &ChartPoint,
) -> Result<CramerSolution> {
    let mut refs: Vec<&ScalarField> = conserved.iter().collect();
    refs.push(target);
    let frame = GradientFrame::new(g, &refs, x)?;
    cramer_from_frame(&frame, conserved.len(), h_value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> ChartPoint {
        ChartPoint::new(c.to_vec()).unwrap()
    }

    fn f_and_g() -> (ScalarField, ScalarField) {
        (ScalarField::half_norm_squared(3), ScalarField::coordinate(3, 2))
    }

    #[test]
    fn determinant_conventions() {
        assert_eq!(determinant(&DMatrix::zeros(0, 0)), 1.0);
        let m = DMatrix::from_row_slice(4, 4, &[
            2.0, 1.0, 0.0, 0.0, 1.0, 3.0, 1.0, 0.0, 0.0, 1.0, 4.0, 1.0, 0.0, 0.0, 1.0, 5.0,
        ]);
        // tridiagonal recurrence: d1=2, d2=5, d3=4*5-2=18, d4=5*18-5=85
        assert!((determinant(&m) - 85.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_examples() {
        let (f, gf) = f_and_g();
        let e = MetricField::euclidean(3);
        let s = sigma(&e, std::slice::from_ref(&f), std::slice::from_ref(&f), &pt(&[1.0, 2.0, 2.0])).unwrap();
        assert!((s.entries[(0, 0)] - 9.0).abs() < 1e-13);
        let s = sigma(&e, &[f], &[gf], &pt(&[1.0, 1.0, 1.0])).unwrap();
        assert!((s.entries[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_layout_rows_are_row_fields() {
        // entries[i][j] = <grad col_j, grad row_i>, 2 rows x 1 column
        let e = MetricField::euclidean(3);
        let rows = [ScalarField::coordinate(3, 0), ScalarField::half_norm_squared(3)];
        let cols = [ScalarField::coordinate(3, 1)];
        let s = sigma(&e, &rows, &cols, &pt(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.entries.shape(), (2, 1));
        assert!((s.entries[(0, 0)] - 0.0).abs() < 1e-15);
        assert!((s.entries[(1, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gram_det_examples() {
        let (f, gf) = f_and_g();
        let e = MetricField::euclidean(3);
        assert!((gram_det(&e, std::slice::from_ref(&f), &pt(&[0.0, 3.0, 4.0])).unwrap() - 25.0).abs() < 1e-12);
        assert!(gram_det(&e, &[f.clone(), f.clone()], &pt(&[0.3, 1.0, 2.0])).unwrap().abs() < 1e-12);
        assert!((gram_det(&e, &[f, gf], &pt(&[1.0, 1.0, 1.0])).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn cramer_examples() {
        let (f, gf) = f_and_g();
        let e = MetricField::euclidean(3);
        let x = pt(&[1.0, 1.0, 1.0]);
        let s = cramer_solve(&e, std::slice::from_ref(&f), &gf, 2.0, &x).unwrap();
        assert!((s.alphas[0] + 1.0).abs() < 1e-13);
        assert!((s.alpha - 3.0).abs() < 1e-13);
        let s = cramer_solve(&e, std::slice::from_ref(&f), &gf, 0.0, &x).unwrap();
        assert_eq!(s.alphas[0], 0.0);
        assert_eq!(s.alpha, 0.0);
    }

    #[test]
    fn cramer_degenerate_on_axis_reports_ranks() {
        let (f, gf) = f_and_g();
        let e = MetricField::euclidean(3);
        match cramer_solve(&e, &[f], &gf, 1.0, &pt(&[0.0, 0.0, 2.0])) {
            Err(Error::DegenerateGram { diagnostic: Some(d), .. }) => {
                assert_eq!(d.rank_full, 1);
                assert_eq!(d.rank_conserved_rows, 1);
                assert!(!d.compatible(1.0));
                assert!(d.compatible(0.0));
            }
            other => panic!("expected DegenerateGram, got {other:?}"),
        }
    }
}
