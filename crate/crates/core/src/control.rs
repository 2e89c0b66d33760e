//! The standard control vector field v₀ and general controls
//! u = (h/det Σ)·v₀ + w that conserve F₁..F_k and drive G at rate h.

use crate::error::{Error, Result};
use crate::gram::{cramer_from_frame, rank_diagnostic, signed_conserved_minor, GradientFrame};
use crate::manifold::{expect_dim, ChartPoint, MetricField, ScalarField, TangentVector, VectorField};

/// Relative tolerance for the orthogonality check on a supplied w.
pub const TRANSVERSE_REL_TOL: f64 = 1e-9;

/// The data (g, [F₁..F_k], G, h, w) of a control problem.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    metric: MetricField,
    conserved: Vec<ScalarField>,
    target: ScalarField,
    rate: Option<ScalarField>,
    prolongation: Option<ScalarField>,
    transverse: Option<VectorField>,
    check_transverse: bool,
}

impl ControlProblem {
    pub fn new(metric: MetricField, conserved: Vec<ScalarField>, target: ScalarField) -> Result<Self> {
        if conserved.is_empty() {
            return Err(Error::InvalidParameter("at least one conserved field is required".into()));
        }
        let n = metric.dim();
        for f in &conserved {
            expect_dim(n, f.dim())?;
        }
        expect_dim(n, target.dim())?;
        Ok(Self {
            metric,
            conserved,
            target,
            rate: None,
            prolongation: None,
            transverse: None,
            check_transverse: false,
        })
    }

    pub fn with_rate(mut self, h: ScalarField) -> Result<Self> {
        expect_dim(self.dim(), h.dim())?;
        self.rate = Some(h);
        Ok(self)
    }

    /// Continuous extension q of h/det Σ; when set, it replaces the
    /// division in [`control_field`].
    pub fn with_prolongation(mut self, q: ScalarField) -> Result<Self> {
        expect_dim(self.dim(), q.dim())?;
        self.prolongation = Some(q);
        Ok(self)
    }

    pub fn with_transverse(mut self, w: VectorField) -> Result<Self> {
        expect_dim(self.dim(), w.dim())?;
        self.transverse = Some(w);
        Ok(self)
    }

    /// Enables the orthogonality check on w at every evaluation.
    pub fn with_diagnostics(mut self, enabled: bool) -> Self {
        self.check_transverse = enabled;
        self
    }

    /// Same metric, target and rate with a different conserved list.
    pub fn with_conserved(&self, conserved: Vec<ScalarField>) -> Result<Self> {
        let mut p = Self::new(self.metric.clone(), conserved, self.target.clone())?;
        p.rate = self.rate.clone();
        p.prolongation = self.prolongation.clone();
        p.transverse = self.transverse.clone();
        p.check_transverse = self.check_transverse;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Number k of conserved fields.
    pub fn k(&self) -> usize {
        self.conserved.len()
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn conserved(&self) -> &[ScalarField] {
        &self.conserved
    }

    pub fn target(&self) -> &ScalarField {
        &self.target
    }

    pub fn rate(&self) -> Option<&ScalarField> {
        self.rate.as_ref()
    }

    pub fn transverse(&self) -> Option<&VectorField> {
        self.transverse.as_ref()
    }

    /// Gradient frame labelled F₁..F_k (0..k) and G (k).
    pub fn frame(&self, x: &ChartPoint) -> Result<GradientFrame> {
        let mut refs: Vec<&ScalarField> = self.conserved.iter().collect();
        refs.push(&self.target);
        GradientFrame::new(&self.metric, &refs, x)
    }

    /// Frame over the conserved fields only.
    pub fn conserved_frame(&self, x: &ChartPoint) -> Result<GradientFrame> {
        let refs: Vec<&ScalarField> = self.conserved.iter().collect();
        GradientFrame::new(&self.metric, &refs, x)
    }

    /// det Σ^{(F₁..F_k,G)}_{(F₁..F_k,G)} at `x`.
    pub fn det_sigma_full(&self, x: &ChartPoint) -> Result<f64> {
        let frame = self.frame(x)?;
        let all: Vec<usize> = (0..=self.k()).collect();
        Ok(frame.sigma_det(&all, &all))
    }

    /// det Σ^{(F₁..F_k)}_{(F₁..F_k)} at `x`.
    pub fn det_sigma_conserved(&self, x: &ChartPoint) -> Result<f64> {
        let frame = self.conserved_frame(x)?;
        let labels: Vec<usize> = (0..self.k()).collect();
        Ok(frame.sigma_det(&labels, &labels))
    }
}

/// v₀ = Σᵢ (−1)^{i+k+1} det Σ^{(F₁..F_k)}_{(F₁..F̂ᵢ..F_k,G)} ∇Fᵢ + det Σ^{(F₁..F_k)}_{(F₁..F_k)} ∇G
/// built from a frame labelled (F₁..F_k, G).
pub fn v0_from_frame(frame: &GradientFrame, k: usize) -> TangentVector {
    let conserved: Vec<usize> = (0..k).collect();
    let mut v = frame.gradient(k) * frame.sigma_det(&conserved, &conserved);
    for i in 0..k {
        v += frame.gradient(i) * signed_conserved_minor(frame, k, i);
    }
    TangentVector::from_vector(v)
}

/// The standard control vector field at `x`.
///
/// Polynomial in the Gram entries, so no regularity of Σ is required.
pub fn v0(p: &ControlProblem, x: &ChartPoint) -> Result<TangentVector> {
    Ok(v0_from_frame(&p.frame(x)?, p.k()))
}

fn transverse_at(p: &ControlProblem, frame: &GradientFrame, x: &ChartPoint) -> Result<Option<TangentVector>> {
    let Some(w) = p.transverse.as_ref() else {
        return Ok(None);
    };
    let w = w.eval(x)?;
    if p.check_transverse {
        let wn = frame.metric().inner(w.components(), w.components()).sqrt();
        let mut worst = 0.0f64;
        for label in 0..=p.k() {
            let grad = frame.gradient(label);
            let gn = frame.inner(label, label).sqrt();
            let denom = wn * gn;
            if denom > 0.0 {
                worst = worst.max(frame.metric().inner(w.components(), grad).abs() / denom);
            }
        }
        if worst > TRANSVERSE_REL_TOL {
            return Err(Error::TransverseNotOrthogonal(worst));
        }
    }
    Ok(Some(w))
}

/// u(x) = (h(x)/det Σ(x))·v₀(x) + w(x), or q(x)·v₀(x) + w(x) when a
/// prolongation q is configured.
pub fn control_field(p: &ControlProblem, x: &ChartPoint) -> Result<TangentVector> {
    let frame = p.frame(x)?;
    let k = p.k();
    let v0 = v0_from_frame(&frame, k);
    let scaled = if let Some(q) = p.prolongation.as_ref() {
        q.value(x)? * v0
    } else {
        let h = p.rate.as_ref().ok_or(Error::MissingRate)?.value(x)?;
        let all: Vec<usize> = (0..=k).collect();
        let det = frame.sigma_det(&all, &all);
        let threshold = frame.regularity_threshold(&all);
        if det.abs() <= threshold {
            return Err(Error::DegenerateGram {
                det,
                threshold,
                diagnostic: Some(rank_diagnostic(&frame, k)),
            });
        }
        (h / det) * v0
    };
    Ok(match transverse_at(p, &frame, x)? {
        Some(w) => scaled + w,
        None => scaled,
    })
}

/// Control assembled from the Cramer coefficients for rate value `h`,
/// without the division-free v₀ formula. Used as an oracle.
pub fn control_via_cramer(p: &ControlProblem, x: &ChartPoint, h: f64) -> Result<TangentVector> {
    let frame = p.frame(x)?;
    Ok(cramer_from_frame(&frame, p.k(), h)?.assemble(&frame))
}

/// dG(v) = ∂G/∂xᵃ vᵃ at `x`.
pub fn rate_along(p: &ControlProblem, x: &ChartPoint, v: &TangentVector) -> Result<f64> {
    expect_dim(p.dim(), v.dim())?;
    Ok(p.target.partials(x)?.dot(v.components()))
}
