//! Landau-Lifschitz spin damping and Morrison's metriplectic rigid body as
//! ready-made control problems, with their leaf charts and closed-form
//! leaf expressions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::ControlProblem;
use crate::error::{Error, Result};
use crate::leafgeom::{LeafChart, TensorT};
use crate::manifold::{ChartPoint, MetricField, ScalarField, TangentVector, VectorField};

/// Pole exclusion in the spherical and ellipsoidal leaf charts.
pub const POLE_EXCLUSION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Expected monotone behaviour of G and of the physically named quantity
/// under the controlled flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Monotonicity {
    pub target: Direction,
    pub physical: &'static str,
    pub physical_direction: Direction,
}

fn vec3(x: &ChartPoint) -> Result<Vector3<f64>> {
    x.expect_dim(3)?;
    let c = x.as_slice();
    Ok(Vector3::new(c[0], c[1], c[2]))
}

fn to_tangent(v: Vector3<f64>) -> TangentVector {
    TangentVector::new(v.as_slice().to_vec())
}

fn check_level(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(c))
    }
}

fn polar_domain(y: &[f64]) -> bool {
    y[0] > POLE_EXCLUSION && y[0] < std::f64::consts::PI - POLE_EXCLUSION && y[1].is_finite()
}

/// Ṁ = M×∇H + (λ/γ‖M‖²)⟨M,∇H⟩M − (λ/γ)∇H on ℝ³∖{0}.
#[derive(Clone, Debug)]
pub struct LandauLifschitzModel {
    gamma: f64,
    lambda: f64,
    hamiltonian: ScalarField,
}

impl LandauLifschitzModel {
    /// Constant field: H(M) = b·M.
    pub fn new(gamma: f64, lambda: f64, b: [f64; 3]) -> Result<Self> {
        let h = ScalarField::analytic(3, move |m| b[0] * m[0] + b[1] * m[1] + b[2] * m[2], move |_| b.to_vec());
        Self::with_hamiltonian(gamma, lambda, h)
    }

    pub fn with_hamiltonian(gamma: f64, lambda: f64, hamiltonian: ScalarField) -> Result<Self> {
        if !(gamma.is_finite() && gamma != 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be finite and nonzero, got {gamma}")));
        }
        if !(lambda.is_finite() && lambda / gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda/gamma must be positive, got {}", lambda / gamma)));
        }
        if hamiltonian.dim() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, found: hamiltonian.dim() });
        }
        Ok(Self { gamma, lambda, hamiltonian })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// λ/γ.
    pub fn ratio(&self) -> f64 {
        self.lambda / self.gamma
    }

    pub fn hamiltonian(&self) -> &ScalarField {
        &self.hamiltonian
    }

    fn nonzero(&self, x: &ChartPoint) -> Result<Vector3<f64>> {
        let m = vec3(x)?;
        if m.norm_squared() == 0.0 {
            return Err(Error::OriginExcluded);
        }
        Ok(m)
    }

    fn grad_h(&self, x: &ChartPoint) -> Result<Vector3<f64>> {
        let d = self.hamiltonian.partials(x)?;
        Ok(Vector3::new(d[0], d[1], d[2]))
    }

    /// F = √(λ/γ)‖M‖ = √((2λ/γ)C₀).
    pub fn conserved(&self) -> ScalarField {
        let s = self.ratio().sqrt();
        ScalarField::analytic(
            3,
            move |m| s * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt(),
            move |m| {
                let r = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                m.iter().map(|v| s * v / r).collect()
            },
        )
    }

    /// G = −H.
    pub fn target(&self) -> ScalarField {
        self.hamiltonian.scaled(-1.0)
    }

    pub fn problem(&self) -> Result<ControlProblem> {
        ControlProblem::new(MetricField::euclidean(3), vec![self.conserved()], self.target())
    }

    /// M × ∇H.
    pub fn base_field(&self, x: &ChartPoint) -> Result<TangentVector> {
        let m = self.nonzero(x)?;
        Ok(to_tangent(m.cross(&self.grad_h(x)?)))
    }

    /// (λ/γ‖M‖²)⟨M,∇H⟩M − (λ/γ)∇H.
    pub fn perturbation(&self, x: &ChartPoint) -> Result<TangentVector> {
        let m = self.nonzero(x)?;
        let gh = self.grad_h(x)?;
        let a = self.ratio();
        Ok(to_tangent(m * (a * m.dot(&gh) / m.norm_squared()) - gh * a))
    }

    /// The damping term written as (λ/γ‖M‖²)·M×(M×∇H).
    pub fn damping_cross_form(&self, x: &ChartPoint) -> Result<TangentVector> {
        let m = self.nonzero(x)?;
        let gh = self.grad_h(x)?;
        Ok(to_tangent(m.cross(&m.cross(&gh)) * (self.ratio() / m.norm_squared())))
    }

    pub fn base_vector_field(&self) -> VectorField {
        let me = Arc::new(self.clone());
        VectorField::new(3, move |x| me.base_field(x))
    }

    pub fn perturbation_vector_field(&self) -> VectorField {
        let me = Arc::new(self.clone());
        VectorField::new(3, move |x| me.perturbation(x))
    }

    /// Radius of the leaf F = c.
    pub fn leaf_radius(&self, c: f64) -> Result<f64> {
        check_level(c)?;
        Ok((self.gamma / self.lambda).sqrt() * c)
    }

    /// Spherical chart (θ, φ) ↦ r(sinθcosφ, sinθsinφ, cosθ) of F = c.
    pub fn leaf_chart(&self, c: f64) -> Result<LeafChart> {
        let r = self.leaf_radius(c)?;
        Ok(LeafChart::new(2, 3, move |y| {
            let (st, ct, sp, cp) = (y[0].sin(), y[0].cos(), y[1].sin(), y[1].cos());
            DVector::from_vec(vec![r * st * cp, r * st * sp, r * ct])
        })
        .with_basis(move |y| {
            let (st, ct, sp, cp) = (y[0].sin(), y[0].cos(), y[1].sin(), y[1].cos());
            DMatrix::from_row_slice(3, 2, &[r * ct * cp, -r * st * sp, r * ct * sp, r * st * cp, -r * st, 0.0])
        })
        .with_domain(polar_domain))
    }

    /// τ_c = (γ²c²/λ²)·diag(1, sin²θ).
    pub fn leaf_metric_closed_form(&self, c: f64, theta: f64) -> DMatrix<f64> {
        let s = self.gamma * self.gamma * c * c / (self.lambda * self.lambda);
        DMatrix::from_diagonal(&DVector::from_vec(vec![s, s * theta.sin().powi(2)]))
    }

    /// i_c^*g = (γ/λ)c²·diag(1, sin²θ).
    pub fn induced_metric_closed_form(&self, c: f64, theta: f64) -> DMatrix<f64> {
        let s = c * c / self.ratio();
        DMatrix::from_diagonal(&DVector::from_vec(vec![s, s * theta.sin().powi(2)]))
    }

    /// −(λ²/γ²c²)(∂H/∂θ, (1/sin²θ)∂H/∂φ) on the leaf F = c.
    pub fn leaf_gradient_closed_form(&self, c: f64, y: &[f64]) -> Result<DVector<f64>> {
        let chart = self.leaf_chart(c)?;
        let dh = chart.leaf_partials(&self.hamiltonian, y)?;
        let s = self.lambda * self.lambda / (self.gamma * self.gamma * c * c);
        Ok(DVector::from_vec(vec![-s * dh[0], -s * dh[1] / y[0].sin().powi(2)]))
    }

    /// Components of T in the (θ, φ, r) frame at M.
    pub fn spherical_t(&self, t: &TensorT, x: &ChartPoint) -> Result<DMatrix<f64>> {
        let m = self.nonzero(x)?;
        let r = m.norm();
        let theta = (m[2] / r).clamp(-1.0, 1.0).acos();
        let phi = m[1].atan2(m[0]);
        let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
        // ∂M/∂(θ, φ, r) by columns
        let jac = DMatrix::from_row_slice(
            3,
            3,
            &[r * ct * cp, -r * st * sp, st * cp, r * ct * sp, r * st * cp, st * sp, -r * st, 0.0, ct],
        );
        let inv = jac.try_inverse().ok_or(Error::OutsideChart(x.as_slice().to_vec()))?;
        Ok(&inv * t.components() * inv.transpose())
    }

    /// (λ/γr²)·diag(1, 1/sin²θ, 0) in the (θ, φ, r) frame.
    pub fn spherical_t_closed_form(&self, x: &ChartPoint) -> Result<DMatrix<f64>> {
        let m = self.nonzero(x)?;
        let r2 = m.norm_squared();
        let sin2 = 1.0 - m[2] * m[2] / r2;
        let s = self.ratio() / r2;
        Ok(DMatrix::from_diagonal(&DVector::from_vec(vec![s, s / sin2, 0.0])))
    }

    pub fn monotonicity(&self) -> Monotonicity {
        Monotonicity { target: Direction::Increasing, physical: "H", physical_direction: Direction::Decreasing }
    }
}

/// Euler rigid body with Morrison's metriplectic dissipation [hⁱʲ]∇C.
#[derive(Clone, Debug)]
pub struct RigidBodyModel {
    inertia: [f64; 3],
    casimir: ScalarField,
}

impl RigidBodyModel {
    /// Principal moments with I₁ > I₂ > I₃ > 0 and C = C₀.
    pub fn new(i1: f64, i2: f64, i3: f64) -> Result<Self> {
        if !(i3 > 0.0 && i2 > i3 && i1 > i2 && i1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inertia must satisfy I1 > I2 > I3 > 0, got ({i1}, {i2}, {i3})"
            )));
        }
        Ok(Self { inertia: [i1, i2, i3], casimir: ScalarField::half_norm_squared(3) })
    }

    /// I₁ = I₂.
    pub fn axisymmetric(i12: f64, i3: f64) -> Result<Self> {
        if !(i12 > 0.0 && i3 > 0.0 && i12.is_finite() && i3.is_finite()) {
            return Err(Error::InvalidParameter(format!("inertia must be positive, got ({i12}, {i12}, {i3})")));
        }
        Ok(Self { inertia: [i12, i12, i3], casimir: ScalarField::half_norm_squared(3) })
    }

    /// Replaces C₀; the Casimir property is not checked.
    pub fn with_casimir(mut self, casimir: ScalarField) -> Result<Self> {
        if casimir.dim() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, found: casimir.dim() });
        }
        self.casimir = casimir;
        Ok(self)
    }

    pub fn inertia(&self) -> [f64; 3] {
        self.inertia
    }

    pub fn casimir(&self) -> &ScalarField {
        &self.casimir
    }

    /// H = ½(x₁²/I₁ + x₂²/I₂ + x₃²/I₃).
    pub fn hamiltonian(&self) -> ScalarField {
        let i = self.inertia;
        ScalarField::analytic(
            3,
            move |x| 0.5 * (x[0] * x[0] / i[0] + x[1] * x[1] / i[1] + x[2] * x[2] / i[2]),
            move |x| vec![x[0] / i[0], x[1] / i[1], x[2] / i[2]],
        )
    }

    fn grad_h(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let i = self.inertia;
        Vector3::new(x[0] / i[0], x[1] / i[1], x[2] / i[2])
    }

    /// F = H, G = C.
    pub fn problem(&self) -> Result<ControlProblem> {
        ControlProblem::new(MetricField::euclidean(3), vec![self.hamiltonian()], self.casimir.clone())
    }

    /// Free Euler equations.
    pub fn base_field(&self, x: &ChartPoint) -> Result<TangentVector> {
        let v = vec3(x)?;
        let [i1, i2, i3] = self.inertia;
        Ok(TangentVector::new(vec![
            (1.0 / i3 - 1.0 / i2) * v[1] * v[2],
            (1.0 / i1 - 1.0 / i3) * v[0] * v[2],
            (1.0 / i2 - 1.0 / i1) * v[0] * v[1],
        ]))
    }

    /// Morrison's matrix [hⁱʲ](x) entry by entry.
    pub fn morrison_matrix(&self, x: &ChartPoint) -> Result<DMatrix<f64>> {
        let v = vec3(x)?;
        let [i1, i2, i3] = self.inertia;
        let (a, b, c) = (v[0] / i1, v[1] / i2, v[2] / i3);
        Ok(DMatrix::from_row_slice(
            3,
            3,
            &[b * b + c * c, -a * b, -a * c, -a * b, a * a + c * c, -b * c, -a * c, -b * c, a * a + b * b],
        ))
    }

    /// −∇H⊗∇H + ‖∇H‖²·I.
    pub fn morrison_matrix_from_gradient(&self, x: &ChartPoint) -> Result<DMatrix<f64>> {
        let gh = DVector::from_column_slice(self.grad_h(&vec3(x)?).as_slice());
        Ok(DMatrix::identity(3, 3) * gh.norm_squared() - &gh * gh.transpose())
    }

    /// u = [hⁱʲ]∇C.
    pub fn dissipation(&self, x: &ChartPoint) -> Result<TangentVector> {
        Ok(TangentVector::from_vector(self.morrison_matrix(x)? * self.casimir.partials(x)?))
    }

    pub fn base_vector_field(&self) -> VectorField {
        let me = Arc::new(self.clone());
        VectorField::new(3, move |x| me.base_field(x))
    }

    pub fn dissipation_vector_field(&self) -> VectorField {
        let me = Arc::new(self.clone());
        VectorField::new(3, move |x| me.dissipation(x))
    }

    /// Ellipsoidal chart of H = c with r = √(2c).
    pub fn leaf_chart(&self, c: f64) -> Result<LeafChart> {
        check_level(c)?;
        let r = (2.0 * c).sqrt();
        let s = self.inertia.map(f64::sqrt);
        Ok(LeafChart::new(2, 3, move |y| {
            let (st, ct, sp, cp) = (y[0].sin(), y[0].cos(), y[1].sin(), y[1].cos());
            DVector::from_vec(vec![r * s[0] * st * cp, r * s[1] * st * sp, r * s[2] * ct])
        })
        .with_basis(move |y| {
            let (st, ct, sp, cp) = (y[0].sin(), y[0].cos(), y[1].sin(), y[1].cos());
            DMatrix::from_row_slice(
                3,
                2,
                &[
                    r * s[0] * ct * cp,
                    -r * s[0] * st * sp,
                    r * s[1] * ct * sp,
                    r * s[1] * st * cp,
                    -r * s[2] * st,
                    0.0,
                ],
            )
        })
        .with_domain(polar_domain))
    }

    /// ‖∇H‖² = 2c(sin²θcos²φ/I₁ + sin²θsin²φ/I₂ + cos²θ/I₃) on H = c.
    pub fn grad_h_norm_sq_closed_form(&self, c: f64, theta: f64, phi: f64) -> f64 {
        let [i1, i2, i3] = self.inertia;
        let (st2, ct2) = (theta.sin().powi(2), theta.cos().powi(2));
        let (sp2, cp2) = (phi.sin().powi(2), phi.cos().powi(2));
        2.0 * c * (st2 * cp2 / i1 + st2 * sp2 / i2 + ct2 / i3)
    }

    /// Printed first fundamental form of the ellipsoid H = c.
    pub fn induced_metric_closed_form(&self, c: f64, theta: f64, phi: f64) -> DMatrix<f64> {
        let [i1, i2, i3] = self.inertia;
        let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
        let g11 = 2.0 * c * (i1 * ct * ct * cp * cp + i2 * ct * ct * sp * sp + i3 * st * st);
        let g12 = 2.0 * c * (i2 - i1) * st * ct * sp * cp;
        let g22 = 2.0 * c * st * st * (i1 * sp * sp + i2 * cp * cp);
        DMatrix::from_row_slice(2, 2, &[g11, g12, g12, g22])
    }

    /// v₀|_{L_c} components (θ, φ) for C = C₀:
    /// 2c sinθcosθ(1/I₃ − sin²φ/I₂ − cos²φ/I₁) and 2c(1/I₁ − 1/I₂)sinφcosφ.
    pub fn leaf_gradient_closed_form(&self, c: f64, theta: f64, phi: f64) -> DVector<f64> {
        let [i1, i2, i3] = self.inertia;
        let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
        DVector::from_vec(vec![
            2.0 * c * st * ct * (1.0 / i3 - sp * sp / i2 - cp * cp / i1),
            2.0 * c * (1.0 / i1 - 1.0 / i2) * sp * cp,
        ])
    }

    pub fn monotonicity(&self) -> Monotonicity {
        Monotonicity { target: Direction::Increasing, physical: "C", physical_direction: Direction::Increasing }
    }
}
