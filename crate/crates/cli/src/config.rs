//! JSON run configuration and its translation into core problem types.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use geodissip::integrate::{ControlMode, FlowSpec};
use geodissip::models::{LandauLifschitzModel, RigidBodyModel};
use geodissip::{ChartPoint, ControlProblem, MetricField, ScalarField, TangentVector, VectorField};

pub const LANDAU_LIFSCHITZ: &str = "landau-lifschitz";
pub const RIGID_BODY: &str = "rigid-body";
pub const CUSTOM: &str = "custom";

/// Names accepted in the `model` field.
pub const REGISTERED_MODELS: [&str; 3] = [LANDAU_LIFSCHITZ, RIGID_BODY, CUSTOM];

/// Landau-Lifschitz defaults: γ = λ = 1, b = (0, 0, 1).
pub const LL_DEFAULT_GAMMA: f64 = 1.0;
pub const LL_DEFAULT_LAMBDA: f64 = 1.0;
pub const LL_DEFAULT_B: [f64; 3] = [0.0, 0.0, 1.0];
/// Rigid-body default moments of inertia.
pub const RB_DEFAULT_INERTIA: [f64; 3] = [3.0, 2.0, 1.0];

/// A configuration problem, tagged with the offending field.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "invalid config: {}", self.message)
        } else {
            write!(f, "invalid config field '{}': {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    /// Constant field b with H(M) = b·M.
    pub b: Option<[f64; 3]>,
    pub inertia: Option<[f64; 3]>,
    /// Permit I₁ = I₂.
    #[serde(default)]
    pub axisymmetric: bool,
}

/// Scalar field description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant(f64),
    /// 1-based coordinate index.
    Coordinate(usize),
    HalfNormSquared,
    Linear { a: Vec<f64>, #[serde(default)] c: f64 },
    Quadratic { q: Vec<Vec<f64>>, #[serde(default)] l: Option<Vec<f64>>, #[serde(default)] c: f64 },
}

impl FieldSpec {
    pub fn build(&self, dim: usize, field: &str) -> CResult<ScalarField> {
        match self {
            FieldSpec::Constant(c) => Ok(ScalarField::constant(dim, *c)),
            FieldSpec::Coordinate(i) => {
                if *i == 0 || *i > dim {
                    return Err(ConfigError::new(field, format!("coordinate index {i} outside 1..={dim}")));
                }
                Ok(ScalarField::coordinate(dim, i - 1))
            }
            FieldSpec::HalfNormSquared => Ok(ScalarField::half_norm_squared(dim)),
            FieldSpec::Linear { a, c } => {
                check_len(a.len(), dim, field)?;
                let q = DMatrix::zeros(dim, dim);
                ScalarField::quadratic(q, DVector::from_column_slice(a), *c)
                    .map_err(|e| ConfigError::new(field, e.to_string()))
            }
            FieldSpec::Quadratic { q, l, c } => {
                let q = matrix(q, dim, field)?;
                let l = match l {
                    Some(l) => {
                        check_len(l.len(), dim, field)?;
                        DVector::from_column_slice(l)
                    }
                    None => DVector::zeros(dim),
                };
                ScalarField::quadratic(q, l, *c).map_err(|e| ConfigError::new(field, e.to_string()))
            }
        }
    }
}

fn check_len(found: usize, dim: usize, field: &str) -> CResult<()> {
    if found == dim {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("expected {dim} entries, found {found}")))
    }
}

fn matrix(rows: &[Vec<f64>], dim: usize, field: &str) -> CResult<DMatrix<f64>> {
    check_len(rows.len(), dim, field)?;
    for r in rows {
        check_len(r.len(), dim, field)?;
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean,
    Diagonal(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

/// Base vector field description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSpec {
    /// X(x) = A x.
    Linear(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    pub dim: usize,
    pub metric: MetricSpec,
    pub conserved: Vec<FieldSpec>,
    pub target: FieldSpec,
    #[serde(default)]
    pub base: Option<BaseSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Off,
    V0,
    Rate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub mode: ModeName,
    /// Rate of dissipation h (rate mode).
    #[serde(default)]
    pub h: Option<FieldSpec>,
    /// Prolongation q of h/det Σ (rate mode, optional).
    #[serde(default)]
    pub q: Option<FieldSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub x0: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { path: None, format: Format::Csv, stride: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub custom: Option<CustomProblem>,
    pub control: ControlSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A model resolved from the configuration.
#[derive(Clone, Debug)]
pub enum ResolvedModel {
    LandauLifschitz(LandauLifschitzModel),
    RigidBody(RigidBodyModel),
    Custom,
}

/// Everything `simulate` needs, with the defaults that were applied.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub model: ResolvedModel,
    pub spec: FlowSpec,
    pub defaults: Vec<String>,
}

fn finite(v: f64, field: &str) -> CResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(field, "must be finite"))
    }
}

pub fn parse_config(text: &str) -> CResult<RunConfig> {
    serde_json::from_str(text).map_err(|e| ConfigError::new("", e.to_string()))
}

pub fn unknown_model(name: &str) -> ConfigError {
    ConfigError::new(
        "model",
        format!("unknown model '{name}'; registered models: {}", REGISTERED_MODELS.join(", ")),
    )
}

/// Builds the model named `name` from `params`, listing applied defaults.
pub fn build_model(name: &str, params: &ModelParams, defaults: &mut Vec<String>) -> CResult<ResolvedModel> {
    let mut pick = |value: Option<f64>, default: f64, key: &str| -> CResult<f64> {
        match value {
            Some(v) => finite(v, &format!("params.{key}")),
            None => {
                defaults.push(format!("params.{key} = {default}"));
                Ok(default)
            }
        }
    };
    match name {
        LANDAU_LIFSCHITZ => {
            let gamma = pick(params.gamma, LL_DEFAULT_GAMMA, "gamma")?;
            let lambda = pick(params.lambda, LL_DEFAULT_LAMBDA, "lambda")?;
            let b = match params.b {
                Some(b) => b,
                None => {
                    defaults.push(format!("params.b = {LL_DEFAULT_B:?}"));
                    LL_DEFAULT_B
                }
            };
            LandauLifschitzModel::new(gamma, lambda, b)
                .map(ResolvedModel::LandauLifschitz)
                .map_err(|e| ConfigError::new("params.lambda", e.to_string()))
        }
        RIGID_BODY => {
            let i = match params.inertia {
                Some(i) => i,
                None => {
                    defaults.push(format!("params.inertia = {RB_DEFAULT_INERTIA:?}"));
                    RB_DEFAULT_INERTIA
                }
            };
            let m = if params.axisymmetric {
                if i[0] != i[1] {
                    return Err(ConfigError::new("params.inertia", "axisymmetric requires I1 = I2"));
                }
                RigidBodyModel::axisymmetric(i[0], i[2])
            } else {
                RigidBodyModel::new(i[0], i[1], i[2])
            };
            m.map(ResolvedModel::RigidBody).map_err(|e| ConfigError::new("params.inertia", e.to_string()))
        }
        CUSTOM => Ok(ResolvedModel::Custom),
        other => Err(unknown_model(other)),
    }
}

fn build_custom(c: &CustomProblem) -> CResult<(ControlProblem, Option<VectorField>)> {
    let n = c.dim;
    if n == 0 {
        return Err(ConfigError::new("custom.dim", "must be at least 1"));
    }
    let metric = match &c.metric {
        MetricSpec::Euclidean => MetricField::euclidean(n),
        MetricSpec::Diagonal(d) => {
            check_len(d.len(), n, "custom.metric")?;
            MetricField::diagonal(d).map_err(|e| ConfigError::new("custom.metric", e.to_string()))?
        }
        MetricSpec::Matrix(m) => MetricField::constant(matrix(m, n, "custom.metric")?)
            .map_err(|e| ConfigError::new("custom.metric", e.to_string()))?,
    };
    if c.conserved.is_empty() {
        return Err(ConfigError::new("custom.conserved", "at least one conserved field is required"));
    }
    let conserved = c
        .conserved
        .iter()
        .enumerate()
        .map(|(i, f)| f.build(n, &format!("custom.conserved[{i}]")))
        .collect::<CResult<Vec<_>>>()?;
    let target = c.target.build(n, "custom.target")?;
    let problem = ControlProblem::new(metric, conserved, target).map_err(|e| ConfigError::new("custom", e.to_string()))?;
    let base = match &c.base {
        None => None,
        Some(BaseSpec::Linear(a)) => {
            let a = matrix(a, n, "custom.base")?;
            Some(VectorField::new(n, move |x| Ok(TangentVector::from_vector(&a * x.coords()))))
        }
    };
    Ok((problem, base))
}

/// Problem and base field for a resolved model.
pub fn model_problem(
    model: &ResolvedModel,
    custom: Option<&CustomProblem>,
) -> CResult<(ControlProblem, Option<VectorField>)> {
    let core = |e: geodissip::Error| ConfigError::new("model", e.to_string());
    match model {
        ResolvedModel::LandauLifschitz(m) => Ok((m.problem().map_err(core)?, Some(m.base_vector_field()))),
        ResolvedModel::RigidBody(m) => Ok((m.problem().map_err(core)?, Some(m.base_vector_field()))),
        ResolvedModel::Custom => {
            build_custom(custom.ok_or_else(|| ConfigError::new("custom", "required when model is \"custom\""))?)
        }
    }
}

impl RunConfig {
    /// Validates the configuration and builds the flow it describes.
    pub fn resolve(&self) -> CResult<Resolved> {
        let mut defaults = Vec::new();
        let model = build_model(&self.model, &self.params, &mut defaults)?;
        if self.model != CUSTOM && self.custom.is_some() {
            return Err(ConfigError::new("custom", "only allowed when model is \"custom\""));
        }
        let (mut problem, base) = model_problem(&model, self.custom.as_ref())?;
        let n = problem.dim();

        let it = &self.integrator;
        finite(it.t0, "integrator.t0")?;
        finite(it.t1, "integrator.t1")?;
        if !(it.dt.is_finite() && it.dt > 0.0) {
            return Err(ConfigError::new("integrator.dt", format!("dt must be positive, got {}", it.dt)));
        }
        if it.t1 <= it.t0 {
            return Err(ConfigError::new("integrator.t1", "t1 must exceed t0"));
        }
        if it.dt > it.t1 - it.t0 {
            return Err(ConfigError::new("integrator.dt", "dt must not exceed t1 - t0"));
        }
        if it.x0.len() != n {
            return Err(ConfigError::new(
                "integrator.x0",
                format!("expected {n} coordinates, found {}", it.x0.len()),
            ));
        }
        let x0 = ChartPoint::new(it.x0.clone()).map_err(|e| ConfigError::new("integrator.x0", e.to_string()))?;
        if self.output.stride == 0 {
            return Err(ConfigError::new("output.stride", "stride must be at least 1"));
        }

        let c = &self.control;
        let mode = match c.mode {
            ModeName::Off => ControlMode::Off,
            ModeName::V0 => ControlMode::V0,
            ModeName::Rate => ControlMode::Rate,
        };
        if mode != ControlMode::Rate && (c.h.is_some() || c.q.is_some()) {
            return Err(ConfigError::new("control", "h and q are only used in rate mode"));
        }
        if mode == ControlMode::Rate {
            let h = c.h.as_ref().ok_or_else(|| ConfigError::new("control.h", "rate mode requires h"))?;
            problem = problem
                .with_rate(h.build(n, "control.h")?)
                .map_err(|e| ConfigError::new("control.h", e.to_string()))?;
            if let Some(q) = &c.q {
                problem = problem
                    .with_prolongation(q.build(n, "control.q")?)
                    .map_err(|e| ConfigError::new("control.q", e.to_string()))?;
            }
        }
        defaults.push("w = 0".to_string());

        let mut spec = FlowSpec::new(problem, mode, x0).with_time(it.t0, it.t1, it.dt);
        if let Some(b) = base {
            spec = spec.with_base(b);
        }
        Ok(Resolved { model, spec, defaults })
    }
}
