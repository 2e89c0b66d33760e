use thiserror::Error;

use crate::gram::RankDiagnostic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("metric is singular at the evaluation point")]
    SingularMetric,

    #[error("metric is not positive definite at the evaluation point")]
    IndefiniteMetric,

    #[error("metric matrix is not symmetric (max asymmetry {0:e})")]
    AsymmetricMetric(f64),

    #[error("degenerate Gram matrix: |det| = {det:e} <= {threshold:e}")]
    DegenerateGram {
        det: f64,
        threshold: f64,
        diagnostic: Option<RankDiagnostic>,
    },

    #[error("control problem has no rate function h")]
    MissingRate,

    #[error("expected a form of degree {expected}, found degree {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("k + 1 = {required} exceeds the chart dimension {dim}")]
    DegreeOverflow { required: usize, dim: usize },

    #[error("dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("invalid multi-index {0:?}")]
    InvalidIndex(Vec<usize>),

    #[error("the origin is excluded from the phase space")]
    OriginExcluded,

    #[error("invalid level c = {0} (must be positive)")]
    InvalidLevel(f64),

    #[error("leaf chart evaluated outside its domain at {0:?}")]
    OutsideChart(Vec<f64>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transverse field is not orthogonal to the gradients (relative {0:e})")]
    TransverseNotOrthogonal(f64),

    #[error("integration step produced a non-finite state at t = {t}")]
    StepFailure { t: f64 },

    #[error("trajectory is empty")]
    EmptyTrajectory,
}
