//! Control vector fields that conserve a family of functions F₁..F_k and
//! drive a target G at a prescribed rate, on a single Riemannian chart.
//!
//! The standard control field v₀ is available through four independent
//! constructions (Gram minors, Hodge star, the tensor T and the leaf
//! projector), all of which agree numerically. The `integrate` module
//! runs the resulting flows with conservation diagnostics, and `models`
//! packages the Landau-Lifschitz and Morrison rigid-body systems.

pub mod control;
pub mod error;
pub mod exterior;
pub mod gram;
pub mod instances;
pub mod integrate;
pub mod leafgeom;
pub mod manifold;
pub mod models;
pub mod verify;

pub use control::ControlProblem;
pub use error::{Error, Result};
pub use exterior::AlternatingForm;
pub use manifold::{ChartPoint, MetricField, ScalarField, TangentVector, VectorField};
