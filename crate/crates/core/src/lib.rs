//! Model-based super-resolution.
//!
//! Recovers the parameters of a parametric signal from its low-frequency
//! Fourier samples by nonlinear least squares, then extrapolates the
//! spectrum to higher frequencies. Alongside the solver the crate computes
//! the stability and local-convexity certificates that say when such a
//! recovery can be trusted.

pub mod error;
pub mod experiments;
pub mod grid;
pub mod linalg;
pub mod models;
pub mod render;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};
pub use grid::{FrequencyGrid, Measurement, WrapPosition};
pub use models::ModelInstance;
