use thiserror::Error;

use crate::dynamics::MreState;

/// Errors raised by the spectral kernels, the integrator and the exact-solution tools.
#[derive(Debug, Error)]
pub enum MreError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite coefficients at t = {t}; last valid state kept")]
    BlowUp { t: f64, last_valid: Box<MreState> },

    #[error("precision error: {0}")]
    Precision(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MreError>;
