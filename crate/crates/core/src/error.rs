//! Error type shared by the solver crates.

use thiserror::Error;

/// Errors produced by grid construction, assembly, and the solver drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("step control failed: {0}")]
    StepControl(String),

    /// Fixed-point iteration exceeded its cap. Carries the residual history
    /// so callers can inspect how the iteration behaved.
    #[error(
        "fixed-point iteration did not converge after {iterations} iterations (last residual {last:.3e})"
    )]
    Divergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("instability detected at step {step}: {what}")]
    Instability { step: usize, what: String },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
