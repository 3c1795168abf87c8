//! Error type shared by all simulator modules.

use thiserror::Error;

/// Errors surfaced by the simulator building blocks.
#[derive(Debug, Clone, Error)]
pub enum SimError {
    /// A precondition on an input value or configuration was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Operand dimensions do not match.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Receiver alignment (filter delay) out of range.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A numeric operation failed; never silently ignored.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Fixed-point iteration did not reach the requested tolerance.
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, SimError>;
