use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HopfError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("mode {n} out of range (cutoff {n_t})")]
    ModeOutOfRange { n: i64, n_t: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("operator A is singular: {0}")]
    SingularOperator(String),
    #[error("mode {n} is resonant (in lies in the spectrum of A); use the projection path")]
    Resonance { n: i64 },
    #[error("mode {n} is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { n: i64, condition: f64 },
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("degenerate: {0}")]
    Degenerate(String),
    #[error("inconsistent: {0}")]
    Inconsistent(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, HopfError>;
