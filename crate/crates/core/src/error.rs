use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of a potential, usually a collision.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },
    /// Case-compatibility or symmetry violation.
    #[error("configuration error: {0}")]
    Configuration(String),
    /// Dimension or layout mismatch between objects.
    #[error("structural error: {0}")]
    Structural(String),
    /// Sampling too coarse to resolve the requested quantity.
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("degenerate: {0}")]
    Degenerate(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
