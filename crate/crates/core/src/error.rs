use thiserror::Error;

/// Errors raised by the pricing engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate coefficient at z = {z}: {reason}")]
    DegenerateCoefficient { z: f64, reason: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("singular tridiagonal system at row {0}")]
    SingularMatrix(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn ensure_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite and > 0, got {v}")))
    }
}
