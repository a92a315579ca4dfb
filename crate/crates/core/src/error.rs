use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    /// An input violates a sign or geometry precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// A value left the representable floating-point range.
    #[error("overflow: {0}")]
    Overflow(String),
    /// A fixed-point iteration grew instead of contracting.
    #[error("iteration diverged: {0}")]
    Diverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;
