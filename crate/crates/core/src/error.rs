use alloc::string::String;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported exponent p = {0}")]
    UnsupportedExponent(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("insufficient data: {usable} usable points, at least {required} required")]
    InsufficientData { usable: usize, required: usize },
    #[error("problem too large: {0}")]
    SizeLimit(String),
    #[error("instance construction failed after {attempts} attempts")]
    ConstructionFailed { attempts: u32 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
