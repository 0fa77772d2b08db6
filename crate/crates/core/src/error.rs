use thiserror::Error;

/// Errors raised by the estimators, samplers and experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    Empty,

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("design point {value} at index {index} lies outside [0, 1]")]
    OutOfUnitInterval { index: usize, value: f64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("weight {value} at index {index} is not strictly positive")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("index {index} out of range for sample of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sample too small: need at least {min} points, got {got}")]
    TooSmall { min: usize, got: usize },

    #[error("sample too large for exhaustive enumeration: {got} > {max}")]
    TooLarge { max: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("replication {replication} at n = {n}: {source}")]
    Replication {
        n: usize,
        replication: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
