use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("unknown constellation `{0}`")]
    UnknownConstellation(String),

    #[error("matrix is numerically singular (pivot {pivot:e} at index {index})")]
    Singular { index: usize, pivot: f64 },

    #[error("path delay {delay} exceeds the prefix length {cpp_len}")]
    DelayExceedsPrefix { delay: usize, cpp_len: usize },

    #[error("noise variance must be nonnegative, got {0}")]
    NegativeNoise(f64),

    #[error("{failed} of {attempted} frames failed for detector `{detector}`")]
    FailureThreshold {
        detector: String,
        failed: u64,
        attempted: u64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
