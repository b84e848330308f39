use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel matrix is ill-conditioned (Cholesky failed with jitter {jitter:e})")]
    IllConditioned { jitter: f64 },

    #[error("density of an estimated shift requires marginalisation; use predictive_density")]
    NeedsMarginalization,

    #[error("empty candidate set")]
    EmptyCandidates,

    #[error("dataset error: {0}")]
    Dataset(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
