use thiserror::Error;

/// Errors raised by the model, sampler and statistics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MallowsError {
    #[error("permutation sizes differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("beta must be strictly positive and finite, got {0}")]
    InvalidBeta(f64),

    #[error("not a permutation: {0}")]
    NotAPermutation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exact enumeration supports n <= {max}, got n = {n}")]
    OracleLimit { n: usize, max: usize },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, MallowsError>;
