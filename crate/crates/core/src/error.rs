use thiserror::Error;

/// Errors raised by the solvers and their supporting types.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite entry {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("empty dimension: {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },

    #[error("expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("marginal {which}[{index}] = {value} must be positive")]
    NonPositiveMarginal {
        which: &'static str,
        index: usize,
        value: f64,
    },

    #[error("marginal sums differ: sum(a) = {row_sum}, sum(b) = {col_sum}")]
    UnbalancedMarginals { row_sum: f64, col_sum: f64 },

    #[error("divergence domain violation: {0}")]
    Domain(String),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{0} has no mass to normalize")]
    ZeroMass(String),

    #[error("assignment oracle limited to n <= {max}, got n = {n}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("empty iterate sequence")]
    EmptySequence,

    #[error("{0}")]
    Format(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}
