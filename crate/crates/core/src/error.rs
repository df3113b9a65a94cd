use thiserror::Error;

#[derive(Debug, Error)]
pub enum SloshError {
    #[error("argument {value} outside the admissible interval {interval}")]
    Domain { value: f64, interval: &'static str },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error(
        "step failed at t = {t}: fixed-point residual {residual:e} after {iterations} iterations"
    )]
    StepFailure {
        t: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SloshError>;

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(SloshError::NonFinite { index }),
        None => Ok(()),
    }
}
