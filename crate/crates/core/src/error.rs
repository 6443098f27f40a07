//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: String, column: String },

    #[error("{path}: non-numeric value '{value}' at data row {row}, column '{column}'")]
    NonNumericCell {
        path: String,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: file contains no data rows")]
    EmptyFile { path: String },

    #[error("sample {index} carries no group tag")]
    UngroupedSample { index: usize },

    #[error("dataset contains a single class; both labels are required")]
    SingleClass,

    #[error("validation set has no {0} samples")]
    MissingGroup(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error(
        "training did not converge within {iterations} iterations \
         (final gradient norm {grad_norm:.3e})"
    )]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("hessian factorization failed; matrix is not positive definite")]
    SingularHessian,

    #[error("cannot build {folds} stratified folds: label {label:+.0} has only {count} samples")]
    Stratification { folds: usize, label: f64, count: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
