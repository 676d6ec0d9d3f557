use thiserror::Error;

/// Errors raised by the time-discretization library.
#[derive(Debug, Error)]
pub enum DgError {
    #[error("{what} = {value} outside supported range {range}")]
    Range {
        what: &'static str,
        value: String,
        range: &'static str,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("operator model rejected: {0}")]
    ModelRejected(String),

    #[error("slab system on slab {slab} is singular")]
    StepFailure { slab: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DgError>;

pub(crate) fn range_error(what: &'static str, value: impl ToString, range: &'static str) -> DgError {
    DgError::Range {
        what,
        value: value.to_string(),
        range,
    }
}
