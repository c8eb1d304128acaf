use thiserror::Error;

/// Errors raised while validating data or computing fairness measures.
#[derive(Debug, Error)]
pub enum AuditError {
    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("sensitive attribute has {0} distinct value(s); at least 2 are required")]
    TooFewClasses(usize),
    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: &'static str, row: usize },
    #[error("class {class} has {count} instance(s), fewer than the {folds} folds requested")]
    ClassTooSmall {
        class: String,
        count: usize,
        folds: usize,
    },
    #[error("dimension mismatch: expected {expected} input column(s), found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ratio measures require a binary sensitive attribute, found {0} classes")]
    UnsupportedClassCount(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid probability matrix: {0}")]
    InvalidProbabilities(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AuditError {
    /// True for failures inside the numerical routines rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, AuditError::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, AuditError>;
