use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("row {row}, column `{column}`: {reason}")]
    BadCell { row: usize, column: String, reason: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("row count mismatch: original has {original}, synthetic has {synthetic}")]
    RowCountMismatch { original: usize, synthetic: usize },

    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("no synthetic datasets supplied")]
    NoSyntheticData,

    #[error("non-finite value in design matrix at row {row}, column {col}")]
    NonFiniteDesign { row: usize, col: usize },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
