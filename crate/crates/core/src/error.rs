use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("table {table}: missing id column `{column}`")]
    MissingIdColumn { table: String, column: String },

    #[error("table {table}: duplicate record id `{id}`")]
    DuplicateRecordId { table: String, id: String },

    #[error("alignment names attribute `{attribute}` absent from table {table}")]
    UnknownAttribute { table: String, attribute: String },

    #[error("unknown record id `{id}` in table {table}")]
    UnknownRecord { table: String, id: String },

    #[error("unknown pair id {0}")]
    UnknownPair(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training set needs both classes (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incompatible configuration: {0}")]
    Incompatible(String),

    #[error("label conflict on pair {pair_id}: already answered {existing}, got {submitted}")]
    LabelConflict {
        pair_id: usize,
        existing: u8,
        submitted: u8,
    },

    #[error("session error: {0}")]
    Session(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
