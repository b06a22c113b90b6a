use std::path::PathBuf;

/// Errors produced by the vprkit library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file did not conform to its declared format. `offset` points at the
    /// first byte that could not be interpreted.
    #[error("format error at byte {offset}: {detail}")]
    Format { offset: usize, detail: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dim { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("index ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("unknown group label '{0}'")]
    UnknownLabel(String),

    #[error("group '{label}' has {size} rows; standardization needs at least 2")]
    GroupTooSmall { label: String, size: usize },

    #[error("similarity values have no separation (fewer than two distinct values)")]
    NoSeparation,

    #[error("no ground-truth positives")]
    NoGroundTruthPositives,

    #[error("query column {col} has no ground-truth match")]
    UnmatchedQuery { col: usize },

    #[error("empty local feature set")]
    EmptyFeatureSet,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(offset: usize, detail: impl Into<String>) -> Self {
        Error::Format {
            offset,
            detail: detail.into(),
        }
    }
}
