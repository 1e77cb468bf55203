use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient sample: class {class} has {count} observation(s), need at least {required}")]
    InsufficientSample {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("anchor pool is empty")]
    EmptyPool,

    #[error("training set is empty")]
    EmptyTraining,

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown classifier `{0}`")]
    UnknownClassifier(String),

    #[error("density evaluated to NaN")]
    NanDensity,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error("malformed document: {0}")]
    Format(String),

    #[error("unsupported format_version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupted model: {0}")]
    Corrupted(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
