use thiserror::Error;

/// Errors produced by model construction, training, reduction, solving and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature vector entry at index {index} is {value}, expected 0 or 1")]
    NonBinaryEntry { index: usize, value: f64 },

    #[error("spin vector entry at index {index} is {value}, expected -1 or +1")]
    NonSpinEntry { index: usize, value: i8 },

    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("empty {what}")]
    Empty { what: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite parameter encountered during epoch {epoch}")]
    NonFiniteTraining { epoch: usize },

    #[error("exhaustive enumeration supports at most {max} variables, got {got}")]
    ProblemTooLarge { got: usize, max: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unsupported model format version {got} (expected {expected})")]
    FormatVersion { got: u32, expected: u32 },

    #[error("unknown {what} id {id}")]
    UnknownId { what: &'static str, id: u64 },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
