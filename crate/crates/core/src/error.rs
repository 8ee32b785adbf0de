use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed matrix file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("numerical failure at iteration {iteration}: {reason}")]
    Numerical { iteration: usize, reason: String },

    #[error("no convergence after {iterations} iterations (KKT violation {kkt_violation:e})")]
    Convergence { iterations: usize, kkt_violation: f64 },

    #[error("column {index}: {source}")]
    Column {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown modality `{0}`")]
    UnknownModality(String),

    #[error("undefined metric: {0}")]
    Undefined(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("metadata {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 configuration, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Argument(_) | Error::Config(_) | Error::UnknownModality(_) => 2,
            Error::Shape(_) | Error::Format { .. } | Error::Io { .. } | Error::Json { .. } => 3,
            Error::Numerical { .. } | Error::Convergence { .. } | Error::Undefined(_) => 4,
            Error::Column { .. } => unreachable!("root() unwraps columns"),
        }
    }

    /// The innermost error, looking through per-column wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Column { source, .. } => source.root(),
            other => other,
        }
    }
}
