use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A line of an input file could not be decoded.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The backend could not be reached, after all retries were spent.
    #[error("transport error: {0}")]
    Transport(String),

    /// The backend answered with a non-success status.
    #[error("backend returned HTTP {status}: {body}")]
    Backend { status: u16, body: String },

    #[error("backend returned an empty completion")]
    EmptyOutput,

    /// Model output did not contain a usable JSON value.
    #[error("structured output parse error: {0}")]
    Structured(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("corrupt index file {path} at byte offset {offset}: {message}")]
    CorruptIndex {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("missing artifact {path}; run the `{stage}` stage first")]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("artifact {path} was produced by a different configuration (expected {expected}, found {found}); pass --force to use it anyway")]
    ConfigMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether a retry has a chance of succeeding.
    pub fn is_transient(&self) -> bool {
        match self {
            Error::Transport(_) => true,
            Error::Backend { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            _ => false,
        }
    }

    /// Process exit code: 1 validation, 2 backend/transport, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::InvalidArgument(_)
            | Error::Precondition(_)
            | Error::MissingArtifact { .. }
            | Error::ConfigMismatch { .. }
            | Error::Structured(_) => 1,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 1,
            Error::Transport(_) | Error::Backend { .. } | Error::EmptyOutput => 2,
            Error::Io { .. } | Error::CorruptIndex { .. } | Error::Serde(_) => 3,
        }
    }
}
