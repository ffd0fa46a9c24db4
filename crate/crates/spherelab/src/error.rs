use std::path::PathBuf;

/// Errors surfaced by the runner and the command line.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Configuration rejected; the message names the offending field.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    /// Reading or writing a file failed.
    #[error("{path}: {source}")]
    Io {
        /// File involved.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
    /// An experiment directory lacks what analysis needs.
    #[error("missing data: {0}")]
    MissingData(String),
    /// A CSV file could not be parsed.
    #[error("{path}: {message}")]
    Format {
        /// File involved.
        path: PathBuf,
        /// What went wrong.
        message: String,
    },
    /// Numerical failure from the core library.
    #[error(transparent)]
    Core(#[from] spherelab_core::Error),
}

impl LabError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        LabError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Result alias for this crate.
pub type Result<T, E = LabError> = std::result::Result<T, E>;
