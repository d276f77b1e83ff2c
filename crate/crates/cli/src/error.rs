use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Input {
        path: PathBuf,
        source: fairclust_core::Error,
    },

    #[error(transparent)]
    Core(#[from] fairclust_core::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for usage and validation problems, 3 for numerical aborts, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        use fairclust_core::Error as E;
        match self {
            CliError::Io { .. } => 4,
            CliError::Core(E::Io(_)) | CliError::Input { source: E::Io(_), .. } => 4,
            CliError::Core(E::NonFinite(_)) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
