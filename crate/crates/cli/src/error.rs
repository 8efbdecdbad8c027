use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] pporpe::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {reason}", path.display())]
    Weights { path: PathBuf, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad invocations or configurations, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use pporpe::Error as E;
        match self {
            Self::Usage(_) => 2,
            Self::Core(E::Config(_) | E::UnknownMethod(_) | E::UnknownEnv(_)) => 2,
            _ => 1,
        }
    }
}
