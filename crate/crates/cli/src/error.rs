use std::path::PathBuf;

/// Errors surfaced by the command line tool, each tied to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] mblbfgs_core::Error),
}

impl CliError {
    /// 1 for usage and configuration mistakes, 2 for bad input data,
    /// 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        use mblbfgs_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Write { .. } => 1,
            CliError::Data(_) => 2,
            CliError::Core(E::Usage(_) | E::Config(_)) => 1,
            CliError::Core(E::Data(_)) => 2,
            CliError::Core(E::Numeric(_)) => 3,
        }
    }

    pub(crate) fn write(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Write { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
