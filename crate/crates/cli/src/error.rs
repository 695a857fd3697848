use std::path::PathBuf;

use thiserror::Error;

/// Failures of the harness, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure in {context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: btlab_core::Error,
    },
    #[error("cannot write report to {path}: {source}")]
    ReportWrite {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed report: {0}")]
    Format(String),
}

impl CliError {
    pub const EXIT_PASS: i32 = 0;
    pub const EXIT_VERDICT: i32 = 1;
    pub const EXIT_USAGE: i32 = 2;
    pub const EXIT_NUMERICAL: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical { .. } => Self::EXIT_NUMERICAL,
            _ => Self::EXIT_USAGE,
        }
    }

    /// Wraps a core error: domain errors become invalid arguments, the rest
    /// numerical failures tagged with `context`.
    pub fn from_core(context: impl Into<String>, err: btlab_core::Error) -> Self {
        match err {
            btlab_core::Error::InvalidArgument(msg) | btlab_core::Error::ContractViolation(msg) => {
                CliError::InvalidArgument(format!("{}: {msg}", context.into()))
            }
            other => CliError::Numerical {
                context: context.into(),
                source: other,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches context to core results.
pub trait Context<T> {
    fn context(self, what: &str) -> CliResult<T>;
}

impl<T> Context<T> for btlab_core::Result<T> {
    fn context(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::from_core(what, e))
    }
}
