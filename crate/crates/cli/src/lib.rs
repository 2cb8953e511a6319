//! Pipeline commands behind the `spillfree` binary.

pub mod commands;
pub mod io;

use spillfree_core::Error;
use thiserror::Error as ThisError;

/// Command failure, mapped onto the process exit code.
#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("limit violation: {0}")]
    Strict(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => 2,
            CliError::Io(_) | CliError::Parse(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Strict(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::InvalidParameter(_)
            | Error::Dimension(_)
            | Error::InconsistentBounds { .. } => CliError::Parse(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
