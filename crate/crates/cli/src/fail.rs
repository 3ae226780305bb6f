use std::fmt;
use std::process::ExitCode;

use irisdedup_core::Error;
use serde::{Deserialize, Serialize};

pub type CliResult<T> = Result<T, CliError>;

/// Failure classes, each with its own exit code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CliError {
    Config(String),
    Transport(String),
    Bounds(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Transport(_) => 3,
            CliError::Bounds(_) => 4,
            CliError::Other(_) => 1,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Transport(m) => write!(f, "transport error: {m}"),
            CliError::Bounds(m) => write!(f, "bounds violation: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::ConfigMismatch { .. } | Error::InvalidInput(_) | Error::Format(_) | Error::Io(_) => {
                CliError::Config(m)
            }
            Error::Transport(_) => CliError::Transport(m),
            Error::BoundsViolation(_) => CliError::Bounds(m),
            Error::NonUnit | Error::InconsistentShare | Error::Leakage => CliError::Other(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Transport(e.to_string())
    }
}
