use thiserror::Error;

use crate::transport::PartyId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("element is not a unit of the Galois ring")]
    NonUnit,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("replicated share consistency check failed")]
    InconsistentShare,
    #[error("bounds violation: {0}")]
    BoundsViolation(String),
    #[error("configuration mismatch with party {peer}")]
    ConfigMismatch { peer: PartyId },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("refusing to open a non-aggregate value in production mode")]
    Leakage,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
