use std::path::PathBuf;

use thiserror::Error;

use mde::{MdeError, PersistError};
use mde_pta::{ParseError, PtaError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Program { path: String, source: ParseError },
    #[error("state: {0}")]
    State(#[from] PersistError),
    #[error(transparent)]
    Analysis(#[from] PtaError),
    #[error("engine: {0}")]
    Engine(#[from] MdeError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("verification failed")]
    VerifyFailed,
}

impl CliError {
    /// 0 ok, 1 failed verification, 2 bad input, 3 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed => 1,
            CliError::Io { .. } => 3,
            _ => 2,
        }
    }
}
