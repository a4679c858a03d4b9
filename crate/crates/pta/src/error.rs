use thiserror::Error;

use mde::MdeError;

use crate::program::ParseError;

#[derive(Debug, Error)]
pub enum PtaError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("engine: {0}")]
    Engine(#[from] MdeError),
    #[error("stored state lacks a {kind} node named `{name}`")]
    MissingNode { name: &'static str, kind: &'static str },
    #[error("facts at block `{block}` shrank between iterations")]
    NotMonotone { block: String },
}
