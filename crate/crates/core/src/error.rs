use thiserror::Error;

use crate::index::SetIndex;

/// Usage errors reported by engine operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MdeError {
    #[error("set index {0} was never issued by this engine")]
    UnknownIndex(SetIndex),
    #[error("set index {0} has been evicted")]
    EvictedIndex(SetIndex),
    #[error("elements are not strictly ascending at position {position}")]
    Unsorted { position: usize },
    #[error("element has {found} child slots, engine expects {expected}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("the empty set (index 0) cannot be evicted")]
    EvictEmpty,
    #[error("set {victim} is still referenced by set {parent_set} of engine `{parent}`")]
    EvictReferenced {
        victim: SetIndex,
        parent: String,
        parent_set: SetIndex,
    },
    #[error("unknown engine node {0}")]
    UnknownNode(usize),
    #[error("engine `{name}` is {found}, expected {expected}")]
    WrongNodeKind {
        name: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("engine name `{0}` is already in use")]
    DuplicateName(String),
    #[error("nested engine `{0}` needs at least one child")]
    NoChildren(String),
    #[error("operation needs child engines but none are attached")]
    MissingChild,
}
