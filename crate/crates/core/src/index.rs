use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense handle of a registered set. Index 0 is always the empty set.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SetIndex(u32);

impl SetIndex {
    pub const EMPTY: SetIndex = SetIndex(0);

    pub const fn new(raw: u32) -> Self {
        SetIndex(raw)
    }

    pub const fn get(self) -> u32 {
        self.0
    }

    pub const fn as_usize(self) -> usize {
        self.0 as usize
    }

    pub const fn is_empty_set(self) -> bool {
        self.0 == 0
    }

    pub(crate) fn from_slot(slot: usize) -> Self {
        let raw = u32::try_from(slot).expect("set index space exhausted");
        SetIndex(raw)
    }
}

impl fmt::Debug for SetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for SetIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl From<SetIndex> for u32 {
    fn from(idx: SetIndex) -> u32 {
        idx.0
    }
}

/// Equality of two indices from the same engine is equality of the sets.
#[inline]
pub fn indices_equal(a: SetIndex, b: SetIndex) -> bool {
    a == b
}

/// Binary set operations with a memo table.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Union,
    Intersection,
    Difference,
}

impl OpKind {
    pub const ALL: [OpKind; 3] = [OpKind::Union, OpKind::Intersection, OpKind::Difference];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Union => "union",
            OpKind::Intersection => "intersection",
            OpKind::Difference => "difference",
        }
    }

    pub fn is_commutative(self) -> bool {
        !matches!(self, OpKind::Difference)
    }

    pub(crate) fn slot(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<OpKind> {
        OpKind::ALL.into_iter().find(|op| op.name() == name)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
