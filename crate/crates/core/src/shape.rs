//! Element shapes an engine can store.
//!
//! A flat engine stores plain properties. A nested engine stores
//! [`NestedElement`]s, a key paired with one index per attached child engine;
//! sets of such elements are maps, ordered and compared by key.

use std::fmt::Debug;
use std::hash::Hash;
use std::marker::PhantomData;

use smallvec::SmallVec;

use crate::error::MdeError;
use crate::index::{OpKind, SetIndex};

/// A client value that can be interned. Any totally ordered, hashable value
/// qualifies.
pub trait Property: Ord + Hash + Clone + Debug {}

impl<T: Ord + Hash + Clone + Debug> Property for T {}

/// Access to the child engines of a nested engine, by slot.
pub trait ChildOps {
    fn apply(&mut self, slot: usize, op: OpKind, a: SetIndex, b: SetIndex)
        -> Result<SetIndex, MdeError>;

    fn is_subset(&mut self, slot: usize, a: SetIndex, b: SetIndex) -> Result<bool, MdeError>;
}

/// Child context for engines without children.
pub struct NoChildren;

impl ChildOps for NoChildren {
    fn apply(&mut self, _: usize, _: OpKind, _: SetIndex, _: SetIndex) -> Result<SetIndex, MdeError> {
        Err(MdeError::MissingChild)
    }

    fn is_subset(&mut self, _: usize, _: SetIndex, _: SetIndex) -> Result<bool, MdeError> {
        Err(MdeError::MissingChild)
    }
}

pub trait Shape {
    type Elem: Clone + Eq + Hash + Debug;
    type Key: Ord + Debug;

    fn key(elem: &Self::Elem) -> &Self::Key;

    /// Merges two elements carrying the same key. `None` drops the key from
    /// the result.
    fn combine<C: ChildOps + ?Sized>(
        op: OpKind,
        lhs: &Self::Elem,
        rhs: &Self::Elem,
        children: &mut C,
    ) -> Result<Option<Self::Elem>, MdeError>;

    /// Whether `lhs` is covered by `rhs` (same key).
    fn covered<C: ChildOps + ?Sized>(
        lhs: &Self::Elem,
        rhs: &Self::Elem,
        children: &mut C,
    ) -> Result<bool, MdeError>;

    /// Elements that denote nothing; never stored.
    fn is_vacuous(elem: &Self::Elem) -> bool;

    /// Number of child slots each element must carry, if fixed by the shape.
    fn check_arity(elem: &Self::Elem, arity: usize) -> Result<(), MdeError>;
}

/// Shape of an engine over plain properties.
pub struct Flat<P>(PhantomData<P>);

impl<P: Property> Shape for Flat<P> {
    type Elem = P;
    type Key = P;

    #[inline]
    fn key(elem: &P) -> &P {
        elem
    }

    fn combine<C: ChildOps + ?Sized>(
        op: OpKind,
        lhs: &P,
        _rhs: &P,
        _children: &mut C,
    ) -> Result<Option<P>, MdeError> {
        Ok(match op {
            OpKind::Union | OpKind::Intersection => Some(lhs.clone()),
            OpKind::Difference => None,
        })
    }

    fn covered<C: ChildOps + ?Sized>(_: &P, _: &P, _: &mut C) -> Result<bool, MdeError> {
        Ok(true)
    }

    fn is_vacuous(_: &P) -> bool {
        false
    }

    fn check_arity(_: &P, _: usize) -> Result<(), MdeError> {
        Ok(())
    }
}

/// Child indices of one nested element. Inline for arity up to two.
pub type ChildValues = SmallVec<[SetIndex; 2]>;

/// A key bound to one child set per child engine.
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct NestedElement<K> {
    pub key: K,
    pub values: ChildValues,
}

impl<K> NestedElement<K> {
    pub fn new(key: K, values: impl IntoIterator<Item = SetIndex>) -> Self {
        NestedElement {
            key,
            values: values.into_iter().collect(),
        }
    }

    /// An arity-1 element.
    pub fn single(key: K, value: SetIndex) -> Self {
        NestedElement {
            key,
            values: smallvec::smallvec![value],
        }
    }

    pub fn value(&self) -> SetIndex {
        self.values[0]
    }
}

/// Shape of an engine whose sets are maps from keys to child sets.
pub struct Nested<K>(PhantomData<K>);

impl<K: Property> Shape for Nested<K> {
    type Elem = NestedElement<K>;
    type Key = K;

    #[inline]
    fn key(elem: &NestedElement<K>) -> &K {
        &elem.key
    }

    fn combine<C: ChildOps + ?Sized>(
        op: OpKind,
        lhs: &NestedElement<K>,
        rhs: &NestedElement<K>,
        children: &mut C,
    ) -> Result<Option<NestedElement<K>>, MdeError> {
        if lhs.values.len() != rhs.values.len() {
            return Err(MdeError::ArityMismatch {
                expected: lhs.values.len(),
                found: rhs.values.len(),
            });
        }
        let mut values = ChildValues::with_capacity(lhs.values.len());
        for (slot, (&a, &b)) in lhs.values.iter().zip(&rhs.values).enumerate() {
            values.push(children.apply(slot, op, a, b)?);
        }
        let elem = NestedElement {
            key: lhs.key.clone(),
            values,
        };
        Ok((!Self::is_vacuous(&elem)).then_some(elem))
    }

    fn covered<C: ChildOps + ?Sized>(
        lhs: &NestedElement<K>,
        rhs: &NestedElement<K>,
        children: &mut C,
    ) -> Result<bool, MdeError> {
        for (slot, (&a, &b)) in lhs.values.iter().zip(&rhs.values).enumerate() {
            if !children.is_subset(slot, a, b)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn is_vacuous(elem: &NestedElement<K>) -> bool {
        elem.values.iter().all(|v| v.is_empty_set())
    }

    fn check_arity(elem: &NestedElement<K>, arity: usize) -> Result<(), MdeError> {
        if elem.values.len() == arity {
            Ok(())
        } else {
            Err(MdeError::ArityMismatch {
                expected: arity,
                found: elem.values.len(),
            })
        }
    }
}
