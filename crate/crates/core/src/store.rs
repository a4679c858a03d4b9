//! Append-only interning store for immutable sorted sets.
//!
//! Each distinct set content is stored once in its own boxed allocation and
//! identified by the position of that allocation in `slots`. The content table
//! holds only indices; lookups hash the probe slice and confirm candidates by
//! full equality against the stored content, so hash collisions are harmless.

use std::hash::{Hash, Hasher};

use hashbrown::HashTable;
use rustc_hash::FxHasher;

use crate::error::MdeError;
use crate::index::SetIndex;

struct Slot<E> {
    hash: u64,
    elems: Box<[E]>,
}

pub struct SetStore<E> {
    slots: Vec<Option<Slot<E>>>,
    table: HashTable<SetIndex>,
    live: usize,
}

pub(crate) fn content_hash<E: Hash>(elems: &[E]) -> u64 {
    let mut hasher = FxHasher::default();
    elems.len().hash(&mut hasher);
    for e in elems {
        e.hash(&mut hasher);
    }
    hasher.finish()
}

impl<E: Hash + Eq> SetStore<E> {
    /// A store holding only the empty set at index 0.
    pub fn new() -> Self {
        let mut store = SetStore {
            slots: Vec::new(),
            table: HashTable::new(),
            live: 0,
        };
        let (idx, _) = store.register(Vec::new());
        debug_assert_eq!(idx, SetIndex::EMPTY);
        store
    }

    /// Interns `elems`, returning its index and whether it was newly stored.
    /// The caller guarantees the elements are already in canonical order.
    pub fn register(&mut self, elems: Vec<E>) -> (SetIndex, bool) {
        let hash = content_hash(&elems);
        if let Some(idx) = self.find(hash, &elems) {
            return (idx, false);
        }
        (self.push(hash, elems.into_boxed_slice()), true)
    }

    /// Like [`register`](Self::register) but only allocates on a miss.
    pub fn register_slice(&mut self, elems: &[E]) -> (SetIndex, bool)
    where
        E: Clone,
    {
        let hash = content_hash(elems);
        if let Some(idx) = self.find(hash, elems) {
            return (idx, false);
        }
        (self.push(hash, elems.to_vec().into_boxed_slice()), true)
    }

    pub fn lookup(&self, elems: &[E]) -> Option<SetIndex> {
        self.find(content_hash(elems), elems)
    }

    fn find(&self, hash: u64, elems: &[E]) -> Option<SetIndex> {
        let slots = &self.slots;
        self.table
            .find(hash, |&idx| match &slots[idx.as_usize()] {
                Some(slot) => slot.hash == hash && &*slot.elems == elems,
                None => false,
            })
            .copied()
    }

    fn push(&mut self, hash: u64, elems: Box<[E]>) -> SetIndex {
        let idx = SetIndex::from_slot(self.slots.len());
        self.slots.push(Some(Slot { hash, elems }));
        let slots = &self.slots;
        self.table.insert_unique(hash, idx, |&i| {
            slots[i.as_usize()]
                .as_ref()
                .map(|s| s.hash)
                .expect("content table references a tombstone")
        });
        self.live += 1;
        idx
    }

    pub fn get(&self, idx: SetIndex) -> Result<&[E], MdeError> {
        match self.slots.get(idx.as_usize()) {
            Some(Some(slot)) => Ok(&slot.elems),
            Some(None) => Err(MdeError::EvictedIndex(idx)),
            None => Err(MdeError::UnknownIndex(idx)),
        }
    }

    pub fn check(&self, idx: SetIndex) -> Result<(), MdeError> {
        self.get(idx).map(|_| ())
    }

    pub fn is_live(&self, idx: SetIndex) -> bool {
        matches!(self.slots.get(idx.as_usize()), Some(Some(_)))
    }

    /// Tombstones a slot. The index is never issued again.
    pub fn evict(&mut self, idx: SetIndex) -> Result<(), MdeError> {
        let slot = match self.slots.get_mut(idx.as_usize()) {
            Some(slot @ Some(_)) => slot.take().expect("checked above"),
            Some(None) => return Err(MdeError::EvictedIndex(idx)),
            None => return Err(MdeError::UnknownIndex(idx)),
        };
        if let Ok(entry) = self.table.find_entry(slot.hash, |&i| i == idx) {
            entry.remove();
        }
        self.live -= 1;
        Ok(())
    }

    /// Appends a tombstone; used when restoring a snapshot.
    pub(crate) fn push_tombstone(&mut self) {
        self.slots.push(None);
    }

    /// Number of slots ever issued, tombstones included. The next fresh index.
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Number of resolvable sets.
    pub fn live_count(&self) -> usize {
        self.live
    }

    /// Live sets in index order.
    pub fn iter(&self) -> impl Iterator<Item = (SetIndex, &[E])> + '_ {
        self.slots.iter().enumerate().filter_map(|(i, slot)| {
            slot.as_ref()
                .map(|s| (SetIndex::from_slot(i), &*s.elems))
        })
    }

    /// All slots in index order, `None` for tombstones.
    pub fn slots(&self) -> impl Iterator<Item = Option<&[E]>> + '_ {
        self.slots.iter().map(|s| s.as_ref().map(|s| &*s.elems))
    }
}

impl<E: Hash + Eq> Default for SetStore<E> {
    fn default() -> Self {
        Self::new()
    }
}
