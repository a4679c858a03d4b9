//! One deduplication level: an interning store plus per-operation memo
//! tables, the subset-relation table, and query counters.

use std::collections::hash_map::Entry;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::MdeError;
use crate::index::{OpKind, SetIndex};
use crate::kernel;
use crate::metrics::{EngineMetrics, Outcome};
use crate::shape::{ChildOps, Flat, Nested, NestedElement, NoChildren, Property, Shape};
use crate::store::SetStore;

/// Operand pair as stored in a memo table.
pub type OperandPair = (SetIndex, SetIndex);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    /// Sets up to this size are searched linearly by `contains`.
    pub contains_linear_threshold: usize,
    /// Consult the subset table before running a kernel. Turning this off
    /// changes only the counters, never a result.
    pub subset_shortcuts: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            contains_linear_threshold: 16,
            subset_shortcuts: true,
        }
    }
}

pub struct Engine<S: Shape> {
    name: String,
    arity: usize,
    config: EngineConfig,
    store: SetStore<S::Elem>,
    memo: [FxHashMap<OperandPair, SetIndex>; 3],
    subset: FxHashMap<OperandPair, bool>,
    metrics: EngineMetrics,
    query_log: Option<FxHashSet<(OpKind, SetIndex, SetIndex)>>,
}

pub type FlatEngine<P> = Engine<Flat<P>>;
pub type NestedEngine<K> = Engine<Nested<K>>;

impl<S: Shape> Engine<S> {
    pub(crate) fn with_arity(name: impl Into<String>, arity: usize) -> Self {
        Engine {
            name: name.into(),
            arity,
            config: EngineConfig::default(),
            store: SetStore::new(),
            memo: Default::default(),
            subset: FxHashMap::default(),
            metrics: EngineMetrics::default(),
            query_log: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Child slots per element; 0 for flat engines.
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut EngineConfig {
        &mut self.config
    }

    pub fn metrics(&self) -> &EngineMetrics {
        &self.metrics
    }

    pub(crate) fn metrics_mut(&mut self) -> &mut EngineMetrics {
        &mut self.metrics
    }

    pub fn store(&self) -> &SetStore<S::Elem> {
        &self.store
    }

    pub(crate) fn store_mut(&mut self) -> &mut SetStore<S::Elem> {
        &mut self.store
    }

    /// Registers a set given in strictly ascending key order.
    pub fn register(&mut self, elems: Vec<S::Elem>) -> Result<(SetIndex, bool), MdeError> {
        let elems = self.canonical(elems)?;
        Ok(self.store.register(elems))
    }

    /// Sorts and deduplicates arbitrary items before registering them.
    pub fn register_from_items(
        &mut self,
        items: impl IntoIterator<Item = S::Elem>,
    ) -> Result<SetIndex, MdeError>
    where
        S::Elem: Ord,
    {
        let mut elems: Vec<_> = items.into_iter().collect();
        elems.sort_unstable();
        elems.dedup();
        Ok(self.register(elems)?.0)
    }

    fn canonical(&self, mut elems: Vec<S::Elem>) -> Result<Vec<S::Elem>, MdeError> {
        for e in &elems {
            S::check_arity(e, self.arity)?;
        }
        if let Some(pos) = elems.windows(2).position(|w| S::key(&w[0]) >= S::key(&w[1])) {
            return Err(MdeError::Unsorted { position: pos + 1 });
        }
        elems.retain(|e| !S::is_vacuous(e));
        Ok(elems)
    }

    pub fn resolve(&self, idx: SetIndex) -> Result<&[S::Elem], MdeError> {
        self.store.get(idx)
    }

    pub fn set_size(&self, idx: SetIndex) -> Result<usize, MdeError> {
        Ok(self.store.get(idx)?.len())
    }

    /// Index of an already registered set, without registering it.
    pub fn lookup(&self, elems: &[S::Elem]) -> Option<SetIndex> {
        self.store.lookup(elems)
    }

    /// Records every distinct operand pair queried from now on.
    pub fn set_query_log(&mut self, enabled: bool) {
        self.query_log = enabled.then(FxHashSet::default);
    }

    /// Distinct operand pairs seen since [`set_query_log`](Self::set_query_log).
    pub fn distinct_queries(&self) -> Option<usize> {
        self.query_log.as_ref().map(|log| log.len())
    }

    pub fn memo(&self, op: OpKind) -> &FxHashMap<OperandPair, SetIndex> {
        &self.memo[op.slot()]
    }

    /// The subset table. `(a, b) -> true` means a ⊆ b, `false` means a ⊇ b;
    /// keys always have `a < b`.
    pub fn subset_relations(&self) -> &FxHashMap<OperandPair, bool> {
        &self.subset
    }

    pub(crate) fn subset_relations_mut(&mut self) -> &mut FxHashMap<OperandPair, bool> {
        &mut self.subset
    }

    /// `Some(true)` if `a ⊆ b` is recorded, `Some(false)` if `a ⊇ b` is.
    pub fn known_subset(&self, a: SetIndex, b: SetIndex) -> Option<bool> {
        if a < b {
            self.subset.get(&(a, b)).copied()
        } else {
            self.subset.get(&(b, a)).map(|rel| !rel)
        }
    }

    /// Records `sub ⊆ sup`.
    fn record_subset(&mut self, sub: SetIndex, sup: SetIndex) {
        if sub == sup || sub.is_empty_set() {
            return;
        }
        if sub < sup {
            self.subset.insert((sub, sup), true);
        } else {
            self.subset.insert((sup, sub), false);
        }
    }

    fn trivial(&self, op: OpKind, p1: SetIndex, p2: SetIndex) -> Option<(SetIndex, Outcome)> {
        let empty = SetIndex::EMPTY;
        match op {
            OpKind::Union => {
                if p1 == p2 {
                    return Some((p1, Outcome::EqualHit));
                }
                let (lo, hi) = (p1.min(p2), p1.max(p2));
                if lo.is_empty_set() {
                    return Some((hi, Outcome::EmptyHit));
                }
                if self.config.subset_shortcuts {
                    if let Some(rel) = self.known_subset(lo, hi) {
                        return Some((if rel { hi } else { lo }, Outcome::SubsetHit));
                    }
                }
            }
            OpKind::Intersection => {
                if p1 == p2 {
                    return Some((p1, Outcome::EqualHit));
                }
                let (lo, hi) = (p1.min(p2), p1.max(p2));
                if lo.is_empty_set() {
                    return Some((empty, Outcome::EmptyHit));
                }
                if self.config.subset_shortcuts {
                    if let Some(rel) = self.known_subset(lo, hi) {
                        return Some((if rel { lo } else { hi }, Outcome::SubsetHit));
                    }
                }
            }
            OpKind::Difference => {
                if p1 == p2 {
                    return Some((empty, Outcome::EqualHit));
                }
                if p1.is_empty_set() {
                    return Some((empty, Outcome::EmptyHit));
                }
                if p2.is_empty_set() {
                    return Some((p1, Outcome::EmptyHit));
                }
                if self.config.subset_shortcuts && self.known_subset(p1, p2) == Some(true) {
                    return Some((empty, Outcome::SubsetHit));
                }
            }
        }
        None
    }

    /// Runs `op` with all shortcut checks, the memo table, and, on a miss,
    /// the merge kernel. Child operations needed by equal keys go through
    /// `children`.
    pub fn operate_with<C: ChildOps + ?Sized>(
        &mut self,
        op: OpKind,
        p1: SetIndex,
        p2: SetIndex,
        children: &mut C,
    ) -> Result<SetIndex, MdeError> {
        self.store.check(p1)?;
        self.store.check(p2)?;
        let key = if op.is_commutative() {
            (p1.min(p2), p1.max(p2))
        } else {
            (p1, p2)
        };
        if let Some(log) = &mut self.query_log {
            log.insert((op, key.0, key.1));
        }
        if let Some((result, outcome)) = self.trivial(op, p1, p2) {
            self.metrics.get_mut(op).record(outcome);
            return Ok(result);
        }
        if let Some(&result) = self.memo[op.slot()].get(&key) {
            self.metrics.get_mut(op).record(Outcome::Hit);
            return Ok(result);
        }

        let mut steps = 0;
        let merged = {
            let a = self.store.get(key.0)?;
            let b = self.store.get(key.1)?;
            kernel::run::<S, C>(op, a, b, children, &mut steps)?
        };
        let (result, fresh) = self.store.register(merged);
        self.memo[op.slot()].insert(key, result);
        match op {
            OpKind::Union => {
                self.record_subset(key.0, result);
                self.record_subset(key.1, result);
            }
            OpKind::Intersection => {
                self.record_subset(result, key.0);
                self.record_subset(result, key.1);
            }
            OpKind::Difference => self.record_subset(result, key.0),
        }
        let counters = self.metrics.get_mut(op);
        counters.merge_executions += 1;
        counters.merge_steps += steps;
        counters.record(if fresh {
            Outcome::ColdMiss
        } else {
            Outcome::EdgeMiss
        });
        Ok(result)
    }

    /// Whether `p1 ⊆ p2`, consulting and then extending the subset table.
    pub fn is_subset_with<C: ChildOps + ?Sized>(
        &mut self,
        p1: SetIndex,
        p2: SetIndex,
        children: &mut C,
    ) -> Result<bool, MdeError> {
        self.store.check(p1)?;
        self.store.check(p2)?;
        if p1 == p2 || p1.is_empty_set() {
            return Ok(true);
        }
        if p2.is_empty_set() {
            return Ok(false);
        }
        if self.config.subset_shortcuts {
            if let Some(rel) = self.known_subset(p1, p2) {
                // distinct indices: a recorded superset is a strict one
                return Ok(rel);
            }
        }
        let mut steps = 0;
        let (fwd, back) = {
            let a = self.store.get(p1)?;
            let b = self.store.get(p2)?;
            kernel::subset_both::<S, C>(a, b, children, &mut steps)?
        };
        if fwd {
            self.record_subset(p1, p2);
        } else if back {
            self.record_subset(p2, p1);
        }
        Ok(fwd)
    }

    /// Purges `victims` from the store and from every table that mentions
    /// them. Callers must ensure nothing else still refers to them.
    pub fn evict(&mut self, victims: &[SetIndex]) -> Result<(), MdeError> {
        for &v in victims {
            if v.is_empty_set() {
                return Err(MdeError::EvictEmpty);
            }
            self.store.check(v)?;
        }
        if victims.is_empty() {
            return Ok(());
        }
        let doomed: FxHashSet<SetIndex> = victims.iter().copied().collect();
        for &v in &doomed {
            self.store.evict(v)?;
        }
        for memo in &mut self.memo {
            memo.retain(|&(a, b), r| !(doomed.contains(&a) || doomed.contains(&b) || doomed.contains(r)));
        }
        self.subset
            .retain(|&(a, b), _| !(doomed.contains(&a) || doomed.contains(&b)));
        if let Some(log) = &mut self.query_log {
            log.retain(|&(_, a, b)| !(doomed.contains(&a) || doomed.contains(&b)));
        }
        Ok(())
    }

    /// Inserts a memo entry during snapshot restore.
    pub(crate) fn restore_memo(&mut self, op: OpKind, key: OperandPair, result: SetIndex) -> bool {
        match self.memo[op.slot()].entry(key) {
            Entry::Occupied(_) => false,
            Entry::Vacant(slot) => {
                slot.insert(result);
                true
            }
        }
    }
}

impl<P: Property> Engine<Flat<P>> {
    pub fn new(name: impl Into<String>) -> Self {
        Engine::with_arity(name, 0)
    }

    pub fn union(&mut self, p1: SetIndex, p2: SetIndex) -> Result<SetIndex, MdeError> {
        self.operate_with(OpKind::Union, p1, p2, &mut NoChildren)
    }

    pub fn intersection(&mut self, p1: SetIndex, p2: SetIndex) -> Result<SetIndex, MdeError> {
        self.operate_with(OpKind::Intersection, p1, p2, &mut NoChildren)
    }

    pub fn difference(&mut self, p1: SetIndex, p2: SetIndex) -> Result<SetIndex, MdeError> {
        self.operate_with(OpKind::Difference, p1, p2, &mut NoChildren)
    }

    pub fn operate(&mut self, op: OpKind, p1: SetIndex, p2: SetIndex) -> Result<SetIndex, MdeError> {
        self.operate_with(op, p1, p2, &mut NoChildren)
    }

    pub fn is_subset(&mut self, p1: SetIndex, p2: SetIndex) -> Result<bool, MdeError> {
        self.is_subset_with(p1, p2, &mut NoChildren)
    }

    /// Membership test: linear scan for small sets, binary search otherwise.
    pub fn contains(&self, idx: SetIndex, prop: &P) -> Result<bool, MdeError> {
        let elems = self.store.get(idx)?;
        Ok(if elems.len() <= self.config.contains_linear_threshold {
            elems.iter().any(|e| e == prop)
        } else {
            elems.binary_search(prop).is_ok()
        })
    }

    pub fn singleton(&mut self, prop: P) -> SetIndex {
        self.store.register(vec![prop]).0
    }

    pub fn insert_single(&mut self, idx: SetIndex, prop: P) -> Result<SetIndex, MdeError> {
        self.store.check(idx)?;
        let single = self.singleton(prop);
        self.union(idx, single)
    }

    pub fn remove_single(&mut self, idx: SetIndex, prop: P) -> Result<SetIndex, MdeError> {
        self.store.check(idx)?;
        let single = self.singleton(prop);
        self.difference(idx, single)
    }
}

/// A flat engine serves as the single child of an arity-1 nested engine.
impl<P: Property> ChildOps for Engine<Flat<P>> {
    fn apply(&mut self, slot: usize, op: OpKind, a: SetIndex, b: SetIndex) -> Result<SetIndex, MdeError> {
        if slot != 0 {
            return Err(MdeError::MissingChild);
        }
        self.operate(op, a, b)
    }

    fn is_subset(&mut self, slot: usize, a: SetIndex, b: SetIndex) -> Result<bool, MdeError> {
        if slot != 0 {
            return Err(MdeError::MissingChild);
        }
        Engine::is_subset(self, a, b)
    }
}

impl<K: Property> Engine<Nested<K>> {
    /// A nested engine whose elements carry `arity` child indices.
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        assert!(arity >= 1, "nested engines need at least one child slot");
        Engine::with_arity(name, arity)
    }

    /// Child values bound to `key`, by binary search.
    pub fn values_of(&self, idx: SetIndex, key: &K) -> Result<Option<&[SetIndex]>, MdeError> {
        let elems = self.store.get(idx)?;
        Ok(elems
            .binary_search_by(|e| e.key.cmp(key))
            .ok()
            .map(|pos| &elems[pos].values[..]))
    }

    /// The set equal to `idx` with `key` rebound to `values`, inserted if
    /// absent. Binding all-empty values removes the key.
    pub fn rebind(&mut self, idx: SetIndex, key: K, values: &[SetIndex]) -> Result<SetIndex, MdeError> {
        if values.len() != self.arity {
            return Err(MdeError::ArityMismatch {
                expected: self.arity,
                found: values.len(),
            });
        }
        let elems = self.store.get(idx)?;
        let pos = elems.binary_search_by(|e| e.key.cmp(&key));
        if let Ok(p) = pos {
            if elems[p].values[..] == *values {
                return Ok(idx);
            }
        }
        let vacuous = values.iter().all(|v| v.is_empty_set());
        let mut next = Vec::with_capacity(elems.len() + 1);
        match pos {
            Ok(p) => {
                next.extend_from_slice(&elems[..p]);
                if !vacuous {
                    next.push(NestedElement::new(key, values.iter().copied()));
                }
                next.extend_from_slice(&elems[p + 1..]);
            }
            Err(p) => {
                if vacuous {
                    return Ok(idx);
                }
                next.extend_from_slice(&elems[..p]);
                next.push(NestedElement::new(key, values.iter().copied()));
                next.extend_from_slice(&elems[p..]);
            }
        }
        Ok(self.store.register(next).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(n: u32) -> SetIndex {
        SetIndex::new(n)
    }

    fn abc_abd() -> (FlatEngine<char>, SetIndex, SetIndex) {
        let mut e = FlatEngine::new("basic");
        let (a, fa) = e.register(vec!['a', 'b', 'c']).unwrap();
        let (b, fb) = e.register(vec!['a', 'b', 'd']).unwrap();
        assert!(fa && fb);
        (e, a, b)
    }

    #[test]
    fn new_engine_holds_only_the_empty_set() {
        let mut e: FlatEngine<char> = FlatEngine::new("e");
        assert_eq!(e.resolve(SetIndex::EMPTY).unwrap(), &[] as &[char]);
        assert_eq!(e.store().slot_count(), 1);
        assert_eq!(e.register(vec![]).unwrap(), (SetIndex::EMPTY, false));
        assert_eq!(e.register(vec!['x']).unwrap(), (idx(1), true));
        assert!(e.subset_relations().is_empty());
        assert_eq!(e.metrics().get(OpKind::Union).total_queries(), 0);
    }

    #[test]
    fn worked_union_records_memo_and_subsets() {
        let (mut e, a, b) = abc_abd();
        assert_eq!((a, b), (idx(1), idx(2)));
        let u = e.union(a, b).unwrap();
        assert_eq!(u, idx(3));
        assert_eq!(e.resolve(u).unwrap(), &['a', 'b', 'c', 'd']);
        assert_eq!(e.set_size(u).unwrap(), 4);
        assert_eq!(e.memo(OpKind::Union).get(&(idx(1), idx(2))), Some(&idx(3)));
        assert_eq!(e.subset_relations().len(), 2);
        assert_eq!(e.subset_relations().get(&(idx(1), idx(3))), Some(&true));
        assert_eq!(e.subset_relations().get(&(idx(2), idx(3))), Some(&true));
        let c = e.metrics().get(OpKind::Union);
        assert_eq!((c.cold_misses, c.merge_executions), (1, 1));
    }

    #[test]
    fn union_trivial_cases() {
        let (mut e, a, _) = abc_abd();
        assert_eq!(e.union(a, SetIndex::EMPTY).unwrap(), a);
        assert_eq!(e.union(SetIndex::EMPTY, a).unwrap(), a);
        assert_eq!(e.union(a, a).unwrap(), a);
        let c = e.metrics().get(OpKind::Union);
        assert_eq!((c.empty_hits, c.equal_hits, c.merge_executions), (2, 1, 0));
    }

    #[test]
    fn commuted_union_is_a_hit() {
        let (mut e, a, b) = abc_abd();
        let u = e.union(a, b).unwrap();
        e.config_mut().subset_shortcuts = false;
        assert_eq!(e.union(b, a).unwrap(), u);
        let c = e.metrics().get(OpKind::Union);
        assert_eq!((c.hits, c.merge_executions), (1, 1));
    }

    #[test]
    fn subset_shortcut_returns_superset() {
        let (mut e, a, b) = abc_abd();
        let u = e.union(a, b).unwrap();
        assert_eq!(e.union(a, u).unwrap(), u);
        assert_eq!(e.intersection(u, b).unwrap(), b);
        assert_eq!(e.difference(a, u).unwrap(), SetIndex::EMPTY);
        assert_eq!(e.metrics().get(OpKind::Union).subset_hits, 1);
        assert_eq!(e.metrics().get(OpKind::Intersection).subset_hits, 1);
        assert_eq!(e.metrics().get(OpKind::Difference).subset_hits, 1);
    }

    #[test]
    fn intersection_and_difference() {
        let (mut e, a, b) = abc_abd();
        let i = e.intersection(a, b).unwrap();
        assert_eq!(e.resolve(i).unwrap(), &['a', 'b']);
        assert_eq!(e.known_subset(i, a), Some(true));
        assert_eq!(e.known_subset(i, b), Some(true));
        assert_eq!(e.intersection(a, SetIndex::EMPTY).unwrap(), SetIndex::EMPTY);
        assert_eq!(e.intersection(a, a).unwrap(), a);

        let u = e.union(a, b).unwrap();
        let d = e.difference(u, a).unwrap();
        assert_eq!(e.resolve(d).unwrap(), &['d']);
        assert_eq!(e.known_subset(d, u), Some(true));
        assert_eq!(e.difference(a, a).unwrap(), SetIndex::EMPTY);
        assert_eq!(e.difference(a, SetIndex::EMPTY).unwrap(), a);
        assert_eq!(e.difference(SetIndex::EMPTY, a).unwrap(), SetIndex::EMPTY);
        // not commutative
        let d2 = e.difference(a, u).unwrap();
        assert_eq!(d2, SetIndex::EMPTY);
    }

    #[test]
    fn edge_miss_when_result_already_interned() {
        let (mut e, a, b) = abc_abd();
        e.register(vec!['a', 'b', 'c', 'd']).unwrap();
        e.union(a, b).unwrap();
        let c = e.metrics().get(OpKind::Union);
        assert_eq!((c.cold_misses, c.edge_misses), (0, 1));
    }

    #[test]
    fn is_subset_records_discoveries() {
        let mut e = FlatEngine::new("e");
        let small = e.register(vec![1, 2]).unwrap().0;
        let big = e.register(vec![1, 2, 3]).unwrap().0;
        let other = e.register(vec![4]).unwrap().0;
        assert!(e.is_subset(SetIndex::EMPTY, small).unwrap());
        assert!(!e.is_subset(big, small).unwrap());
        assert_eq!(e.known_subset(small, big), Some(true));
        assert!(e.is_subset(small, big).unwrap());
        assert!(!e.is_subset(small, other).unwrap());
        assert_eq!(e.known_subset(small, other), None);
        assert!(!e.is_subset(small, SetIndex::EMPTY).unwrap());
    }

    #[test]
    fn contains_switches_search_strategy() {
        let mut e = FlatEngine::new("e");
        let big = e.register_from_items((0..100).rev()).unwrap();
        let small = e.register(vec![3, 5]).unwrap().0;
        for threshold in [0, 16, 1000] {
            e.config_mut().contains_linear_threshold = threshold;
            assert!(e.contains(big, &42).unwrap());
            assert!(!e.contains(big, &420).unwrap());
            assert!(e.contains(small, &5).unwrap());
            assert!(!e.contains(SetIndex::EMPTY, &5).unwrap());
        }
    }

    #[test]
    fn insert_and_remove_single() {
        let (mut e, a, b) = abc_abd();
        let u = e.union(a, b).unwrap();
        assert_eq!(e.insert_single(a, 'd').unwrap(), u);
        assert_eq!(e.insert_single(a, 'a').unwrap(), a);
        let only_a = e.insert_single(SetIndex::EMPTY, 'a').unwrap();
        assert_eq!(e.resolve(only_a).unwrap(), &['a']);
        assert_eq!(e.remove_single(only_a, 'a').unwrap(), SetIndex::EMPTY);
        assert_eq!(e.remove_single(a, 'z').unwrap(), a);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let (mut e, a, _) = abc_abd();
        assert_eq!(e.union(a, idx(99)), Err(MdeError::UnknownIndex(idx(99))));
        assert_eq!(e.resolve(idx(99)), Err(MdeError::UnknownIndex(idx(99))));
        assert_eq!(e.register(vec!['b', 'a']), Err(MdeError::Unsorted { position: 1 }));
        assert_eq!(e.register(vec!['a', 'a']), Err(MdeError::Unsorted { position: 1 }));
        let ab = e.register_from_items(['b', 'a', 'b']).unwrap();
        assert_eq!(e.resolve(ab).unwrap(), &['a', 'b']);
    }

    #[test]
    fn eviction_purges_tables() {
        let (mut e, a, b) = abc_abd();
        let u = e.union(a, b).unwrap();
        assert_eq!(e.evict(&[SetIndex::EMPTY]), Err(MdeError::EvictEmpty));
        e.evict(&[]).unwrap();
        e.evict(&[u]).unwrap();
        assert!(e.memo(OpKind::Union).is_empty());
        assert!(e.subset_relations().is_empty());
        assert_eq!(e.resolve(u), Err(MdeError::EvictedIndex(u)));
        let again = e.union(a, b).unwrap();
        assert_eq!(again, idx(4));
        assert_eq!(e.metrics().get(OpKind::Union).cold_misses, 2);
    }

    #[test]
    fn nested_with_flat_child() {
        let mut child = FlatEngine::new("child");
        let pq = child.register(vec!['p', 'q']).unwrap().0;
        let st = child.register(vec!['s', 't']).unwrap().0;
        let tu = child.register(vec!['t', 'u']).unwrap().0;
        let mut parent: NestedEngine<char> = NestedEngine::new("parent", 1);
        let el = NestedElement::single;
        let j = parent.register(vec![el('a', pq), el('b', st)]).unwrap().0;
        let k = parent.register(vec![el('b', tu), el('c', pq)]).unwrap().0;
        let p = parent.operate_with(OpKind::Union, j, k, &mut child).unwrap();
        assert_eq!(p, idx(3));
        assert_eq!(
            parent.resolve(p).unwrap(),
            &[el('a', pq), el('b', idx(4)), el('c', pq)]
        );
        assert_eq!(child.resolve(idx(4)).unwrap(), &['s', 't', 'u']);
    }

    #[test]
    fn rebind_replaces_inserts_and_removes() {
        let mut parent: NestedEngine<char> = NestedEngine::new("parent", 1);
        let el = NestedElement::single;
        let m = parent.register(vec![el('a', idx(1))]).unwrap().0;
        assert_eq!(parent.rebind(m, 'a', &[idx(1)]).unwrap(), m);
        let m2 = parent.rebind(m, 'b', &[idx(2)]).unwrap();
        assert_eq!(parent.resolve(m2).unwrap(), &[el('a', idx(1)), el('b', idx(2))]);
        let m3 = parent.rebind(m2, 'a', &[SetIndex::EMPTY]).unwrap();
        assert_eq!(parent.resolve(m3).unwrap(), &[el('b', idx(2))]);
        assert_eq!(parent.rebind(SetIndex::EMPTY, 'z', &[SetIndex::EMPTY]).unwrap(), SetIndex::EMPTY);
        assert_eq!(
            parent.rebind(m, 'a', &[idx(1), idx(2)]),
            Err(MdeError::ArityMismatch { expected: 1, found: 2 })
        );
        // vacuous bindings never survive registration
        let v = parent.register(vec![el('q', SetIndex::EMPTY)]).unwrap().0;
        assert_eq!(v, SetIndex::EMPTY);
    }
}
