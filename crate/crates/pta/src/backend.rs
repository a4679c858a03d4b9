//! Fact representations the analyses run on.
//!
//! `Naive` keeps plain ordered maps and sets and counts every element it
//! touches. `SingleLevel` interns pointee sets in one flat engine and keeps
//! a plain map per point. `MultiLevel` interns whole points-to maps in a
//! nested engine over the same pointee engine, so a map is one index.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use mde::{Dag, EngineMetrics, MdeError, MetricsReport, NodeId, SetIndex};

use crate::error::PtaError;
use crate::program::Var;

/// Points-to facts in plain form: pointer to non-empty pointee set.
pub type PointsTo = BTreeMap<Var, BTreeSet<Var>>;

pub const POINTEES: &str = "pointees";
pub const POINTS_TO: &str = "points_to";

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BackendKind {
    Naive,
    SingleLevel,
    MultiLevel,
}

impl BackendKind {
    pub const ALL: [BackendKind; 3] = [BackendKind::Naive, BackendKind::SingleLevel, BackendKind::MultiLevel];

    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Naive => "naive",
            BackendKind::SingleLevel => "single-level",
            BackendKind::MultiLevel => "multi-level",
        }
    }

    pub fn from_name(name: &str) -> Option<BackendKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Work counters common to all backends.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkStats {
    /// Set or map merges actually executed.
    pub merge_executions: u64,
    /// Elements visited by merges, copies and comparisons.
    pub element_steps: u64,
}

pub trait Backend {
    type Set: Clone + Eq + Debug;
    type Map: Clone + Eq + Debug;

    fn kind(&self) -> BackendKind;

    fn empty_set(&mut self) -> Self::Set;
    /// Set of the given variables; input need not be sorted.
    fn set_of(&mut self, vars: &[Var]) -> Result<Self::Set, MdeError>;
    fn set_union(&mut self, a: &Self::Set, b: &Self::Set) -> Result<Self::Set, MdeError>;
    fn set_difference(&mut self, a: &Self::Set, b: &Self::Set) -> Result<Self::Set, MdeError>;
    fn set_members(&self, s: &Self::Set) -> Result<Vec<Var>, MdeError>;
    fn set_eq(&mut self, a: &Self::Set, b: &Self::Set) -> bool;

    fn empty_map(&mut self) -> Self::Map;
    fn map_join(&mut self, a: &Self::Map, b: &Self::Map) -> Result<Self::Map, MdeError>;
    /// Pointees of `var`, empty if unbound.
    fn pointees(&mut self, m: &Self::Map, var: Var) -> Result<Self::Set, MdeError>;
    /// Strong update of `var`. Binding the empty set unbinds it.
    fn bind(&mut self, m: &Self::Map, var: Var, s: &Self::Set) -> Result<Self::Map, MdeError>;
    fn map_eq(&mut self, a: &Self::Map, b: &Self::Map) -> bool;
    /// `a` is pointwise contained in `b`. Not counted as work.
    fn map_leq(&mut self, a: &Self::Map, b: &Self::Map) -> Result<bool, MdeError>;
    fn flatten(&self, m: &Self::Map) -> Result<PointsTo, MdeError>;

    fn work(&self) -> WorkStats;
    /// Engine counters, if the backend has engines.
    fn metrics(&self) -> Option<MetricsReport>;
}

#[derive(Debug, Default)]
pub struct Naive {
    work: WorkStats,
}

impl Naive {
    pub fn new() -> Self {
        Self::default()
    }

    fn merged(&mut self, a: &BTreeSet<Var>, b: &BTreeSet<Var>, keep: impl Fn(bool, bool) -> bool) -> BTreeSet<Var> {
        self.work.merge_executions += 1;
        self.work.element_steps += (a.len() + b.len()) as u64;
        a.union(b).filter(|v| keep(a.contains(v), b.contains(v))).copied().collect()
    }

    fn map_size(m: &PointsTo) -> u64 {
        m.values().map(|s| 1 + s.len() as u64).sum()
    }
}

impl Backend for Naive {
    type Set = BTreeSet<Var>;
    type Map = PointsTo;

    fn kind(&self) -> BackendKind {
        BackendKind::Naive
    }

    fn empty_set(&mut self) -> Self::Set {
        BTreeSet::new()
    }

    fn set_of(&mut self, vars: &[Var]) -> Result<Self::Set, MdeError> {
        self.work.element_steps += vars.len() as u64;
        Ok(vars.iter().copied().collect())
    }

    fn set_union(&mut self, a: &Self::Set, b: &Self::Set) -> Result<Self::Set, MdeError> {
        Ok(self.merged(a, b, |_, _| true))
    }

    fn set_difference(&mut self, a: &Self::Set, b: &Self::Set) -> Result<Self::Set, MdeError> {
        Ok(self.merged(a, b, |in_a, in_b| in_a && !in_b))
    }

    fn set_members(&self, s: &Self::Set) -> Result<Vec<Var>, MdeError> {
        Ok(s.iter().copied().collect())
    }

    fn set_eq(&mut self, a: &Self::Set, b: &Self::Set) -> bool {
        self.work.element_steps += if a.len() == b.len() { a.len() as u64 } else { 1 };
        a == b
    }

    fn empty_map(&mut self) -> Self::Map {
        BTreeMap::new()
    }

    fn map_join(&mut self, a: &Self::Map, b: &Self::Map) -> Result<Self::Map, MdeError> {
        self.work.merge_executions += 1;
        let mut out = PointsTo::new();
        for (k, sa) in a {
            self.work.element_steps += 1;
            match b.get(k) {
                Some(sb) => {
                    let u = self.merged(sa, sb, |_, _| true);
                    out.insert(*k, u);
                }
                None => {
                    self.work.element_steps += sa.len() as u64;
                    out.insert(*k, sa.clone());
                }
            }
        }
        for (k, sb) in b {
            self.work.element_steps += 1;
            if !a.contains_key(k) {
                self.work.element_steps += sb.len() as u64;
                out.insert(*k, sb.clone());
            }
        }
        Ok(out)
    }

    fn pointees(&mut self, m: &Self::Map, var: Var) -> Result<Self::Set, MdeError> {
        let s = m.get(&var).cloned().unwrap_or_default();
        self.work.element_steps += s.len() as u64;
        Ok(s)
    }

    fn bind(&mut self, m: &Self::Map, var: Var, s: &Self::Set) -> Result<Self::Map, MdeError> {
        self.work.element_steps += Self::map_size(m) + s.len() as u64;
        let mut out = m.clone();
        if s.is_empty() {
            out.remove(&var);
        } else {
            out.insert(var, s.clone());
        }
        Ok(out)
    }

    fn map_eq(&mut self, a: &Self::Map, b: &Self::Map) -> bool {
        self.work.element_steps += if a.len() == b.len() { Self::map_size(a) } else { 1 };
        a == b
    }

    fn map_leq(&mut self, a: &Self::Map, b: &Self::Map) -> Result<bool, MdeError> {
        Ok(a.iter().all(|(k, sa)| b.get(k).is_some_and(|sb| sa.is_subset(sb))))
    }

    fn flatten(&self, m: &Self::Map) -> Result<PointsTo, MdeError> {
        Ok(m.clone())
    }

    fn work(&self) -> WorkStats {
        self.work.clone()
    }

    fn metrics(&self) -> Option<MetricsReport> {
        None
    }
}

/// Kernel work of every node since `baseline`.
fn work_since(dag: &Dag<Var>, baseline: &BTreeMap<String, EngineMetrics>) -> WorkStats {
    let mut work = WorkStats::default();
    for (_, node) in dag.nodes() {
        let m = match baseline.get(node.name()) {
            Some(before) => node.metrics().since(before),
            None => node.metrics().clone(),
        };
        work.merge_executions += m.merge_executions();
        work.element_steps += m.merge_steps();
    }
    work
}

fn flat_node(dag: &Dag<Var>) -> Result<NodeId, PtaError> {
    dag.find(POINTEES)
        .filter(|&id| dag.flat(id).is_ok())
        .ok_or(PtaError::MissingNode {
            name: POINTEES,
            kind: "flat",
        })
}

/// Pointee sets interned; one plain map of indices per point.
pub struct SingleLevel {
    dag: Dag<Var>,
    sets: NodeId,
    map_steps: u64,
    baseline: BTreeMap<String, EngineMetrics>,
}

impl SingleLevel {
    pub fn new() -> Self {
        let mut dag = Dag::new();
        dag.add_flat(POINTEES).expect("fresh dag");
        Self::with_dag(dag).expect("wired above")
    }

    /// Continues from existing state; `dag` must hold a flat node named
    /// `pointees`.
    pub fn with_dag(dag: Dag<Var>) -> Result<Self, PtaError> {
        let sets = flat_node(&dag)?;
        Ok(SingleLevel {
            baseline: dag.metrics_by_node(),
            dag,
            sets,
            map_steps: 0,
        })
    }

    pub fn dag(&self) -> &Dag<Var> {
        &self.dag
    }

    pub fn dag_mut(&mut self) -> &mut Dag<Var> {
        &mut self.dag
    }

    pub fn into_dag(self) -> Dag<Var> {
        self.dag
    }
}

impl Default for SingleLevel {
    fn default() -> Self {
        Self::new()
    }
}

impl Backend for SingleLevel {
    type Set = SetIndex;
    type Map = BTreeMap<Var, SetIndex>;

    fn kind(&self) -> BackendKind {
        BackendKind::SingleLevel
    }

    fn empty_set(&mut self) -> SetIndex {
        SetIndex::EMPTY
    }

    fn set_of(&mut self, vars: &[Var]) -> Result<SetIndex, MdeError> {
        self.dag.flat_mut(self.sets)?.register_from_items(vars.to_vec())
    }

    fn set_union(&mut self, a: &SetIndex, b: &SetIndex) -> Result<SetIndex, MdeError> {
        self.dag.union(self.sets, *a, *b)
    }

    fn set_difference(&mut self, a: &SetIndex, b: &SetIndex) -> Result<SetIndex, MdeError> {
        self.dag.difference(self.sets, *a, *b)
    }

    fn set_members(&self, s: &SetIndex) -> Result<Vec<Var>, MdeError> {
        Ok(self.dag.flat(self.sets)?.resolve(*s)?.to_vec())
    }

    fn set_eq(&mut self, a: &SetIndex, b: &SetIndex) -> bool {
        a == b
    }

    fn empty_map(&mut self) -> Self::Map {
        BTreeMap::new()
    }

    fn map_join(&mut self, a: &Self::Map, b: &Self::Map) -> Result<Self::Map, MdeError> {
        self.map_steps += (a.len() + b.len()) as u64;
        let mut out = a.clone();
        for (k, sb) in b {
            let joined = match a.get(k) {
                Some(sa) => self.dag.union(self.sets, *sa, *sb)?,
                None => *sb,
            };
            out.insert(*k, joined);
        }
        Ok(out)
    }

    fn pointees(&mut self, m: &Self::Map, var: Var) -> Result<SetIndex, MdeError> {
        Ok(m.get(&var).copied().unwrap_or(SetIndex::EMPTY))
    }

    fn bind(&mut self, m: &Self::Map, var: Var, s: &SetIndex) -> Result<Self::Map, MdeError> {
        self.map_steps += m.len() as u64;
        let mut out = m.clone();
        if s.is_empty_set() {
            out.remove(&var);
        } else {
            out.insert(var, *s);
        }
        Ok(out)
    }

    fn map_eq(&mut self, a: &Self::Map, b: &Self::Map) -> bool {
        self.map_steps += if a.len() == b.len() { a.len() as u64 } else { 1 };
        a == b
    }

    fn map_leq(&mut self, a: &Self::Map, b: &Self::Map) -> Result<bool, MdeError> {
        for (k, sa) in a {
            let sb = b.get(k).copied().unwrap_or(SetIndex::EMPTY);
            if !self.dag.is_subset(self.sets, *sa, sb)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn flatten(&self, m: &Self::Map) -> Result<PointsTo, MdeError> {
        let engine = self.dag.flat(self.sets)?;
        m.iter()
            .map(|(k, s)| Ok((*k, engine.resolve(*s)?.iter().copied().collect())))
            .collect()
    }

    fn work(&self) -> WorkStats {
        let mut work = work_since(&self.dag, &self.baseline);
        work.element_steps += self.map_steps;
        work
    }

    fn metrics(&self) -> Option<MetricsReport> {
        Some(self.dag.metrics_report_since(&self.baseline))
    }
}

/// Whole maps interned in a nested engine whose child holds pointee sets.
pub struct MultiLevel {
    dag: Dag<Var>,
    sets: NodeId,
    maps: NodeId,
    rebuild_steps: u64,
    baseline: BTreeMap<String, EngineMetrics>,
}

impl MultiLevel {
    pub fn new() -> Self {
        let mut dag = Dag::new();
        let sets = dag.add_flat(POINTEES).expect("fresh dag");
        dag.add_nested(POINTS_TO, &[sets]).expect("fresh dag");
        Self::with_dag(dag).expect("wired above")
    }

    /// Continues from existing state; `dag` must hold a flat node named
    /// `pointees` and a nested node named `points_to` over it.
    pub fn with_dag(dag: Dag<Var>) -> Result<Self, PtaError> {
        let sets = flat_node(&dag)?;
        let maps = dag
            .find(POINTS_TO)
            .filter(|&m| dag.nested(m).is_ok() && dag.children(m).ok() == Some(&[sets][..]))
            .ok_or(PtaError::MissingNode {
                name: POINTS_TO,
                kind: "nested",
            })?;
        Ok(MultiLevel {
            baseline: dag.metrics_by_node(),
            dag,
            sets,
            maps,
            rebuild_steps: 0,
        })
    }

    pub fn dag(&self) -> &Dag<Var> {
        &self.dag
    }

    pub fn dag_mut(&mut self) -> &mut Dag<Var> {
        &mut self.dag
    }

    pub fn into_dag(self) -> Dag<Var> {
        self.dag
    }

    pub fn pointee_node(&self) -> NodeId {
        self.sets
    }

    pub fn map_node(&self) -> NodeId {
        self.maps
    }
}

impl Default for MultiLevel {
    fn default() -> Self {
        Self::new()
    }
}

impl Backend for MultiLevel {
    type Set = SetIndex;
    type Map = SetIndex;

    fn kind(&self) -> BackendKind {
        BackendKind::MultiLevel
    }

    fn empty_set(&mut self) -> SetIndex {
        SetIndex::EMPTY
    }

    fn set_of(&mut self, vars: &[Var]) -> Result<SetIndex, MdeError> {
        self.dag.flat_mut(self.sets)?.register_from_items(vars.to_vec())
    }

    fn set_union(&mut self, a: &SetIndex, b: &SetIndex) -> Result<SetIndex, MdeError> {
        self.dag.union(self.sets, *a, *b)
    }

    fn set_difference(&mut self, a: &SetIndex, b: &SetIndex) -> Result<SetIndex, MdeError> {
        self.dag.difference(self.sets, *a, *b)
    }

    fn set_members(&self, s: &SetIndex) -> Result<Vec<Var>, MdeError> {
        Ok(self.dag.flat(self.sets)?.resolve(*s)?.to_vec())
    }

    fn set_eq(&mut self, a: &SetIndex, b: &SetIndex) -> bool {
        a == b
    }

    fn empty_map(&mut self) -> SetIndex {
        SetIndex::EMPTY
    }

    fn map_join(&mut self, a: &SetIndex, b: &SetIndex) -> Result<SetIndex, MdeError> {
        self.dag.union(self.maps, *a, *b)
    }

    fn pointees(&mut self, m: &SetIndex, var: Var) -> Result<SetIndex, MdeError> {
        Ok(self.dag.get_pointees(self.maps, *m, &var)?.unwrap_or(SetIndex::EMPTY))
    }

    fn bind(&mut self, m: &SetIndex, var: Var, s: &SetIndex) -> Result<SetIndex, MdeError> {
        self.rebuild_steps += self.dag.nested(self.maps)?.set_size(*m)? as u64;
        self.dag.update_pointees(self.maps, *m, var, *s)
    }

    fn map_eq(&mut self, a: &SetIndex, b: &SetIndex) -> bool {
        a == b
    }

    fn map_leq(&mut self, a: &SetIndex, b: &SetIndex) -> Result<bool, MdeError> {
        self.dag.is_subset(self.maps, *a, *b)
    }

    fn flatten(&self, m: &SetIndex) -> Result<PointsTo, MdeError> {
        let mut out = PointsTo::new();
        for (k, p) in self.dag.flatten(self.maps, *m)? {
            out.entry(k).or_default().insert(p);
        }
        Ok(out)
    }

    fn work(&self) -> WorkStats {
        let mut work = work_since(&self.dag, &self.baseline);
        work.element_steps += self.rebuild_steps;
        work
    }

    fn metrics(&self) -> Option<MetricsReport> {
        Some(self.dag.metrics_report_since(&self.baseline))
    }
}
