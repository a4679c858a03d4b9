//! Query classification counters.
//!
//! Every top-level operation query lands in exactly one of six buckets, taken
//! from the first check that resolves it: equal operands, an empty operand, a
//! known subset relation, a memoized result, or a miss. Misses split into
//! cold (the result set was never seen) and edge (the result already existed,
//! only the operand-to-result link was new).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::index::OpKind;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Hit,
    EqualHit,
    SubsetHit,
    EmptyHit,
    ColdMiss,
    EdgeMiss,
}

/// Counters for one operation kind of one engine.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub hits: u64,
    pub equal_hits: u64,
    pub subset_hits: u64,
    pub empty_hits: u64,
    pub cold_misses: u64,
    pub edge_misses: u64,
    /// Kernel runs.
    pub merge_executions: u64,
    /// Elements consumed by kernel runs.
    pub merge_steps: u64,
}

impl OpCounters {
    pub fn record(&mut self, outcome: Outcome) {
        let slot = match outcome {
            Outcome::Hit => &mut self.hits,
            Outcome::EqualHit => &mut self.equal_hits,
            Outcome::SubsetHit => &mut self.subset_hits,
            Outcome::EmptyHit => &mut self.empty_hits,
            Outcome::ColdMiss => &mut self.cold_misses,
            Outcome::EdgeMiss => &mut self.edge_misses,
        };
        *slot += 1;
    }

    pub fn all_hits(&self) -> u64 {
        self.hits + self.equal_hits + self.subset_hits + self.empty_hits
    }

    pub fn misses(&self) -> u64 {
        self.cold_misses + self.edge_misses
    }

    pub fn total_queries(&self) -> u64 {
        self.all_hits() + self.misses()
    }

    /// All four hit kinds over all queries; `None` before the first query.
    pub fn hit_ratio(&self) -> Option<f64> {
        match self.total_queries() {
            0 => None,
            total => Some(self.all_hits() as f64 / total as f64),
        }
    }

    /// Adds `other` counter-wise.
    pub fn absorb(&mut self, other: &OpCounters) {
        self.hits += other.hits;
        self.equal_hits += other.equal_hits;
        self.subset_hits += other.subset_hits;
        self.empty_hits += other.empty_hits;
        self.cold_misses += other.cold_misses;
        self.edge_misses += other.edge_misses;
        self.merge_executions += other.merge_executions;
        self.merge_steps += other.merge_steps;
    }

    /// Counter-wise difference `self - earlier`.
    pub fn since(&self, earlier: &OpCounters) -> OpCounters {
        OpCounters {
            hits: self.hits - earlier.hits,
            equal_hits: self.equal_hits - earlier.equal_hits,
            subset_hits: self.subset_hits - earlier.subset_hits,
            empty_hits: self.empty_hits - earlier.empty_hits,
            cold_misses: self.cold_misses - earlier.cold_misses,
            edge_misses: self.edge_misses - earlier.edge_misses,
            merge_executions: self.merge_executions - earlier.merge_executions,
            merge_steps: self.merge_steps - earlier.merge_steps,
        }
    }
}

/// Per-operation counters of one engine.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EngineMetrics {
    ops: [OpCounters; 3],
}

impl EngineMetrics {
    pub fn get(&self, op: OpKind) -> &OpCounters {
        &self.ops[op.slot()]
    }

    pub(crate) fn get_mut(&mut self, op: OpKind) -> &mut OpCounters {
        &mut self.ops[op.slot()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (OpKind, &OpCounters)> {
        OpKind::ALL.into_iter().map(|op| (op, self.get(op)))
    }

    pub fn merge_executions(&self) -> u64 {
        self.ops.iter().map(|c| c.merge_executions).sum()
    }

    pub fn merge_steps(&self) -> u64 {
        self.ops.iter().map(|c| c.merge_steps).sum()
    }

    /// Adds another engine's counters, for totals across runs.
    pub fn absorb(&mut self, other: &EngineMetrics) {
        for (mine, theirs) in self.ops.iter_mut().zip(&other.ops) {
            mine.absorb(theirs);
        }
    }

    /// Counter-wise difference against an earlier reading of the same engine.
    pub fn since(&self, earlier: &EngineMetrics) -> EngineMetrics {
        EngineMetrics {
            ops: OpKind::ALL.map(|op| self.get(op).since(earlier.get(op))),
        }
    }
}

/// One row of a [`MetricsReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpReport {
    pub hits: u64,
    pub equal_hits: u64,
    pub subset_hits: u64,
    pub empty_hits: u64,
    pub cold_misses: u64,
    pub edge_misses: u64,
    pub hit_ratio: Option<f64>,
}

impl From<&OpCounters> for OpReport {
    fn from(c: &OpCounters) -> Self {
        OpReport {
            hits: c.hits,
            equal_hits: c.equal_hits,
            subset_hits: c.subset_hits,
            empty_hits: c.empty_hits,
            cold_misses: c.cold_misses,
            edge_misses: c.edge_misses,
            hit_ratio: c.hit_ratio(),
        }
    }
}

/// `{engine: {operation: row}}`, keys sorted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricsReport(pub BTreeMap<String, BTreeMap<String, OpReport>>);

impl MetricsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_engine(&mut self, name: &str, metrics: &EngineMetrics) {
        let rows = metrics
            .iter()
            .map(|(op, c)| (op.name().to_string(), OpReport::from(c)))
            .collect();
        self.0.insert(name.to_string(), rows);
    }

    pub fn row(&self, engine: &str, op: OpKind) -> Option<&OpReport> {
        self.0.get(engine)?.get(op.name())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report is always serializable")
    }
}
