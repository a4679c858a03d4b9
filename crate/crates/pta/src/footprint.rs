//! Unit-cost storage model for points-to facts.
//!
//! Every graph node, graph edge and reference costs one unit. Three layouts
//! are compared over a sequence of program points:
//!
//! - flat: each point stores its own graph, pointers and pointees as nodes
//!   plus one edge per points-to pair;
//! - single-level: each point stores its pointers plus one reference per
//!   pointer to a shared pointee set;
//! - multi-level: each point stores one reference to a shared map.
//!
//! Shared storage (distinct sets and maps, each counted once) is reported
//! separately from the per-point counts.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::backend::PointsTo;
use crate::program::Var;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FootprintReport {
    pub model: &'static str,
    pub points: usize,
    pub flat_per_point: Vec<u64>,
    pub flat_total: u64,
    pub single_level_per_point: Vec<u64>,
    pub single_level_total: u64,
    /// Elements of the distinct pointee sets.
    pub single_level_shared: u64,
    pub multi_level_per_point: Vec<u64>,
    pub multi_level_total: u64,
    /// Keys and references of the distinct maps plus their pointee sets.
    pub multi_level_shared: u64,
    pub distinct_pointee_sets: usize,
    pub distinct_maps: usize,
}

const MODEL: &str = "one unit per node, edge or reference";

fn flat_units(m: &PointsTo) -> u64 {
    let mut nodes: BTreeSet<Var> = m.keys().copied().collect();
    let mut edges = 0;
    for s in m.values() {
        nodes.extend(s.iter().copied());
        edges += s.len() as u64;
    }
    nodes.len() as u64 + edges
}

/// Footprint of the facts at the given points, in order.
pub fn footprint<'a>(points: impl IntoIterator<Item = &'a PointsTo>) -> FootprintReport {
    let points: Vec<&PointsTo> = points.into_iter().collect();
    if points.is_empty() {
        return FootprintReport {
            model: MODEL,
            ..FootprintReport::default()
        };
    }
    let flat_per_point: Vec<u64> = points.iter().map(|m| flat_units(m)).collect();
    let single_level_per_point: Vec<u64> = points.iter().map(|m| 2 * m.len() as u64).collect();
    let multi_level_per_point = vec![1; points.len()];
    let sets: BTreeSet<&BTreeSet<Var>> = points.iter().flat_map(|m| m.values()).collect();
    let maps: BTreeSet<&PointsTo> = points.iter().copied().collect();
    let set_units: u64 = sets.iter().map(|s| s.len() as u64).sum();
    let map_units: u64 = maps.iter().map(|m| 2 * m.len() as u64).sum();
    FootprintReport {
        model: MODEL,
        points: points.len(),
        flat_total: flat_per_point.iter().sum(),
        flat_per_point,
        single_level_total: single_level_per_point.iter().sum(),
        single_level_per_point,
        single_level_shared: set_units,
        multi_level_total: multi_level_per_point.iter().sum(),
        multi_level_per_point,
        multi_level_shared: map_units + set_units,
        distinct_pointee_sets: sets.len(),
        distinct_maps: maps.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(u32, &[u32])]) -> PointsTo {
        pairs
            .iter()
            .map(|(k, vs)| (Var(*k), vs.iter().map(|v| Var(*v)).collect()))
            .collect()
    }

    #[test]
    fn empty_input_costs_nothing() {
        let r = footprint([]);
        assert_eq!((r.flat_total, r.single_level_total, r.multi_level_total), (0, 0, 0));
        assert_eq!(r.single_level_shared + r.multi_level_shared, 0);
    }

    #[test]
    fn one_edge() {
        let m = map(&[(0, &[1])]);
        let r = footprint([&m]);
        // p, x and the edge between them
        assert_eq!(r.flat_total, 3);
        // one key and one reference, plus the shared {x}
        assert_eq!(r.single_level_total, 2);
        assert_eq!(r.single_level_shared, 1);
        assert_eq!(r.multi_level_total, 1);
        assert_eq!(r.multi_level_shared, 3);
    }

    #[test]
    fn pointee_nodes_are_not_double_counted() {
        // two pointers sharing a target: nodes {0,1,2}, edges 2
        let m = map(&[(0, &[2]), (1, &[2])]);
        let r = footprint([&m, &m]);
        assert_eq!(r.flat_per_point, vec![5, 5]);
        assert_eq!(r.single_level_per_point, vec![4, 4]);
        assert_eq!(r.distinct_pointee_sets, 1);
        assert_eq!(r.distinct_maps, 1);
        assert_eq!(r.multi_level_total, 2);
    }
}
