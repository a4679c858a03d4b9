//! Two small scripted sessions that build a known engine configuration.
//!
//! `basic` interns `{a,b,c}` and `{a,b,d}` and unions them. `nested` builds
//! the maps `J = {a -> {p,q}, b -> {s,t}}` and `K = {b -> {t,u}, c -> {p,q}}`
//! over a shared pointee engine and unions them.

use serde_json::{json, Value};

use mde::{Dag, NestedElement, NodeId, SetIndex};

use crate::error::CliError;
use crate::state;

#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum DemoKind {
    Basic,
    Nested,
}

impl DemoKind {
    pub fn name(self) -> &'static str {
        match self {
            DemoKind::Basic => "basic",
            DemoKind::Nested => "nested",
        }
    }
}

pub const BASIC_NODE: &str = "sets";
pub const POINTEES: &str = "pointees";
pub const POINTS_TO: &str = "points_to";

/// Engines the demo runs on, freshly wired.
pub fn fresh(kind: DemoKind) -> Dag<String> {
    let mut dag = Dag::new();
    match kind {
        DemoKind::Basic => {
            dag.add_flat(BASIC_NODE).expect("fresh dag");
        }
        DemoKind::Nested => {
            let c = dag.add_flat(POINTEES).expect("fresh dag");
            dag.add_nested(POINTS_TO, &[c]).expect("fresh dag");
        }
    }
    dag
}

fn flat_node(dag: &Dag<String>, name: &str) -> Result<NodeId, CliError> {
    dag.find(name)
        .filter(|&id| dag.flat(id).is_ok())
        .ok_or_else(|| CliError::Usage(format!("state has no flat node `{name}`")))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Runs the demo script on `dag` and returns the index of the final union.
pub fn run(kind: DemoKind, dag: &mut Dag<String>) -> Result<SetIndex, CliError> {
    match kind {
        DemoKind::Basic => {
            let id = flat_node(dag, BASIC_NODE)?;
            let e = dag.flat_mut(id)?;
            let (first, _) = e.register(strings(&["a", "b", "c"]))?;
            let (second, _) = e.register(strings(&["a", "b", "d"]))?;
            Ok(e.union(first, second)?)
        }
        DemoKind::Nested => {
            let child = flat_node(dag, POINTEES)?;
            let parent = dag
                .find(POINTS_TO)
                .filter(|&p| dag.children(p).ok() == Some(&[child][..]))
                .ok_or_else(|| CliError::Usage(format!("state has no nested node `{POINTS_TO}` over `{POINTEES}`")))?;
            let sets = dag.flat_mut(child)?;
            let (pq, _) = sets.register(strings(&["p", "q"]))?;
            let (st, _) = sets.register(strings(&["s", "t"]))?;
            let (tu, _) = sets.register(strings(&["t", "u"]))?;
            let maps = dag.nested_mut(parent)?;
            let entry = |k: &str, v| NestedElement::single(k.to_string(), v);
            let (j, _) = maps.register(vec![entry("a", pq), entry("b", st)])?;
            let (k, _) = maps.register(vec![entry("b", tu), entry("c", pq)])?;
            Ok(dag.union(parent, j, k)?)
        }
    }
}

/// Runs the demo and reports the final configuration and this run's
/// counter movement.
pub fn report(kind: DemoKind, dag: &mut Dag<String>) -> Result<Value, CliError> {
    let before = dag.metrics_by_node();
    let result = run(kind, dag)?;
    let metrics = dag.metrics_report_since(&before);
    let merges: u64 = dag
        .nodes()
        .map(|(_, n)| {
            let m = n.metrics().since(&before.get(n.name()).cloned().unwrap_or_default());
            m.merge_executions()
        })
        .sum();
    Ok(json!({
        "demo": kind.name(),
        "result": result.get(),
        "state": state::describe(dag, |s| s.clone()),
        "metrics": metrics.to_json(),
        "merge_executions": merges,
    }))
}
