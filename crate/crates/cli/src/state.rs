//! Reading and writing engine snapshots and describing engine contents.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use mde::{Dag, Node, OpKind, Property, SetIndex, Snapshot};

use crate::error::CliError;

/// Snapshot text of a DAG whose atoms render through `render`.
pub fn dump<P: Property>(dag: &Dag<P>, render: impl Fn(&P) -> String) -> String {
    Snapshot::capture(dag, render).to_json()
}

/// Restores a DAG of string atoms.
pub fn load_strings(text: &str) -> Result<Dag<String>, CliError> {
    Ok(Snapshot::from_json(text)?.restore(|s| Ok(s.to_string()))?)
}

fn sorted_memo(pairs: impl Iterator<Item = ((SetIndex, SetIndex), SetIndex)>) -> Vec<[u32; 3]> {
    let mut rows: Vec<[u32; 3]> = pairs.map(|((l, r), res)| [l.get(), r.get(), res.get()]).collect();
    rows.sort_unstable();
    rows
}

type Tables<'a> = (Vec<Value>, BTreeMap<&'a str, Vec<[u32; 3]>>, Vec<(u32, u32, bool)>);

/// Storage table, memo tables and subset relations of every node.
pub fn describe<P: Property>(dag: &Dag<P>, render: impl Fn(&P) -> String) -> Value {
    let nodes: Vec<Value> = dag
        .nodes()
        .map(|(_, node)| {
            let (storage, memo, subset): Tables = match node {
                Node::Flat(e) => (
                    e.store()
                        .slots()
                        .map(|s| match s {
                            Some(elems) => Value::from(elems.iter().map(&render).collect::<Vec<_>>()),
                            None => Value::Null,
                        })
                        .collect(),
                    OpKind::ALL
                        .iter()
                        .map(|op| (op.name(), sorted_memo(e.memo(*op).iter().map(|(k, v)| (*k, *v)))))
                        .collect(),
                    subset_rows(e.subset_relations().iter().map(|(k, v)| (*k, *v))),
                ),
                Node::Nested { engine, .. } => (
                    engine
                        .store()
                        .slots()
                        .map(|s| match s {
                            Some(elems) => {
                                let obj: serde_json::Map<String, Value> = elems
                                    .iter()
                                    .map(|e| {
                                        let v = if e.values.len() == 1 {
                                            Value::from(e.values[0].get())
                                        } else {
                                            Value::from(e.values.iter().map(|i| i.get()).collect::<Vec<_>>())
                                        };
                                        (render(&e.key), v)
                                    })
                                    .collect();
                                Value::Object(obj)
                            }
                            None => Value::Null,
                        })
                        .collect(),
                    OpKind::ALL
                        .iter()
                        .map(|op| (op.name(), sorted_memo(engine.memo(*op).iter().map(|(k, v)| (*k, *v)))))
                        .collect(),
                    subset_rows(engine.subset_relations().iter().map(|(k, v)| (*k, *v))),
                ),
            };
            let children: Vec<&str> = node
                .children()
                .iter()
                .map(|c| dag.node(*c).expect("wired child").name())
                .collect();
            json!({
                "name": node.name(),
                "kind": node.kind(),
                "children": children,
                "storage": storage,
                "memo": memo,
                "subset": subset,
            })
        })
        .collect();
    Value::from(nodes)
}

fn subset_rows(rows: impl Iterator<Item = ((SetIndex, SetIndex), bool)>) -> Vec<(u32, u32, bool)> {
    let mut out: Vec<(u32, u32, bool)> = rows.map(|((a, b), f)| (a.get(), b.get(), f)).collect();
    out.sort_unstable();
    out
}

/// Per-node sizes, for the state summary.
pub fn summary<P: Property>(dag: &Dag<P>) -> Value {
    let nodes: Vec<Value> = dag
        .nodes()
        .map(|(_, node)| {
            let (slots, live, memo, subset) = match node {
                Node::Flat(e) => (
                    e.store().slot_count(),
                    e.store().live_count(),
                    OpKind::ALL.iter().map(|op| e.memo(*op).len()).sum::<usize>(),
                    e.subset_relations().len(),
                ),
                Node::Nested { engine, .. } => (
                    engine.store().slot_count(),
                    engine.store().live_count(),
                    OpKind::ALL.iter().map(|op| engine.memo(*op).len()).sum::<usize>(),
                    engine.subset_relations().len(),
                ),
            };
            json!({
                "name": node.name(),
                "kind": node.kind(),
                "slots": slots,
                "live_sets": live,
                "memo_entries": memo,
                "subset_entries": subset,
            })
        })
        .collect();
    json!({ "nodes": nodes, "metrics": dag.metrics_report().to_json() })
}

/// Plain-text rendering of [`describe`] output.
pub fn pretty_state(state: &Value) -> String {
    let mut out = String::new();
    for node in state.as_array().into_iter().flatten() {
        out += &format!("node {} ({})\n", node["name"].as_str().unwrap_or("?"), node["kind"].as_str().unwrap_or("?"));
        out += "  storage\n";
        for (i, set) in node["storage"].as_array().into_iter().flatten().enumerate() {
            let body = match set {
                Value::Null => "(evicted)".to_string(),
                Value::Array(items) => {
                    let items: Vec<String> = items.iter().map(|v| v.as_str().unwrap_or("?").to_string()).collect();
                    format!("{{{}}}", items.join(", "))
                }
                Value::Object(map) => {
                    let items: Vec<String> = map.iter().map(|(k, v)| format!("{k} -> {v}")).collect();
                    format!("{{{}}}", items.join(", "))
                }
                other => other.to_string(),
            };
            out += &format!("    {i:>4}  {body}\n");
        }
        for (op, rows) in node["memo"].as_object().into_iter().flatten() {
            let rows = rows.as_array().cloned().unwrap_or_default();
            if rows.is_empty() {
                continue;
            }
            out += &format!("  {op} memo\n");
            for r in rows {
                out += &format!("    ({}, {}) -> {}\n", r[0], r[1], r[2]);
            }
        }
        let subset = node["subset"].as_array().cloned().unwrap_or_default();
        if !subset.is_empty() {
            out += "  subset relations\n";
            for r in subset {
                let rel = if r[2] == Value::Bool(true) { "subset of" } else { "superset of" };
                out += &format!("    {} {rel} {}\n", r[0], r[1]);
            }
        }
    }
    out
}

/// Plain-text rendering of a metrics report.
pub fn pretty_metrics(report: &Value) -> String {
    let mut out = String::from("engine        operation     hits  equal  subset  empty  cold  edge  ratio\n");
    for (engine, ops) in report.as_object().into_iter().flatten() {
        for (op, row) in ops.as_object().into_iter().flatten() {
            let n = |k: &str| row[k].as_u64().unwrap_or(0);
            let ratio = row["hit_ratio"].as_f64().map_or("-".to_string(), |r| format!("{r:.3}"));
            out += &format!(
                "{engine:<13} {op:<13} {:>4} {:>6} {:>7} {:>6} {:>5} {:>5}  {ratio}\n",
                n("hits"),
                n("equal_hits"),
                n("subset_hits"),
                n("empty_hits"),
                n("cold_misses"),
                n("edge_misses"),
            );
        }
    }
    out
}
