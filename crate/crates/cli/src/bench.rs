//! Redundancy benchmark: a loop-heavy program on every backend, plus two
//! constructed scripts whose hit ratios are known in advance.

use std::time::Instant;

use serde_json::{json, Value};

use mde::{FlatEngine, MetricsReport, Node, OpKind};
use mde_pta::generate::{loop_bench, LoopBench};
use mde_pta::{analyze, Analysis, Backend, BackendKind, MultiLevel, Naive, Options, SingleLevel};

use crate::analyze::distinct_facts;
use crate::error::CliError;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub program: LoopBench,
    /// Times the repeated union is issued.
    pub repeat: usize,
    /// Disjoint unions in the low-redundancy script.
    pub disjoint: usize,
    pub backends: Vec<BackendKind>,
    /// Include wall-clock times; off for byte-stable output.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            program: LoopBench::default(),
            repeat: 100,
            disjoint: 100,
            backends: BackendKind::ALL.to_vec(),
            timing: true,
        }
    }
}

/// Hit ratio below which a workload is flagged as low redundancy.
pub const LOW_REDUNDANCY: f64 = 0.5;

/// One union of two disjoint sets issued `k` times: one miss, then hits.
pub fn repeated_union(k: usize) -> MetricsReport {
    let mut e = FlatEngine::<u32>::new("repeat");
    let (a, _) = e.register(vec![1, 2]).expect("sorted");
    let (b, _) = e.register(vec![3, 4]).expect("sorted");
    for _ in 0..k {
        e.union(a, b).expect("live operands");
    }
    let mut r = MetricsReport::new();
    r.add_engine("repeat", e.metrics());
    r
}

/// `n` unions of fresh disjoint pairs: every query misses.
pub fn disjoint_unions(n: usize) -> MetricsReport {
    let mut e = FlatEngine::<u32>::new("disjoint");
    for i in 0..n as u32 {
        let (a, _) = e.register(vec![2 * i]).expect("sorted");
        let (b, _) = e.register(vec![2 * i + 1]).expect("sorted");
        e.union(a, b).expect("live operands");
    }
    let mut r = MetricsReport::new();
    r.add_engine("disjoint", e.metrics());
    r
}

fn forced(name: &str, report: MetricsReport, engine: &str) -> Value {
    let ratio = report.row(engine, OpKind::Union).and_then(|r| r.hit_ratio);
    json!({
        "script": name,
        "union_hit_ratio": ratio,
        "low_redundancy": ratio.is_some_and(|r| r < LOW_REDUNDANCY),
        "metrics": report.to_json(),
    })
}

struct Row {
    analysis: Analysis,
    json: Value,
    merges: u64,
    steps: u64,
    distinct_pairs: Option<u64>,
    partition_ok: bool,
}

fn measure<B: Backend>(
    program: &mde_pta::Program,
    b: &mut B,
    timing: bool,
    engines: impl Fn(&B) -> Option<&mde::Dag<mde_pta::Var>>,
) -> Result<Row, CliError> {
    let start = Instant::now();
    let analysis = analyze(program, b, Options::default())?;
    let elapsed = start.elapsed();
    let work = b.work();
    let (maps, sets) = distinct_facts(&analysis);
    let mut json = json!({
        "backend": b.kind().name(),
        "merge_executions": work.merge_executions,
        "element_steps": work.element_steps,
        "distinct_maps": maps,
        "distinct_pointee_sets": sets,
    });
    if timing {
        json["wall_ms"] = json!(elapsed.as_secs_f64() * 1e3);
    }
    let mut distinct_pairs = None;
    let mut partition_ok = true;
    if let Some(dag) = engines(b) {
        let mut pairs = 0;
        let mut sizes = serde_json::Map::new();
        for (_, node) in dag.nodes() {
            let (live, logged) = match node {
                Node::Flat(e) => (e.store().live_count(), e.distinct_queries()),
                Node::Nested { engine, .. } => (engine.store().live_count(), engine.distinct_queries()),
            };
            pairs += logged.unwrap_or(0) as u64;
            sizes.insert(node.name().to_string(), json!(live));
            partition_ok &= node.metrics().iter().all(|(_, c)| c.merge_executions == c.misses());
        }
        distinct_pairs = Some(pairs);
        json["engine_sets"] = Value::Object(sizes);
        json["distinct_operand_pairs"] = json!(pairs);
        json["metrics"] = b.metrics().map(|m| m.to_json()).unwrap_or(Value::Null);
    }
    Ok(Row {
        analysis,
        json,
        merges: work.merge_executions,
        steps: work.element_steps,
        distinct_pairs,
        partition_ok,
    })
}

fn log_queries(dag: &mut mde::Dag<mde_pta::Var>) {
    let ids: Vec<_> = dag.ids().collect();
    for id in ids {
        match dag.node_mut(id).expect("own id") {
            Node::Flat(e) => e.set_query_log(true),
            Node::Nested { engine, .. } => engine.set_query_log(true),
        }
    }
}

pub fn bench(cfg: &BenchConfig) -> Result<Value, CliError> {
    let program = loop_bench(cfg.program);
    let mut rows: Vec<(BackendKind, Row)> = Vec::new();
    for &kind in &cfg.backends {
        let row = match kind {
            BackendKind::Naive => measure(&program, &mut Naive::new(), cfg.timing, |_| None)?,
            BackendKind::SingleLevel => {
                let mut b = SingleLevel::new();
                log_queries(b.dag_mut());
                measure(&program, &mut b, cfg.timing, |b| Some(b.dag()))?
            }
            BackendKind::MultiLevel => {
                let mut b = MultiLevel::new();
                log_queries(b.dag_mut());
                measure(&program, &mut b, cfg.timing, |b| Some(b.dag()))?
            }
        };
        rows.push((kind, row));
    }
    let find = |k: BackendKind| rows.iter().find(|(kind, _)| *kind == k).map(|(_, r)| r);
    let naive = find(BackendKind::Naive);
    let multi = find(BackendKind::MultiLevel);
    let agree = rows.windows(2).all(|w| {
        let (a, b) = (&w[0].1.analysis, &w[1].1.analysis);
        a.points_to.stmt_in == b.points_to.stmt_in && a.liveness.stmt_in == b.liveness.stmt_in
    });
    let checks = json!({
        "results_agree": agree,
        "partition_holds": rows.iter().all(|(_, r)| r.partition_ok),
        "multi_level_merges_within_distinct_pairs": multi.and_then(|m| m.distinct_pairs.map(|p| m.merges <= p)),
        "multi_level_fewer_steps_than_naive": match (multi, naive) {
            (Some(m), Some(n)) => Some(m.steps < n.steps),
            _ => None,
        },
    });
    Ok(json!({
        "program": {
            "seed": cfg.program.seed,
            "loops": cfg.program.loops,
            "arm_len": cfg.program.arm_len,
            "vars": cfg.program.vars,
            "sites": cfg.program.sites,
            "blocks": program.blocks.len(),
            "statements": program.stmt_count(),
        },
        "backends": rows.iter().map(|(_, r)| r.json.clone()).collect::<Vec<_>>(),
        "checks": checks,
        "scripts": [
            forced("repeated_union", repeated_union(cfg.repeat), "repeat"),
            forced("disjoint_unions", disjoint_unions(cfg.disjoint), "disjoint"),
        ],
    }))
}

pub fn pretty(report: &Value) -> String {
    let mut out = format!(
        "loop benchmark: {} blocks, {} statements\n\nbackend        merges     steps  maps  sets  wall ms\n",
        report["program"]["blocks"], report["program"]["statements"]
    );
    for row in report["backends"].as_array().into_iter().flatten() {
        out += &format!(
            "{:<13} {:>7} {:>9} {:>5} {:>5}  {}\n",
            row["backend"].as_str().unwrap_or("?"),
            row["merge_executions"].to_string(),
            row["element_steps"].to_string(),
            row["distinct_maps"].to_string(),
            row["distinct_pointee_sets"].to_string(),
            row.get("wall_ms").and_then(Value::as_f64).map_or("-".into(), |t| format!("{t:.2}"))
        );
    }
    out += &format!("\nchecks: {}\n", report["checks"]);
    for s in report["scripts"].as_array().into_iter().flatten() {
        out += &format!(
            "script {}: union hit ratio {}{}\n",
            s["script"].as_str().unwrap_or("?"),
            s["union_hit_ratio"],
            if s["low_redundancy"] == Value::Bool(true) { " (low redundancy)" } else { "" }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_ratios() {
        let r = repeated_union(100);
        let row = r.row("repeat", OpKind::Union).unwrap();
        assert_eq!((row.cold_misses, row.hits), (1, 99));
        assert_eq!(row.hit_ratio, Some(99.0 / 100.0));
        let r = disjoint_unions(50);
        assert_eq!(r.row("disjoint", OpKind::Union).unwrap().hit_ratio, Some(0.0));
    }
}
