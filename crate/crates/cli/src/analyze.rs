//! Running both analyses on a program and rendering the results.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use mde::{Dag, Snapshot};
use mde_pta::analysis::{named_points_to, named_vars};
use mde_pta::{analyze, footprint, Analysis, Backend, BackendKind, MultiLevel, Naive, Options, PointsTo, Program, SingleLevel, Var};

use crate::error::CliError;
use crate::state;

/// Result of one backend run.
pub struct Run {
    pub analysis: Analysis,
    pub report: Value,
    /// Engine state after the run, for engine backends.
    pub state: Option<Dag<Var>>,
}

fn restore(program: &mut Program, text: &str) -> Result<Dag<Var>, CliError> {
    Ok(Snapshot::from_json(text)?.restore(|s| Ok(program.symbols.intern(s)))?)
}

fn finish_run<B: Backend>(program: &Program, b: &mut B) -> Result<(Analysis, Value), CliError> {
    let analysis = analyze(program, b, Options::default())?;
    let work = b.work();
    let metrics = b.metrics().map(|m| m.to_json()).unwrap_or_else(|| json!({}));
    Ok((
        analysis,
        json!({
            "metrics": metrics,
            "work": { "merge_executions": work.merge_executions, "element_steps": work.element_steps },
        }),
    ))
}

/// Analyzes `program` on `backend`, optionally continuing from saved engine
/// state. Names found only in the state are added to the program's symbols.
pub fn run(program: &mut Program, backend: BackendKind, state_in: Option<&str>) -> Result<Run, CliError> {
    match backend {
        BackendKind::Naive => {
            if state_in.is_some() {
                return Err(CliError::Usage("the naive backend keeps no engine state".into()));
            }
            let (analysis, report) = finish_run(program, &mut Naive::new())?;
            Ok(Run {
                analysis,
                report,
                state: None,
            })
        }
        BackendKind::SingleLevel => {
            let mut b = match state_in {
                Some(text) => SingleLevel::with_dag(restore(program, text)?)?,
                None => SingleLevel::new(),
            };
            let (analysis, report) = finish_run(program, &mut b)?;
            Ok(Run {
                analysis,
                report,
                state: Some(b.into_dag()),
            })
        }
        BackendKind::MultiLevel => {
            let mut b = match state_in {
                Some(text) => MultiLevel::with_dag(restore(program, text)?)?,
                None => MultiLevel::new(),
            };
            let (analysis, report) = finish_run(program, &mut b)?;
            Ok(Run {
                analysis,
                report,
                state: Some(b.into_dag()),
            })
        }
    }
}

pub fn dump_state(program: &Program, dag: &Dag<Var>) -> String {
    state::dump(dag, |v| program.symbols.name(*v).to_string())
}

/// Parses `6-9` or `1,3,5` or a mix like `1,4-6`.
pub fn parse_points(list: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("bad point list `{list}`"));
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

/// Full JSON report: per-point and per-block facts, footprint over the
/// chosen points (all statements by default), counters.
pub fn report(program: &Program, backend: BackendKind, run: &Run, points: Option<&[usize]>) -> Result<Value, CliError> {
    let pt = &run.analysis.points_to;
    let live = &run.analysis.liveness;
    let mut rows = Vec::new();
    for (n, (block, stmt)) in program.stmts().enumerate() {
        rows.push(json!({
            "point": n + 1,
            "block": program.blocks[block].label,
            "stmt": program.render_stmt(stmt),
            "points_to_in": named_points_to(program, &pt.stmt_in[n]),
            "points_to_out": named_points_to(program, &pt.stmt_out[n]),
            "live_in": named_vars(program, &live.stmt_in[n]),
            "live_out": named_vars(program, &live.stmt_out[n]),
        }));
    }
    let blocks: Vec<Value> = program
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            json!({
                "label": b.label,
                "points_to_in": named_points_to(program, &pt.block_in[i]),
                "points_to_out": named_points_to(program, &pt.block_out[i]),
                "live_in": named_vars(program, &live.block_in[i]),
                "live_out": named_vars(program, &live.block_out[i]),
            })
        })
        .collect();
    let selected: Vec<usize> = match points {
        Some(p) => p.to_vec(),
        None => (1..=program.stmt_count()).collect(),
    };
    let mut facts: Vec<&PointsTo> = Vec::new();
    for &p in &selected {
        facts.push(pt.point(p).ok_or_else(|| CliError::Usage(format!("no point {p}; the program has {}", program.stmt_count())))?);
    }
    let fp = footprint(facts);
    Ok(json!({
        "program": program.name,
        "backend": backend.name(),
        "points": rows,
        "blocks": blocks,
        "footprint": { "points": selected, "report": fp },
        "iterations": { "points_to_block_visits": pt.block_visits, "liveness_block_visits": live.block_visits },
        "metrics": run.report["metrics"],
        "work": run.report["work"],
    }))
}

pub fn pretty(report: &Value) -> String {
    let mut out = format!(
        "program {} on {}\n\npoint  block       statement        points-to before / live before\n",
        report["program"].as_str().unwrap_or("?"),
        report["backend"].as_str().unwrap_or("?")
    );
    for row in report["points"].as_array().into_iter().flatten() {
        let pts: Vec<String> = row["points_to_in"]
            .as_object()
            .into_iter()
            .flatten()
            .map(|(k, v)| {
                let names: Vec<&str> = v.as_array().into_iter().flatten().filter_map(Value::as_str).collect();
                format!("{k}->{{{}}}", names.join(","))
            })
            .collect();
        let live: Vec<&str> = row["live_in"].as_array().into_iter().flatten().filter_map(Value::as_str).collect();
        out += &format!(
            "{:>5}  {:<10}  {:<15}  {{{}}} / {{{}}}\n",
            row["point"].to_string(),
            row["block"].as_str().unwrap_or("?"),
            row["stmt"].as_str().unwrap_or("?"),
            pts.join(", "),
            live.join(",")
        );
    }
    let fp = &report["footprint"]["report"];
    out += &format!(
        "\nfootprint ({}) over {} points: flat {}, single-level {} (+{} shared), multi-level {} (+{} shared)\n",
        fp["model"].as_str().unwrap_or(""),
        fp["points"],
        fp["flat_total"],
        fp["single_level_total"],
        fp["single_level_shared"],
        fp["multi_level_total"],
        fp["multi_level_shared"]
    );
    if report["metrics"].as_object().is_some_and(|m| !m.is_empty()) {
        out += "\n";
        out += &state::pretty_metrics(&report["metrics"]);
    }
    out
}

/// Distinct maps and pointee sets among the facts before each statement.
pub fn distinct_facts(analysis: &Analysis) -> (usize, usize) {
    let maps: BTreeSet<&PointsTo> = analysis.points_to.stmt_in.iter().collect();
    let sets: BTreeSet<&BTreeSet<Var>> = maps.iter().flat_map(|m| m.values()).collect();
    (maps.len(), sets.len())
}
