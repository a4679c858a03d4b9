//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Time limits are wall-clock budgets per criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use mde::{Dag, FlatEngine, NestedElement, NodeId, OpKind, SetIndex};
use mde_cli::demo::{self, DemoKind};
use mde_cli::verify::{persistence_check, verify, VerifyConfig};
use mde_cli::{bench, bench::BenchConfig};
use mde_pta::{analyze, bundled, footprint, Analysis, MultiLevel, Naive, Options, Program, Var};

type Outcome = Result<String, String>;

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn oracle(op: OpKind, a: &BTreeSet<u8>, b: &BTreeSet<u8>) -> BTreeSet<u8> {
    match op {
        OpKind::Union => a | b,
        OpKind::Intersection => a & b,
        OpKind::Difference => a - b,
    }
}

fn subset_of_mask(mask: u32, width: u8) -> BTreeSet<u8> {
    (0..width).filter(|b| mask & (1 << b) != 0).collect()
}

// 1
fn demo_basic() -> Outcome {
    let mut dag = demo::fresh(DemoKind::Basic);
    let v = demo::report(DemoKind::Basic, &mut dag).map_err(|e| e.to_string())?;
    let node = &v["state"][0];
    let want_storage = json!([[], ["a", "b", "c"], ["a", "b", "d"], ["a", "b", "c", "d"]]);
    ensure(node["storage"] == want_storage, || format!("storage {}", node["storage"]))?;
    ensure(node["memo"]["union"] == json!([[1, 2, 3]]), || format!("union memo {}", node["memo"]["union"]))?;
    ensure(
        node["memo"]["intersection"] == json!([]) && node["memo"]["difference"] == json!([]),
        || "unexpected intersection or difference memo".into(),
    )?;
    ensure(node["subset"] == json!([[1, 3, true], [2, 3, true]]), || format!("subset {}", node["subset"]))?;
    Ok("storage, union memo and subset relations exact".into())
}

// 2
fn demo_nested() -> Outcome {
    let mut dag = demo::fresh(DemoKind::Nested);
    let v = demo::report(DemoKind::Nested, &mut dag).map_err(|e| e.to_string())?;
    let (child, parent) = (&v["state"][0], &v["state"][1]);
    ensure(child["storage"][4] == json!(["s", "t", "u"]), || format!("child 4 = {}", child["storage"][4]))?;
    ensure(child["storage"].as_array().map(Vec::len) == Some(5), || "child has extra sets".into())?;
    ensure(v["result"] == 3, || format!("result index {}", v["result"]))?;
    let result = &parent["storage"][3];
    ensure(*result == json!({"a": 1, "b": 4, "c": 1}), || format!("parent 3 = {result}"))?;
    ensure(result["a"] == result["c"], || "a and c do not share a child index".into())?;
    Ok("child 4 = {s,t,u}, parent 3 = {a->1, b->4, c->1}".into())
}

// 3
fn flat_exhaustive() -> Outcome {
    const WIDTH: u8 = 5;
    let mut e = FlatEngine::<u8>::new("sweep");
    let mut idx = Vec::new();
    for mask in 0..1u32 << WIDTH {
        idx.push(e.register_from_items(subset_of_mask(mask, WIDTH)).map_err(|x| x.to_string())?);
    }
    let mut cases = 0u64;
    for a in 0..1u32 << WIDTH {
        let sa = subset_of_mask(a, WIDTH);
        for p in 0..WIDTH {
            cases += 1;
            let got = e.contains(idx[a as usize], &p).map_err(|x| x.to_string())?;
            ensure(got == sa.contains(&p), || format!("contains({sa:?}, {p})"))?;
        }
        for b in 0..1u32 << WIDTH {
            let sb = subset_of_mask(b, WIDTH);
            for op in OpKind::ALL {
                cases += 1;
                let r = e.operate(op, idx[a as usize], idx[b as usize]).map_err(|x| x.to_string())?;
                let got: BTreeSet<u8> = e.resolve(r).map_err(|x| x.to_string())?.iter().copied().collect();
                let want = oracle(op, &sa, &sb);
                ensure(got == want, || format!("{}({sa:?}, {sb:?}) = {got:?}", op.name()))?;
                ensure(r == idx[(a | b) as usize] || op != OpKind::Union, || "union result not canonical".into())?;
            }
            cases += 1;
            let got = e.is_subset(idx[a as usize], idx[b as usize]).map_err(|x| x.to_string())?;
            ensure(got == sa.is_subset(&sb), || format!("is_subset({sa:?}, {sb:?}) = {got}"))?;
        }
    }
    Ok(format!("{cases} cases over all subsets of a 5-element universe"))
}

struct Maps {
    dag: Dag<u8>,
    child: NodeId,
    parent: NodeId,
}

impl Maps {
    fn new() -> Self {
        let mut dag = Dag::new();
        let child = dag.add_flat("pointees").unwrap();
        let parent = dag.add_nested("points_to", &[child]).unwrap();
        Maps { dag, child, parent }
    }

    fn register(&mut self, pairs: &BTreeSet<(u8, u8)>) -> Result<SetIndex, String> {
        let mut by_key: BTreeMap<u8, Vec<u8>> = BTreeMap::new();
        for &(k, p) in pairs {
            by_key.entry(k).or_default().push(p);
        }
        let mut elems = Vec::new();
        for (k, ps) in by_key {
            let c = self.dag.flat_mut(self.child).and_then(|e| e.register_from_items(ps)).map_err(|e| e.to_string())?;
            elems.push(NestedElement::single(k, c));
        }
        self.dag
            .nested_mut(self.parent)
            .and_then(|e| e.register(elems))
            .map(|r| r.0)
            .map_err(|e| e.to_string())
    }

    fn flatten(&self, idx: SetIndex) -> Result<BTreeSet<(u8, u8)>, String> {
        Ok(self.dag.flatten(self.parent, idx).map_err(|e| e.to_string())?.into_iter().collect())
    }
}

fn pair_oracle(op: OpKind, a: &BTreeSet<(u8, u8)>, b: &BTreeSet<(u8, u8)>) -> BTreeSet<(u8, u8)> {
    match op {
        OpKind::Union => a | b,
        OpKind::Intersection => a & b,
        OpKind::Difference => a - b,
    }
}

fn random_pairs(rng: &mut ChaCha8Rng, keys: u8, pointees: u8) -> BTreeSet<(u8, u8)> {
    let density = rng.random_range(0.05..0.6);
    let mut out = BTreeSet::new();
    for k in 0..keys {
        for p in 0..pointees {
            if rng.random_bool(density) {
                out.insert((k, p));
            }
        }
    }
    out
}

// 4
fn nested_flattening() -> Outcome {
    let mut m = Maps::new();
    let all: Vec<BTreeSet<(u8, u8)>> = (0u32..512)
        .map(|mask| (0..9u8).filter(|b| mask & (1 << b) != 0).map(|b| (b / 3, b % 3)).collect())
        .collect();
    let mut idx = Vec::with_capacity(all.len());
    for pairs in &all {
        idx.push(m.register(pairs)?);
    }
    let by_content: BTreeMap<&BTreeSet<(u8, u8)>, SetIndex> = all.iter().zip(idx.iter().copied()).collect();
    let mut swept = 0u64;
    for a in 0..all.len() {
        for b in 0..all.len() {
            for op in OpKind::ALL {
                swept += 1;
                let r = m.dag.operate(m.parent, op, idx[a], idx[b]).map_err(|e| e.to_string())?;
                let want = pair_oracle(op, &all[a], &all[b]);
                // every 3x3 map is registered, so the canonical index is known
                ensure(by_content.get(&want) == Some(&r), || {
                    format!("{}({:?}, {:?}) gave {r:?}", op.name(), all[a], all[b])
                })?;
            }
        }
    }

    const TRIALS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x4e57);
    let mut m = Maps::new();
    let mut pool: Vec<(SetIndex, BTreeSet<(u8, u8)>)> = vec![(SetIndex::EMPTY, BTreeSet::new())];
    for t in 0..TRIALS {
        if t % 4 == 0 {
            let pairs = random_pairs(&mut rng, 8, 8);
            let i = m.register(&pairs)?;
            pool.push((i, pairs));
            continue;
        }
        let (ia, sa) = pool[rng.random_range(0..pool.len())].clone();
        let (ib, sb) = pool[rng.random_range(0..pool.len())].clone();
        let op = OpKind::ALL[rng.random_range(0..3)];
        let r = m.dag.operate(m.parent, op, ia, ib).map_err(|e| e.to_string())?;
        let want = pair_oracle(op, &sa, &sb);
        let got = m.flatten(r)?;
        ensure(got == want, || format!("trial {t}: {}({sa:?}, {sb:?}) flattened to {got:?}", op.name()))?;
        let sub = m.dag.is_subset(m.parent, ia, ib).map_err(|e| e.to_string())?;
        ensure(sub == sa.is_subset(&sb), || format!("trial {t}: is_subset = {sub}"))?;
        pool.push((r, want));
    }
    Ok(format!("{swept} swept 3x3 cases, {TRIALS} random 8x8 trials"))
}

fn merge_heap() -> Result<Program, String> {
    Program::parse(bundled::MERGE_HEAP).map_err(|e| e.to_string())
}

fn names(program: &Program, fact: &BTreeMap<Var, BTreeSet<Var>>) -> BTreeMap<String, BTreeSet<String>> {
    fact.iter()
        .map(|(k, v)| {
            (
                program.symbols.name(*k).to_string(),
                v.iter().map(|x| program.symbols.name(*x).to_string()).collect(),
            )
        })
        .collect()
}

fn expected_heap_map() -> BTreeMap<String, BTreeSet<String>> {
    let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    BTreeMap::from([
        ("b".to_string(), set(&["H0"])),
        ("c".to_string(), set(&["H0", "H1", "H2"])),
        ("d".to_string(), set(&["H0", "H1", "H2"])),
    ])
}

// 5
fn footprint_arithmetic() -> Outcome {
    let program = merge_heap()?;
    let a = analyze(&program, &mut MultiLevel::new(), Options::default()).map_err(|e| e.to_string())?;
    let facts: Vec<_> = (6..=9).map(|p| a.points_to.point(p).expect("9 statements")).collect();
    let r = footprint(facts);
    ensure(r.flat_per_point == vec![13; 4] && r.flat_total == 52, || {
        format!("flat {:?} total {}", r.flat_per_point, r.flat_total)
    })?;
    ensure(r.single_level_per_point == vec![6; 4] && r.single_level_total == 24, || {
        format!("single-level {:?} total {}", r.single_level_per_point, r.single_level_total)
    })?;
    ensure(r.multi_level_total == 4, || format!("multi-level total {}", r.multi_level_total))?;
    Ok("flat 13/point (52), single-level 6/point (24), multi-level 4".into())
}

// 6
fn memo_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut e = FlatEngine::<u8>::new("replay");
    let mut base = vec![SetIndex::EMPTY];
    for _ in 0..40 {
        let mask = rng.random_range(0..1u32 << 12);
        base.push(e.register_from_items(subset_of_mask(mask, 12)).map_err(|x| x.to_string())?);
    }
    let script: Vec<(OpKind, usize, usize)> = (0..2000)
        .map(|_| (OpKind::ALL[rng.random_range(0..3)], rng.random_range(0..10_000), rng.random_range(0..10_000)))
        .collect();
    let run = |e: &mut FlatEngine<u8>| -> Result<Vec<SetIndex>, String> {
        let mut pool = base.clone();
        let mut trace = Vec::new();
        for &(op, a, b) in &script {
            let r = e.operate(op, pool[a % pool.len()], pool[b % pool.len()]).map_err(|x| x.to_string())?;
            pool.push(r);
            trace.push(r);
        }
        Ok(trace)
    };
    let first = run(&mut e)?;
    let before = e.metrics().clone();
    let second = run(&mut e)?;
    let moved = e.metrics().since(&before);
    ensure(first == second, || "replayed trace differs".into())?;
    ensure(moved.merge_executions() == 0, || format!("{} merges on replay", moved.merge_executions()))?;

    let mut d = demo::fresh(DemoKind::Nested);
    demo::report(DemoKind::Nested, &mut d).map_err(|x| x.to_string())?;
    let again = demo::report(DemoKind::Nested, &mut d).map_err(|x| x.to_string())?;
    ensure(again["merge_executions"] == 0, || "nested demo rerun merged".into())?;

    let report = bench::repeated_union(100);
    let ratio = report.row("repeat", OpKind::Union).and_then(|r| r.hit_ratio);
    ensure(ratio == Some(99.0 / 100.0), || format!("forced ratio {ratio:?}"))?;
    Ok(format!("{} replayed ops, 0 merges on replay, forced ratio 99/100", script.len()))
}

fn partition_rows(metrics: &Value) -> Result<u64, String> {
    let mut rows = 0;
    for (engine, ops) in metrics.as_object().ok_or("metrics not an object")? {
        for (op, row) in ops.as_object().ok_or("ops not an object")? {
            let n = |k: &str| row[k].as_u64().unwrap_or(u64::MAX);
            let total = ["hits", "equal_hits", "subset_hits", "empty_hits", "cold_misses", "edge_misses"]
                .iter()
                .map(|k| n(k))
                .try_fold(0u64, |a, b| a.checked_add(b))
                .ok_or_else(|| format!("{engine} {op}: missing counter"))?;
            if let Some(r) = row["hit_ratio"].as_f64() {
                let hits = n("hits") + n("equal_hits") + n("subset_hits") + n("empty_hits");
                ensure((r - hits as f64 / total as f64).abs() < 1e-12, || format!("{engine} {op}: ratio {r}"))?;
            }
            rows += 1;
        }
    }
    Ok(rows)
}

// 7
fn metrics_partition() -> Outcome {
    // counted queries against the six classes, per operation
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut e = FlatEngine::<u8>::new("counted");
    let mut pool = vec![SetIndex::EMPTY];
    let mut issued = [0u64; 3];
    for _ in 0..5000 {
        if rng.random_bool(0.2) {
            let mask = rng.random_range(0..1u32 << 10);
            pool.push(e.register_from_items(subset_of_mask(mask, 10)).map_err(|x| x.to_string())?);
            continue;
        }
        let k = rng.random_range(0..3);
        issued[k] += 1;
        let r = e
            .operate(OpKind::ALL[k], pool[rng.random_range(0..pool.len())], pool[rng.random_range(0..pool.len())])
            .map_err(|x| x.to_string())?;
        pool.push(r);
    }
    for (k, op) in OpKind::ALL.into_iter().enumerate() {
        let c = e.metrics().get(op);
        let sum = c.hits + c.equal_hits + c.subset_hits + c.empty_hits + c.cold_misses + c.edge_misses;
        ensure(sum == issued[k], || format!("{}: classes sum to {sum}, issued {}", op.name(), issued[k]))?;
        ensure(c.merge_executions == c.cold_misses + c.edge_misses, || format!("{}: merges != misses", op.name()))?;
    }

    let report = verify(&VerifyConfig::default());
    ensure(report.passed, || "verify failed".into())?;
    let mut rows = 0;
    for c in &report.checks {
        rows += partition_rows(&c.metrics.to_json())?;
    }
    let b = bench::bench(&BenchConfig {
        timing: false,
        ..BenchConfig::default()
    })
    .map_err(|x| x.to_string())?;
    ensure(b["checks"]["partition_holds"] == true, || "bench partition".into())?;
    for row in b["backends"].as_array().into_iter().flatten() {
        if !row["metrics"].is_null() {
            rows += partition_rows(&row["metrics"])?;
        }
    }
    Ok(format!("counted script exact; {rows} report rows consistent"))
}

// 8
fn subset_soundness() -> Outcome {
    const OPS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut e = FlatEngine::<u8>::new("fuzz");
    let mut pool = vec![SetIndex::EMPTY];
    for _ in 0..OPS {
        if rng.random_bool(0.15) {
            let mask = rng.random_range(0..1u32 << 12);
            pool.push(e.register_from_items(subset_of_mask(mask, 12)).map_err(|x| x.to_string())?);
            continue;
        }
        let (a, b) = (pool[rng.random_range(0..pool.len())], pool[rng.random_range(0..pool.len())]);
        if rng.random_bool(0.1) {
            e.is_subset(a, b).map_err(|x| x.to_string())?;
        } else {
            pool.push(e.operate(OpKind::ALL[rng.random_range(0..3)], a, b).map_err(|x| x.to_string())?);
        }
    }
    let content = |i: SetIndex| -> BTreeSet<u8> { e.resolve(i).unwrap_or(&[]).iter().copied().collect() };
    let mut checked = 0;
    for (&(a, b), &flag) in e.subset_relations() {
        checked += 1;
        let truth = content(a).is_subset(&content(b));
        ensure(flag == truth, || format!("entry ({a:?}, {b:?}) -> {flag}, contents say {truth}"))?;
    }
    ensure(checked > 0, || "no subset entries recorded".into())?;

    let mut m = Maps::new();
    let mut pool = vec![SetIndex::EMPTY];
    for _ in 0..OPS {
        if rng.random_bool(0.15) {
            let pairs = random_pairs(&mut rng, 8, 8);
            pool.push(m.register(&pairs)?);
            continue;
        }
        let (a, b) = (pool[rng.random_range(0..pool.len())], pool[rng.random_range(0..pool.len())]);
        pool.push(m.dag.operate(m.parent, OpKind::ALL[rng.random_range(0..3)], a, b).map_err(|x| x.to_string())?);
    }
    let entries: Vec<((SetIndex, SetIndex), bool)> =
        m.dag.nested(m.parent).unwrap().subset_relations().iter().map(|(k, v)| (*k, *v)).collect();
    for ((a, b), flag) in entries {
        checked += 1;
        let truth = m.flatten(a)?.is_subset(&m.flatten(b)?);
        ensure(flag == truth, || format!("nested entry ({a:?}, {b:?}) -> {flag}"))?;
    }
    let child = m.dag.flat(m.child).unwrap();
    for (&(a, b), &flag) in child.subset_relations() {
        checked += 1;
        let (sa, sb) = (child.resolve(a).unwrap(), child.resolve(b).unwrap());
        ensure(flag == sa.iter().all(|x| sb.contains(x)), || format!("child entry ({a:?}, {b:?})"))?;
    }
    Ok(format!("{checked} entries checked after flat and nested 10,000-op runs"))
}

fn facts_agree(program: &Program, a: &Analysis, b: &Analysis) -> Result<(), String> {
    for n in 0..program.stmt_count() {
        let pair = |x: &Analysis| {
            (
                names(program, &x.points_to.stmt_in[n]),
                names(program, &x.points_to.stmt_out[n]),
                x.liveness.stmt_in[n].clone(),
                x.liveness.stmt_out[n].clone(),
            )
        };
        ensure(pair(a) == pair(b), || format!("statement {} differs", n + 1))?;
    }
    ensure(a.points_to.block_out == b.points_to.block_out, || "block facts differ".into())?;
    ensure(a.liveness.block_in == b.liveness.block_in, || "block liveness differs".into())
}

// 9
fn backend_equivalence() -> Outcome {
    const PROGRAMS: u64 = 200;
    let run = |p: &Program| -> Result<(Analysis, Analysis), String> {
        let naive = analyze(p, &mut Naive::new(), Options::default()).map_err(|e| e.to_string())?;
        let multi = analyze(p, &mut MultiLevel::new(), Options::default()).map_err(|e| e.to_string())?;
        Ok((naive, multi))
    };
    let heap = merge_heap()?;
    let (naive, multi) = run(&heap)?;
    facts_agree(&heap, &naive, &multi)?;
    for p in 6..=9 {
        let got = names(&heap, multi.points_to.point(p).expect("9 statements"));
        ensure(got == expected_heap_map(), || format!("point {p}: {got:?}"))?;
    }
    for seed in 0..PROGRAMS {
        let p = mde_pta::generate::random_program_from_seed(seed, 10, 6);
        ensure(p.blocks.len() <= 10 && p.symbols.len() - p.symbols.heap_sites().count() <= 6, || {
            format!("program {seed} exceeds 10 blocks or 6 variables")
        })?;
        let (naive, multi) = run(&p)?;
        facts_agree(&p, &naive, &multi).map_err(|e| format!("program seed {seed}: {e}"))?;
    }
    Ok(format!("merge_heap plus {PROGRAMS} random programs identical"))
}

// 10
fn redundancy_capture() -> Outcome {
    let b = bench::bench(&BenchConfig {
        timing: false,
        ..BenchConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let row = |name: &str| {
        b["backends"]
            .as_array()
            .and_then(|rows| rows.iter().find(|r| r["backend"] == name))
            .cloned()
            .ok_or_else(|| format!("no {name} row"))
    };
    let (naive, multi) = (row("naive")?, row("multi-level")?);
    let n = |v: &Value, k: &str| v[k].as_u64().unwrap_or(u64::MAX);
    ensure(b["checks"]["results_agree"] == true, || "backends disagree".into())?;
    ensure(n(&multi, "merge_executions") <= n(&multi, "distinct_operand_pairs"), || {
        format!("{} merges > {} distinct pairs", multi["merge_executions"], multi["distinct_operand_pairs"])
    })?;
    ensure(n(&multi, "element_steps") < n(&naive, "element_steps"), || {
        format!("steps {} vs naive {}", multi["element_steps"], naive["element_steps"])
    })?;
    Ok(format!(
        "multi-level {} merges <= {} pairs; steps {} < naive {}",
        multi["merge_executions"], multi["distinct_operand_pairs"], multi["element_steps"], naive["element_steps"]
    ))
}

// 11
fn persistence() -> Outcome {
    let cfg = VerifyConfig {
        seed: 11,
        trials: 10_000,
        ..VerifyConfig::default()
    };
    let r = persistence_check(&cfg);
    ensure(r.passed, || r.counterexample.clone().unwrap_or_default())?;
    Ok(format!("{} scripts of 1000 replayed ops after restore; eviction rounds clean", r.cases))
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "basic demo final configuration", secs(1), demo_basic),
        (2, "nested demo final configuration", secs(1), demo_nested),
        (3, "flat operations match set oracle exhaustively", secs(10), flat_exhaustive),
        (4, "nested operations obey flattening", secs(60), nested_flattening),
        (5, "footprint arithmetic on merge_heap", secs(1), footprint_arithmetic),
        (6, "memo determinism and forced hit ratio", secs(1), memo_determinism),
        (7, "metrics partition", secs(120), metrics_partition),
        (8, "subset map soundness", secs(60), subset_soundness),
        (9, "analysis backend equivalence", secs(120), backend_equivalence),
        (10, "redundancy capture on loop benchmark", secs(60), redundancy_capture),
        (11, "persistence replay and eviction", secs(30), persistence),
    ];
    let mut failed = 0;
    for (n, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if took <= limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {took:.2?}, limit {limit:?}")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} criterion {n:>2}: {name} ({took:.2?}) {detail}");
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
