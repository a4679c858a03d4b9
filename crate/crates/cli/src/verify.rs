//! Randomized and exhaustive checks of engines and analyses against plain
//! set oracles.
//!
//! Each check runs seeded scripts. A failing script is shrunk by deleting
//! steps while it still fails, and the shrunk script is reported.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mde::persist::{from_json, to_json};
use mde::{Dag, Engine, EngineConfig, EngineMetrics, FlatEngine, MetricsReport, NestedElement, Node, OpKind, SetIndex, Shape};
use mde_pta::generate::random_program_from_seed;
use mde_pta::{analyze, Analysis, MultiLevel, Naive, Options, Program, SingleLevel};

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Random operations for each of the flat and nested fuzzers.
    pub trials: usize,
    /// Random programs for the analysis comparison.
    pub programs: usize,
    pub engine: EngineConfig,
    /// Also sweep every pair of maps over 3 keys and 3 pointees.
    pub nested_sweep: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            trials: 10_000,
            programs: 200,
            engine: EngineConfig::default(),
            nested_sweep: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub cases: u64,
    pub passed: bool,
    /// Subset-table entries checked against contents.
    pub subset_entries_checked: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub subset_shortcuts: bool,
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

pub fn verify(cfg: &VerifyConfig) -> VerifyReport {
    let mut checks = vec![flat_sweep(cfg), flat_fuzz(cfg), nested_fuzz(cfg)];
    if cfg.nested_sweep {
        checks.push(nested_sweep(cfg));
    }
    checks.push(persistence_check(cfg));
    checks.push(analysis_check(cfg));
    VerifyReport {
        seed: cfg.seed,
        trials: cfg.trials,
        subset_shortcuts: cfg.engine.subset_shortcuts,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

/// Harness-side count of top-level queries per operation.
#[derive(Default, Clone, Copy)]
struct Issued([u64; 3]);

impl Issued {
    fn add(&mut self, op: OpKind) {
        self.0[op as usize] += 1;
    }
}

/// Counter partition: the six classes add up to the issued queries (when
/// known) and every miss ran the kernel exactly once.
fn check_partition(name: &str, m: &EngineMetrics, issued: Option<Issued>) -> Result<(), String> {
    for (op, c) in m.iter() {
        if c.merge_executions != c.misses() {
            return Err(format!(
                "{name} {}: {} merges for {} misses",
                op.name(),
                c.merge_executions,
                c.misses()
            ));
        }
        if let Some(Issued(n)) = issued {
            if c.total_queries() != n[op as usize] {
                return Err(format!(
                    "{name} {}: counters total {} but {} queries issued",
                    op.name(),
                    c.total_queries(),
                    n[op as usize]
                ));
            }
        }
        if let Some(r) = c.hit_ratio() {
            if !(0.0..=1.0).contains(&r) {
                return Err(format!("{name} {}: hit ratio {r}", op.name()));
            }
        }
    }
    Ok(())
}

/// Every subset-table entry agrees with `contained`. Returns entries seen.
fn check_subset_table(
    table: impl Iterator<Item = ((SetIndex, SetIndex), bool)>,
    mut contained: impl FnMut(SetIndex, SetIndex) -> bool,
) -> Result<u64, String> {
    let mut n = 0;
    for ((a, b), a_in_b) in table {
        n += 1;
        let ok = if a_in_b { contained(a, b) } else { contained(b, a) };
        if !ok || a >= b {
            return Err(format!("subset entry ({a:?}, {b:?}) -> {a_in_b} is wrong"));
        }
    }
    Ok(n)
}

fn oracle_op<T: Ord + Clone>(op: OpKind, a: &BTreeSet<T>, b: &BTreeSet<T>) -> BTreeSet<T> {
    match op {
        OpKind::Union => a.union(b).cloned().collect(),
        OpKind::Intersection => a.intersection(b).cloned().collect(),
        OpKind::Difference => a.difference(b).cloned().collect(),
    }
}

/// Deletes steps while `fails` keeps holding, halving the chunk size down
/// to single steps.
pub fn shrink<S: Clone>(mut steps: Vec<S>, fails: impl Fn(&[S]) -> bool) -> Vec<S> {
    let mut chunk = steps.len().div_ceil(2).max(1);
    loop {
        let mut start = 0;
        let mut removed = false;
        while start < steps.len() {
            let end = (start + chunk).min(steps.len());
            let mut candidate = steps[..start].to_vec();
            candidate.extend_from_slice(&steps[end..]);
            if fails(&candidate) {
                steps = candidate;
                removed = true;
            } else {
                start = end;
            }
        }
        if chunk == 1 && !removed {
            return steps;
        }
        if !removed {
            chunk = chunk.div_ceil(2);
        }
    }
}

fn render_script<S: Debug>(seed: u64, steps: &[S]) -> String {
    let mut out = format!("seed {seed}, {} steps\n", steps.len());
    for (i, s) in steps.iter().enumerate() {
        out += &format!("{i:>4}: {s:?}\n");
    }
    out
}

// ---------------------------------------------------------------- flat

/// Step of a flat script. Operand positions index the pool of sets built so
/// far, wrapping around, so any subsequence of a script is itself valid.
#[derive(Clone, Debug)]
pub enum FlatStep {
    Register(Vec<u8>),
    Op(OpKind, usize, usize),
    Subset(usize, usize),
    Contains(usize, u8),
    Insert(usize, u8),
    Remove(usize, u8),
}

fn random_flat_step(rng: &mut ChaCha8Rng, universe: u8) -> FlatStep {
    let pos = |rng: &mut ChaCha8Rng| rng.random_range(0..10_000usize);
    match rng.random_range(0..12) {
        0..=2 => {
            let density = rng.random_range(0.1..0.9);
            FlatStep::Register((0..universe).filter(|_| rng.random_bool(density)).collect())
        }
        3..=7 => FlatStep::Op(OpKind::ALL[rng.random_range(0..3)], pos(rng), pos(rng)),
        8 => FlatStep::Subset(pos(rng), pos(rng)),
        9 => FlatStep::Contains(pos(rng), rng.random_range(0..universe)),
        10 => FlatStep::Insert(pos(rng), rng.random_range(0..universe)),
        _ => FlatStep::Remove(pos(rng), rng.random_range(0..universe)),
    }
}

struct FlatRun {
    metrics: EngineMetrics,
    subset_entries: u64,
}

fn run_flat_script(steps: &[FlatStep], config: &EngineConfig) -> Result<FlatRun, String> {
    let mut e = FlatEngine::<u8>::new("flat");
    *e.config_mut() = config.clone();
    let mut pool: Vec<(SetIndex, BTreeSet<u8>)> = vec![(SetIndex::EMPTY, BTreeSet::new())];
    let mut canon: HashMap<BTreeSet<u8>, SetIndex> = HashMap::from([(BTreeSet::new(), SetIndex::EMPTY)]);
    let mut issued = Issued::default();
    let fail = |i: usize, what: String| Err(format!("step {i}: {what}"));
    for (i, step) in steps.iter().enumerate() {
        let at = |p: usize| pool[p % pool.len()].clone();
        let produced = match step {
            FlatStep::Register(items) => {
                let idx = e.register(items.clone()).map_err(|x| x.to_string())?.0;
                Some((idx, items.iter().copied().collect::<BTreeSet<u8>>()))
            }
            FlatStep::Op(op, a, b) => {
                let ((ia, sa), (ib, sb)) = (at(*a), at(*b));
                issued.add(*op);
                let r = e.operate(*op, ia, ib).map_err(|x| x.to_string())?;
                Some((r, oracle_op(*op, &sa, &sb)))
            }
            FlatStep::Insert(a, x) => {
                let (ia, mut sa) = at(*a);
                issued.add(OpKind::Union);
                let r = e.insert_single(ia, *x).map_err(|x| x.to_string())?;
                sa.insert(*x);
                Some((r, sa))
            }
            FlatStep::Remove(a, x) => {
                let (ia, mut sa) = at(*a);
                issued.add(OpKind::Difference);
                let r = e.remove_single(ia, *x).map_err(|x| x.to_string())?;
                sa.remove(x);
                Some((r, sa))
            }
            FlatStep::Subset(a, b) => {
                let ((ia, sa), (ib, sb)) = (at(*a), at(*b));
                let got = e.is_subset(ia, ib).map_err(|x| x.to_string())?;
                if got != sa.is_subset(&sb) {
                    return fail(i, format!("is_subset({ia:?}, {ib:?}) = {got}"));
                }
                None
            }
            FlatStep::Contains(a, x) => {
                let (ia, sa) = at(*a);
                let got = e.contains(ia, x).map_err(|x| x.to_string())?;
                if got != sa.contains(x) {
                    return fail(i, format!("contains({ia:?}, {x}) = {got}"));
                }
                None
            }
        };
        if let Some((idx, want)) = produced {
            let got: BTreeSet<u8> = e.resolve(idx).map_err(|x| x.to_string())?.iter().copied().collect();
            if got != want {
                return fail(i, format!("{step:?} gave {idx:?} = {got:?}, expected {want:?}"));
            }
            if let Some(prev) = canon.insert(want.clone(), idx) {
                if prev != idx {
                    return fail(i, format!("{want:?} has two indices {prev:?} and {idx:?}"));
                }
            }
            pool.push((idx, want));
        }
    }
    let subset_entries = check_subset_table(e.subset_relations().iter().map(|(k, v)| (*k, *v)), |a, b| {
        let (a, b) = (e.resolve(a).unwrap_or(&[]), e.resolve(b).unwrap_or(&[]));
        a.iter().all(|x| b.binary_search(x).is_ok())
    })?;
    check_partition("flat", e.metrics(), Some(issued))?;
    Ok(FlatRun {
        metrics: e.metrics().clone(),
        subset_entries,
    })
}

/// Every pair of subsets of a 5-element universe, every operation.
pub fn flat_sweep(cfg: &VerifyConfig) -> CheckReport {
    let mut e = FlatEngine::<u8>::new("flat");
    *e.config_mut() = cfg.engine.clone();
    let sets: Vec<BTreeSet<u8>> = (0u32..32).map(|m| (0..5u8).filter(|b| m & (1 << b) != 0).collect()).collect();
    let mut issued = Issued::default();
    let mut cases = 0;
    let result = (|| -> Result<u64, String> {
        let idx: Vec<SetIndex> = sets
            .iter()
            .map(|s| e.register(s.iter().copied().collect()).map(|r| r.0).map_err(|x| x.to_string()))
            .collect::<Result<_, _>>()?;
        for (i, sa) in sets.iter().enumerate() {
            for x in 0..6u8 {
                cases += 1;
                if e.contains(idx[i], &x).map_err(|x| x.to_string())? != sa.contains(&x) {
                    return Err(format!("contains({sa:?}, {x})"));
                }
            }
            for (j, sb) in sets.iter().enumerate() {
                for op in OpKind::ALL {
                    cases += 1;
                    issued.add(op);
                    let r = e.operate(op, idx[i], idx[j]).map_err(|x| x.to_string())?;
                    let got: BTreeSet<u8> = e.resolve(r).map_err(|x| x.to_string())?.iter().copied().collect();
                    if got != oracle_op(op, sa, sb) {
                        return Err(format!("{}({sa:?}, {sb:?}) = {got:?}", op.name()));
                    }
                }
                cases += 1;
                if e.is_subset(idx[i], idx[j]).map_err(|x| x.to_string())? != sa.is_subset(sb) {
                    return Err(format!("is_subset({sa:?}, {sb:?})"));
                }
            }
        }
        let n = check_subset_table(e.subset_relations().iter().map(|(k, v)| (*k, *v)), |a, b| {
            let (a, b) = (e.resolve(a).unwrap_or(&[]), e.resolve(b).unwrap_or(&[]));
            a.iter().all(|x| b.binary_search(x).is_ok())
        })?;
        // the universe is closed under every operation: nothing new appears
        if e.metrics().iter().any(|(_, c)| c.cold_misses > 0) {
            return Err("an operation produced a set outside the universe".into());
        }
        check_partition("flat", e.metrics(), Some(issued))?;
        Ok(n)
    })();
    let mut report = MetricsReport::new();
    report.add_engine("flat", e.metrics());
    finish("flat_sweep", cases, result, report)
}

fn finish(name: &str, cases: u64, result: Result<u64, String>, metrics: MetricsReport) -> CheckReport {
    let (passed, subset_entries_checked, counterexample) = match result {
        Ok(n) => (true, n, None),
        Err(e) => (false, 0, Some(e)),
    };
    CheckReport {
        name: name.to_string(),
        cases,
        passed,
        subset_entries_checked,
        counterexample,
        metrics,
    }
}

const SCRIPT_LEN: usize = 500;

fn script_seeds(seed: u64, salt: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    (0..count).map(|_| rng.random()).collect()
}

/// Random flat scripts over a 12-element universe.
pub fn flat_fuzz(cfg: &VerifyConfig) -> CheckReport {
    let scripts = cfg.trials.div_ceil(SCRIPT_LEN);
    let mut total = EngineMetrics::default();
    let mut entries = 0;
    let mut cases = 0;
    for (n, seed) in script_seeds(cfg.seed, 0xf1a7, scripts).into_iter().enumerate() {
        let len = SCRIPT_LEN.min(cfg.trials - n * SCRIPT_LEN);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps: Vec<FlatStep> = (0..len).map(|_| random_flat_step(&mut rng, 12)).collect();
        cases += len as u64;
        match run_flat_script(&steps, &cfg.engine) {
            Ok(run) => {
                total.absorb(&run.metrics);
                entries += run.subset_entries;
            }
            Err(_) => {
                let small = shrink(steps, |s| run_flat_script(s, &cfg.engine).is_err());
                let why = run_flat_script(&small, &cfg.engine).err().unwrap_or_default();
                return finish(
                    "flat_fuzz",
                    cases,
                    Err(format!("{why}\n{}", render_script(seed, &small))),
                    MetricsReport::new(),
                );
            }
        }
    }
    let mut report = MetricsReport::new();
    report.add_engine("flat", &total);
    finish("flat_fuzz", cases, Ok(entries), report)
}

// -------------------------------------------------------------- nested

type Pairs = BTreeSet<(u8, u8)>;

#[derive(Clone, Debug)]
pub enum NestedStep {
    Register(Vec<(u8, Vec<u8>)>),
    Op(OpKind, usize, usize),
    Subset(usize, usize),
    Insert(usize, u8, u8),
    Update(usize, u8, Vec<u8>),
}

fn random_nested_step(rng: &mut ChaCha8Rng, keys: u8, pointees: u8) -> NestedStep {
    let pos = |rng: &mut ChaCha8Rng| rng.random_range(0..10_000usize);
    let set = |rng: &mut ChaCha8Rng| -> Vec<u8> {
        let density = rng.random_range(0.1..0.8);
        (0..pointees).filter(|_| rng.random_bool(density)).collect()
    };
    match rng.random_range(0..12) {
        0..=2 => {
            let density = rng.random_range(0.2..0.9);
            let mut map = Vec::new();
            for k in 0..keys {
                if rng.random_bool(density) {
                    map.push((k, set(rng)));
                }
            }
            NestedStep::Register(map)
        }
        3..=8 => NestedStep::Op(OpKind::ALL[rng.random_range(0..3)], pos(rng), pos(rng)),
        9 => NestedStep::Subset(pos(rng), pos(rng)),
        10 => NestedStep::Insert(pos(rng), rng.random_range(0..keys), rng.random_range(0..pointees)),
        _ => NestedStep::Update(pos(rng), rng.random_range(0..keys), set(rng)),
    }
}

struct NestedFixture {
    dag: Dag<u8>,
    child: mde::NodeId,
    parent: mde::NodeId,
}

impl NestedFixture {
    fn new(config: &EngineConfig) -> Self {
        let mut dag = Dag::new();
        let child = dag.add_flat("pointees").expect("fresh dag");
        let parent = dag.add_nested("points_to", &[child]).expect("fresh dag");
        for id in [child, parent] {
            *dag.node_mut(id).expect("just added").config_mut() = config.clone();
        }
        NestedFixture { dag, child, parent }
    }

    fn pairs(&self, idx: SetIndex) -> Result<Pairs, String> {
        Ok(self.dag.flatten(self.parent, idx).map_err(|e| e.to_string())?.into_iter().collect())
    }

    fn register(&mut self, map: &[(u8, Vec<u8>)]) -> Result<SetIndex, String> {
        let mut elems = Vec::new();
        for (k, ps) in map {
            let c = self
                .dag
                .flat_mut(self.child)
                .and_then(|e| e.register_from_items(ps.clone()))
                .map_err(|e| e.to_string())?;
            elems.push(NestedElement::single(*k, c));
        }
        let parent = self.dag.nested_mut(self.parent).map_err(|e| e.to_string())?;
        Ok(parent.register(elems).map_err(|e| e.to_string())?.0)
    }

    /// Subset tables of both engines agree with contents.
    fn subset_tables(&self) -> Result<u64, String> {
        let child = self.dag.flat(self.child).map_err(|e| e.to_string())?;
        let mut n = check_subset_table(child.subset_relations().iter().map(|(k, v)| (*k, *v)), |a, b| {
            let (a, b) = (child.resolve(a).unwrap_or(&[]), child.resolve(b).unwrap_or(&[]));
            a.iter().all(|x| b.binary_search(x).is_ok())
        })?;
        let parent = self.dag.nested(self.parent).map_err(|e| e.to_string())?;
        n += check_subset_table(parent.subset_relations().iter().map(|(k, v)| (*k, *v)), |a, b| {
            match (self.pairs(a), self.pairs(b)) {
                (Ok(a), Ok(b)) => a.is_subset(&b),
                _ => false,
            }
        })?;
        Ok(n)
    }
}

fn run_nested_script(steps: &[NestedStep], config: &EngineConfig) -> Result<(Dag<u8>, u64), String> {
    let mut fx = NestedFixture::new(config);
    let mut pool: Vec<(SetIndex, Pairs)> = vec![(SetIndex::EMPTY, Pairs::new())];
    let mut canon: HashMap<Pairs, SetIndex> = HashMap::from([(Pairs::new(), SetIndex::EMPTY)]);
    let mut issued = Issued::default();
    let parent = fx.parent;
    for (i, step) in steps.iter().enumerate() {
        let at = |p: usize| pool[p % pool.len()].clone();
        let fail = |what: String| Err(format!("step {i}: {what}"));
        let produced = match step {
            NestedStep::Register(map) => {
                let idx = fx.register(map)?;
                let want: Pairs = map.iter().flat_map(|(k, ps)| ps.iter().map(move |p| (*k, *p))).collect();
                Some((idx, want))
            }
            NestedStep::Op(op, a, b) => {
                let ((ia, sa), (ib, sb)) = (at(*a), at(*b));
                issued.add(*op);
                let r = fx.dag.operate(parent, *op, ia, ib).map_err(|e| e.to_string())?;
                Some((r, oracle_op(*op, &sa, &sb)))
            }
            NestedStep::Insert(a, k, p) => {
                let (ia, mut sa) = at(*a);
                issued.add(OpKind::Union);
                let r = fx.dag.insert_pointee(parent, ia, *k, *p).map_err(|e| e.to_string())?;
                sa.insert((*k, *p));
                Some((r, sa))
            }
            NestedStep::Update(a, k, ps) => {
                let (ia, mut sa) = at(*a);
                let c = fx
                    .dag
                    .flat_mut(fx.child)
                    .and_then(|e| e.register_from_items(ps.clone()))
                    .map_err(|e| e.to_string())?;
                let r = fx.dag.update_pointees(parent, ia, *k, c).map_err(|e| e.to_string())?;
                sa.retain(|(key, _)| key != k);
                sa.extend(ps.iter().map(|p| (*k, *p)));
                Some((r, sa))
            }
            NestedStep::Subset(a, b) => {
                let ((ia, sa), (ib, sb)) = (at(*a), at(*b));
                let got = fx.dag.is_subset(parent, ia, ib).map_err(|e| e.to_string())?;
                if got != sa.is_subset(&sb) {
                    return fail(format!("is_subset({ia:?}, {ib:?}) = {got}"));
                }
                None
            }
        };
        if let Some((idx, want)) = produced {
            let got = fx.pairs(idx)?;
            if got != want {
                return fail(format!("{step:?} gave {idx:?} = {got:?}, expected {want:?}"));
            }
            if let Some(prev) = canon.insert(want.clone(), idx) {
                if prev != idx {
                    return fail(format!("{want:?} has two indices {prev:?} and {idx:?}"));
                }
            }
            pool.push((idx, want));
        }
    }
    let entries = fx.subset_tables()?;
    for (id, node) in fx.dag.nodes() {
        let issued = (id == parent).then_some(issued);
        check_partition(node.name(), node.metrics(), issued)?;
    }
    Ok((fx.dag, entries))
}

/// Random nested scripts over maps with up to 8 keys and 8 pointees.
pub fn nested_fuzz(cfg: &VerifyConfig) -> CheckReport {
    let scripts = cfg.trials.div_ceil(SCRIPT_LEN);
    let mut totals: [EngineMetrics; 2] = Default::default();
    let mut entries = 0;
    let mut cases = 0;
    for (n, seed) in script_seeds(cfg.seed, 0x2e57, scripts).into_iter().enumerate() {
        let len = SCRIPT_LEN.min(cfg.trials - n * SCRIPT_LEN);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps: Vec<NestedStep> = (0..len).map(|_| random_nested_step(&mut rng, 8, 8)).collect();
        cases += len as u64;
        match run_nested_script(&steps, &cfg.engine) {
            Ok((dag, e)) => {
                entries += e;
                for (i, (_, node)) in dag.nodes().enumerate() {
                    totals[i].absorb(node.metrics());
                }
            }
            Err(_) => {
                let small = shrink(steps, |s| run_nested_script(s, &cfg.engine).is_err());
                let why = run_nested_script(&small, &cfg.engine).err().unwrap_or_default();
                return finish(
                    "nested_fuzz",
                    cases,
                    Err(format!("{why}\n{}", render_script(seed, &small))),
                    MetricsReport::new(),
                );
            }
        }
    }
    let mut report = MetricsReport::new();
    report.add_engine("pointees", &totals[0]);
    report.add_engine("points_to", &totals[1]);
    finish("nested_fuzz", cases, Ok(entries), report)
}

/// Bit `3k + p` is the pair (k, p).
fn mask_pairs(mask: u16) -> Pairs {
    (0..9u8).filter(|b| mask & (1 << b) != 0).map(|b| (b / 3, b % 3)).collect()
}

/// Every pair of maps over keys {0,1,2} and pointees {0,1,2}, every
/// operation, checked through flattening.
pub fn nested_sweep(cfg: &VerifyConfig) -> CheckReport {
    let mut fx = NestedFixture::new(&cfg.engine);
    let mut cases = 0;
    let result = (|| -> Result<u64, String> {
        let mut index_of_mask = Vec::with_capacity(512);
        let mut mask_of_index: HashMap<SetIndex, u16> = HashMap::new();
        for mask in 0u16..512 {
            let map: Vec<(u8, Vec<u8>)> = (0..3u8)
                .filter_map(|k| {
                    let ps: Vec<u8> = (0..3u8).filter(|p| mask & (1 << (3 * k + p)) != 0).collect();
                    (!ps.is_empty()).then_some((k, ps))
                })
                .collect();
            let idx = fx.register(&map)?;
            if fx.pairs(idx)? != mask_pairs(mask) {
                return Err(format!("map {mask:#011b} does not flatten to itself"));
            }
            if mask_of_index.insert(idx, mask).is_some() {
                return Err(format!("two maps share index {idx:?}"));
            }
            index_of_mask.push(idx);
        }
        for a in 0u16..512 {
            for b in 0u16..512 {
                for op in OpKind::ALL {
                    cases += 1;
                    let r = fx
                        .dag
                        .operate(fx.parent, op, index_of_mask[a as usize], index_of_mask[b as usize])
                        .map_err(|e| e.to_string())?;
                    let want = match op {
                        OpKind::Union => a | b,
                        OpKind::Intersection => a & b,
                        OpKind::Difference => a & !b,
                    };
                    if mask_of_index.get(&r) != Some(&want) {
                        return Err(format!(
                            "{}({:?}, {:?}) gave {r:?}, expected {:?}",
                            op.name(),
                            mask_pairs(a),
                            mask_pairs(b),
                            mask_pairs(want)
                        ));
                    }
                }
            }
        }
        let n = fx.subset_tables()?;
        for (_, node) in fx.dag.nodes() {
            check_partition(node.name(), node.metrics(), None)?;
        }
        Ok(n)
    })();
    let report = fx.dag.metrics_report();
    finish("nested_sweep", cases, result, report)
}

// --------------------------------------------------------- persistence

/// Runs `steps` without oracles, returning produced indices and answers.
fn trace_nested(fx: &mut NestedFixture, pool: &mut Vec<SetIndex>, steps: &[NestedStep]) -> Result<Vec<u32>, String> {
    let parent = fx.parent;
    let mut trace = Vec::with_capacity(steps.len());
    for step in steps {
        let at = |p: usize| pool[p % pool.len()];
        let r = match step {
            NestedStep::Register(map) => fx.register(map)?,
            NestedStep::Op(op, a, b) => fx.dag.operate(parent, *op, at(*a), at(*b)).map_err(|e| e.to_string())?,
            NestedStep::Insert(a, k, p) => fx.dag.insert_pointee(parent, at(*a), *k, *p).map_err(|e| e.to_string())?,
            NestedStep::Update(a, k, ps) => {
                let c = fx
                    .dag
                    .flat_mut(fx.child)
                    .and_then(|e| e.register_from_items(ps.clone()))
                    .map_err(|e| e.to_string())?;
                fx.dag.update_pointees(parent, at(*a), *k, c).map_err(|e| e.to_string())?
            }
            NestedStep::Subset(a, b) => {
                let got = fx.dag.is_subset(parent, at(*a), at(*b)).map_err(|e| e.to_string())?;
                trace.push(u32::MAX - u32::from(got));
                continue;
            }
        };
        pool.push(r);
        trace.push(r.get());
    }
    Ok(trace)
}

fn node_metrics(dag: &Dag<u8>) -> Vec<EngineMetrics> {
    dag.nodes().map(|(_, n)| n.metrics().clone()).collect()
}

fn deltas(after: &[EngineMetrics], before: &[EngineMetrics]) -> Vec<EngineMetrics> {
    after.iter().zip(before).map(|(a, b)| a.since(b)).collect()
}

/// Memo and subset entries only name live sets.
fn dangling<S: Shape>(name: &str, e: &Engine<S>) -> Result<(), String> {
    let live = |i: SetIndex| e.resolve(i).is_ok();
    for op in OpKind::ALL {
        for (&(a, b), &r) in e.memo(op) {
            if !(live(a) && live(b) && live(r)) {
                return Err(format!("{name} {} memo ({a:?}, {b:?}) -> {r:?} names an evicted set", op.name()));
            }
        }
    }
    for &(a, b) in e.subset_relations().keys() {
        if !(live(a) && live(b)) {
            return Err(format!("{name} subset entry ({a:?}, {b:?}) names an evicted set"));
        }
    }
    Ok(())
}

/// A restored snapshot replays a script exactly like the engine it came
/// from, and eviction leaves nothing pointing at tombstones.
fn persistence_script(seed: u64, config: &EngineConfig) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prefix: Vec<NestedStep> = (0..PERSIST_PREFIX).map(|_| random_nested_step(&mut rng, 8, 8)).collect();
    let suffix: Vec<NestedStep> = (0..PERSIST_REPLAY).map(|_| random_nested_step(&mut rng, 8, 8)).collect();

    let mut original = NestedFixture::new(config);
    let mut pool = vec![SetIndex::EMPTY];
    trace_nested(&mut original, &mut pool, &prefix)?;
    let text = to_json(&original.dag);
    let dag: Dag<u8> = from_json(&text).map_err(|e| e.to_string())?;
    if to_json(&dag) != text {
        return Err("re-serializing a loaded snapshot changed it".into());
    }
    let mut restored = NestedFixture {
        child: dag.find("pointees").ok_or("restored dag lost `pointees`")?,
        parent: dag.find("points_to").ok_or("restored dag lost `points_to`")?,
        dag,
    };
    // settings are not part of a snapshot
    for id in [restored.child, restored.parent] {
        *restored.dag.node_mut(id).map_err(|e| e.to_string())?.config_mut() = config.clone();
    }
    let mut restored_pool = pool.clone();
    let (b0, b1) = (node_metrics(&original.dag), node_metrics(&restored.dag));
    if b0 != b1 {
        return Err("restored counters differ".into());
    }
    let t0 = trace_nested(&mut original, &mut pool, &suffix)?;
    let t1 = trace_nested(&mut restored, &mut restored_pool, &suffix)?;
    if let Some(i) = t0.iter().zip(&t1).position(|(a, b)| a != b) {
        return Err(format!("replay step {i}: original {} restored {}", t0[i], t1[i]));
    }
    if deltas(&node_metrics(&original.dag), &b0) != deltas(&node_metrics(&restored.dag), &b1) {
        return Err("counter movement differs after restore".into());
    }

    // evict some maps, then pointee sets no surviving map uses
    let fx = &mut original;
    for round in 0..EVICT_ROUNDS {
        let maps = fx.dag.nested(fx.parent).map_err(|e| e.to_string())?;
        let victims: Vec<SetIndex> = maps
            .store()
            .iter()
            .map(|(i, _)| i)
            .filter(|i| !i.is_empty_set() && rng.random_bool(0.3))
            .collect();
        fx.dag.evict(fx.parent, &victims).map_err(|e| e.to_string())?;
        let maps = fx.dag.nested(fx.parent).map_err(|e| e.to_string())?;
        let used: BTreeSet<SetIndex> = maps.store().iter().flat_map(|(_, es)| es.iter().map(|e| e.value())).collect();
        let sets = fx.dag.flat(fx.child).map_err(|e| e.to_string())?;
        let child_victims: Vec<SetIndex> = sets
            .store()
            .iter()
            .map(|(i, _)| i)
            .filter(|i| !i.is_empty_set() && !used.contains(i) && rng.random_bool(0.5))
            .collect();
        fx.dag.evict(fx.child, &child_victims).map_err(|e| e.to_string())?;
        if let Some(&v) = used.iter().find(|i| !i.is_empty_set()) {
            if fx.dag.evict(fx.child, &[v]).is_ok() {
                return Err(format!("round {round}: evicted pointee set {v:?} still in use"));
            }
        }
        let sets = fx.dag.flat(fx.child).map_err(|e| e.to_string())?;
        let maps = fx.dag.nested(fx.parent).map_err(|e| e.to_string())?;
        dangling("pointees", sets)?;
        dangling("points_to", maps)?;
        for (i, es) in maps.store().iter() {
            if let Some(e) = es.iter().find(|e| sets.resolve(e.value()).is_err()) {
                return Err(format!("round {round}: map {i:?} refers to evicted set {:?}", e.value()));
            }
        }
        pool.retain(|i| maps.resolve(*i).is_ok());
        let more: Vec<NestedStep> = (0..PERSIST_PREFIX).map(|_| random_nested_step(&mut rng, 8, 8)).collect();
        trace_nested(fx, &mut pool, &more)?;
    }
    let text = to_json(&fx.dag);
    let back: Dag<u8> = from_json(&text).map_err(|e| e.to_string())?;
    if to_json(&back) != text {
        return Err("snapshot after eviction does not round-trip".into());
    }
    Ok(())
}

const PERSIST_PREFIX: usize = 500;
const PERSIST_REPLAY: usize = 1000;
const EVICT_ROUNDS: usize = 5;

/// Snapshot replay fidelity and eviction integrity, one script per
/// thousand trials.
pub fn persistence_check(cfg: &VerifyConfig) -> CheckReport {
    let scripts = cfg.trials.div_ceil(PERSIST_REPLAY).max(1);
    let mut cases = 0;
    for seed in script_seeds(cfg.seed, 0x5a4e, scripts) {
        cases += 1;
        if let Err(why) = persistence_script(seed, &cfg.engine) {
            return finish(
                "persistence",
                cases,
                Err(format!("script seed {seed}: {why}")),
                MetricsReport::new(),
            );
        }
    }
    finish("persistence", cases, Ok(0), MetricsReport::new())
}

// ------------------------------------------------------------ analyses

const CHECKED: Options = Options { check_monotone: true };

fn compare_backends(program: &Program) -> Result<(), String> {
    let run = |which: &str| -> Result<Analysis, String> {
        let r = match which {
            "naive" => analyze(program, &mut Naive::new(), CHECKED),
            "single-level" => analyze(program, &mut SingleLevel::new(), CHECKED),
            _ => analyze(program, &mut MultiLevel::new(), CHECKED),
        };
        r.map_err(|e| format!("{which}: {e}"))
    };
    let naive = run("naive")?;
    for which in ["single-level", "multi-level"] {
        let other = run(which)?;
        for (n, (a, b)) in naive.points_to.stmt_in.iter().zip(&other.points_to.stmt_in).enumerate() {
            if a != b {
                return Err(format!("points-to before statement {} differs: naive {a:?}, {which} {b:?}", n + 1));
            }
        }
        for (n, (a, b)) in naive.liveness.stmt_in.iter().zip(&other.liveness.stmt_in).enumerate() {
            if a != b {
                return Err(format!("liveness before statement {} differs: naive {a:?}, {which} {b:?}", n + 1));
            }
        }
        if naive.points_to.block_out != other.points_to.block_out || naive.liveness.block_in != other.liveness.block_in {
            return Err(format!("block boundary facts differ on {which}"));
        }
    }
    Ok(())
}

/// Drops statement lines from a failing program while it keeps failing.
fn shrink_program(program: &Program) -> String {
    let lines: Vec<String> = program.to_string().lines().map(str::to_string).collect();
    let fails = |ls: &[String]| {
        let text = ls.join("\n") + "\n";
        Program::parse(&text).is_ok_and(|p| compare_backends(&p).is_err())
    };
    let is_stmt = |l: &String| l.starts_with("  ") && !l.trim_start().starts_with("goto");
    let mut kept = lines;
    let mut changed = true;
    while changed {
        changed = false;
        for i in (0..kept.len()).rev() {
            if !is_stmt(&kept[i]) {
                continue;
            }
            let mut candidate = kept.clone();
            candidate.remove(i);
            if fails(&candidate) {
                kept = candidate;
                changed = true;
            }
        }
    }
    kept.join("\n") + "\n"
}

/// Naive and both engine backends agree on random programs.
pub fn analysis_check(cfg: &VerifyConfig) -> CheckReport {
    let mut cases = 0;
    let mut multi = EngineMetrics::default();
    let mut sets = EngineMetrics::default();
    for seed in script_seeds(cfg.seed, 0xa11a, cfg.programs) {
        let program = random_program_from_seed(seed, 10, 6);
        cases += 1;
        if let Err(why) = compare_backends(&program) {
            let small = shrink_program(&program);
            return finish(
                "analysis",
                cases,
                Err(format!("program seed {seed}: {why}\n{small}")),
                MetricsReport::new(),
            );
        }
        let mut backend = MultiLevel::new();
        for id in [backend.pointee_node(), backend.map_node()] {
            *backend.dag_mut().node_mut(id).expect("wired").config_mut() = cfg.engine.clone();
        }
        if let Err(e) = analyze(&program, &mut backend, CHECKED) {
            return finish("analysis", cases, Err(e.to_string()), MetricsReport::new());
        }
        for (_, node) in backend.dag().nodes() {
            if let Err(e) = check_partition(node.name(), node.metrics(), None) {
                return finish("analysis", cases, Err(e), MetricsReport::new());
            }
            match node {
                Node::Flat(_) => sets.absorb(node.metrics()),
                Node::Nested { .. } => multi.absorb(node.metrics()),
            }
        }
    }
    let mut report = MetricsReport::new();
    report.add_engine("pointees", &sets);
    report.add_engine("points_to", &multi);
    finish("analysis", cases, Ok(0), report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrink_finds_the_single_bad_step() {
        let steps: Vec<u32> = (0..100).collect();
        let small = shrink(steps, |s| s.contains(&37));
        assert_eq!(small, vec![37]);
        let small = shrink((0..50).collect::<Vec<u32>>(), |s| s.contains(&3) && s.contains(&40));
        assert_eq!(small, vec![3, 40]);
    }

    #[test]
    fn small_verify_passes() {
        let cfg = VerifyConfig {
            trials: 600,
            programs: 10,
            nested_sweep: false,
            ..VerifyConfig::default()
        };
        let report = verify(&cfg);
        assert!(report.passed, "{:#?}", report.checks);
    }
}
