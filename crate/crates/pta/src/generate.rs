//! Seeded program generators.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`, so a seed names
//! the same program on every platform.

use std::fmt::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::program::Program;

fn random_stmt(rng: &mut impl Rng, vars: &[String]) -> String {
    let pick = |rng: &mut dyn rand::RngCore| vars.choose(rng).expect("at least one var").clone();
    let (p, q) = (pick(rng), pick(rng));
    match rng.random_range(0..10) {
        0 | 1 => format!("{p} = &{q}"),
        2 | 3 => format!("{p} = {q}"),
        4 => format!("{p} = *{q}"),
        5 => format!("*{p} = {q}"),
        6 | 7 => format!("{p} = new"),
        _ => format!("use {p}"),
    }
}

/// Random single-function program with up to `max_blocks` blocks and
/// `max_vars` variables. Every block is reachable; back edges make loops.
pub fn random_program(rng: &mut impl Rng, max_blocks: usize, max_vars: usize) -> Program {
    let vars: Vec<String> = (0..rng.random_range(1..=max_vars)).map(|i| format!("v{i}")).collect();
    let blocks = rng.random_range(1..=max_blocks);
    let mut text = format!("func random\nvar {}\n", vars.join(" "));
    for i in 0..blocks {
        writeln!(text, "block b{i}").expect("string write");
        for _ in 0..rng.random_range(0..=4) {
            writeln!(text, "  {}", random_stmt(rng, &vars)).expect("string write");
        }
        if i + 1 < blocks && rng.random_bool(0.4) {
            let other = rng.random_range(0..blocks);
            writeln!(text, "  goto b{} b{other}", i + 1).expect("string write");
        }
    }
    text.push_str("end\n");
    Program::parse(&text).expect("generated programs are well formed")
}

/// `random_program` from a seed.
pub fn random_program_from_seed(seed: u64, max_blocks: usize, max_vars: usize) -> Program {
    random_program(&mut ChaCha8Rng::seed_from_u64(seed), max_blocks, max_vars)
}

/// Shape of the loop-heavy benchmark program.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct LoopBench {
    pub seed: u64,
    /// Loops in sequence; each loop body is a two-way diamond.
    pub loops: usize,
    /// Statements on each arm of a diamond.
    pub arm_len: usize,
    /// Pointer variables. Fewer variables means more repeated facts.
    pub vars: usize,
    /// Allocation sites created up front.
    pub sites: usize,
}

impl Default for LoopBench {
    fn default() -> Self {
        LoopBench {
            seed: 0,
            loops: 16,
            arm_len: 5,
            vars: 6,
            sites: 4,
        }
    }
}

/// Statements in loop bodies only copy, load and store, so the set of
/// facts the analysis can synthesise is fixed by the prologue and the same
/// maps recur around every loop.
fn loop_stmt(rng: &mut impl Rng, vars: &[String]) -> String {
    let p = vars.choose(rng).expect("at least one var");
    let q = vars.choose(rng).expect("at least one var");
    match rng.random_range(0..6) {
        0..=2 => format!("{p} = {q}"),
        3 => format!("{p} = *{q}"),
        4 => format!("*{p} = {q}"),
        _ => format!("{p} = &{q}"),
    }
}

pub fn loop_bench(params: LoopBench) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let vars: Vec<String> = (0..params.vars.max(1)).map(|i| format!("v{i}")).collect();
    let mut text = format!("func loop_bench\nvar {}\nblock init\n", vars.join(" "));
    for i in 0..params.sites.max(1) {
        writeln!(text, "  {} = new", vars[i % vars.len()]).expect("string write");
    }
    for l in 0..params.loops {
        let exit = if l + 1 == params.loops { "done".to_string() } else { format!("head{}", l + 1) };
        writeln!(text, "block head{l}\n  goto left{l} right{l}").expect("string write");
        for arm in ["left", "right"] {
            writeln!(text, "block {arm}{l}").expect("string write");
            for _ in 0..params.arm_len {
                writeln!(text, "  {}", loop_stmt(&mut rng, &vars)).expect("string write");
            }
            writeln!(text, "  goto join{l}").expect("string write");
        }
        writeln!(text, "block join{l}\n  use {}\n  goto head{l} {exit}", vars[l % vars.len()]).expect("string write");
    }
    writeln!(text, "block done\n  use {}\nend", vars.join(" ")).expect("string write");
    Program::parse(&text).expect("generated programs are well formed")
}
