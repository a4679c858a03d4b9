//! Forward may-points-to and backward liveness over a [`Program`].
//!
//! Both run a priority worklist: blocks are taken in reverse post-order for
//! the forward analysis and in post-order for the backward one, and a block
//! requeues its neighbours only when its outgoing fact changed. Change is
//! detected with the backend's equality, which is an index comparison for
//! the engine backends.

use std::collections::{BTreeMap, BTreeSet};

use crate::backend::{Backend, PointsTo};
use crate::error::PtaError;
use crate::program::{Program, Stmt, Var, VarKind};

#[derive(Copy, Clone, Debug, Default)]
pub struct Options {
    /// Check after every block visit that facts did not shrink.
    pub check_monotone: bool,
}

/// Facts of one analysis run, in backend form.
#[derive(Clone, Debug)]
pub struct Solution<F> {
    pub block_in: Vec<F>,
    pub block_out: Vec<F>,
    /// Fact before each statement, by global statement number.
    pub stmt_in: Vec<F>,
    /// Fact after each statement.
    pub stmt_out: Vec<F>,
    pub block_visits: usize,
}

/// Plain-form points-to solution.
pub type PointsToFacts = Solution<PointsTo>;
/// Plain-form liveness solution.
pub type LiveFacts = Solution<BTreeSet<Var>>;

impl<F> Solution<F> {
    fn new(program: &Program, bottom: F) -> Self
    where
        F: Clone,
    {
        let blocks = program.blocks.len();
        let stmts = program.stmt_count();
        Solution {
            block_in: vec![bottom.clone(); blocks],
            block_out: vec![bottom.clone(); blocks],
            stmt_in: vec![bottom.clone(); stmts],
            stmt_out: vec![bottom; stmts],
            block_visits: 0,
        }
    }

    /// Same layout with every fact converted.
    pub fn try_map<G, E>(&self, mut f: impl FnMut(&F) -> Result<G, E>) -> Result<Solution<G>, E> {
        let conv = |v: &Vec<F>, f: &mut dyn FnMut(&F) -> Result<G, E>| v.iter().map(f).collect::<Result<Vec<G>, E>>();
        Ok(Solution {
            block_in: conv(&self.block_in, &mut f)?,
            block_out: conv(&self.block_out, &mut f)?,
            stmt_in: conv(&self.stmt_in, &mut f)?,
            stmt_out: conv(&self.stmt_out, &mut f)?,
            block_visits: self.block_visits,
        })
    }

    /// Fact before numbered point `n`, counting statements from 1.
    pub fn point(&self, n: usize) -> Option<&F> {
        n.checked_sub(1).and_then(|i| self.stmt_in.get(i))
    }
}

/// Points-to effect of one statement.
///
/// A store through a pointer with exactly one non-heap target replaces that
/// target's pointees; with several targets, or a heap target, it adds to
/// each. A store through a pointer with no targets cannot complete, so the
/// fact after it is empty.
pub fn points_to_transfer<B: Backend>(
    program: &Program,
    b: &mut B,
    stmt: &Stmt,
    m: &B::Map,
) -> Result<B::Map, PtaError> {
    Ok(match *stmt {
        Stmt::AddressOf { dst, target: x } | Stmt::Alloc { dst, site: x } => {
            let s = b.set_of(&[x])?;
            b.bind(m, dst, &s)?
        }
        Stmt::Copy { dst, src } => {
            let s = b.pointees(m, src)?;
            b.bind(m, dst, &s)?
        }
        Stmt::Load { dst, src } => {
            let via = b.pointees(m, src)?;
            let mut acc = b.empty_set();
            for r in b.set_members(&via)? {
                let s = b.pointees(m, r)?;
                acc = b.set_union(&acc, &s)?;
            }
            b.bind(m, dst, &acc)?
        }
        Stmt::Store { dst, src } => {
            let targets = b.pointees(m, dst)?;
            let targets = b.set_members(&targets)?;
            let value = b.pointees(m, src)?;
            match targets.as_slice() {
                [] => b.empty_map(),
                [only] if program.symbols.kind(*only) == VarKind::Stack => b.bind(m, *only, &value)?,
                _ => {
                    let mut out = m.clone();
                    for t in targets {
                        let old = b.pointees(&out, t)?;
                        let grown = b.set_union(&old, &value)?;
                        out = b.bind(&out, t, &grown)?;
                    }
                    out
                }
            }
        }
        Stmt::Use(_) => m.clone(),
    })
}

/// Liveness effect of one statement, applied backwards.
pub fn liveness_transfer<B: Backend>(b: &mut B, stmt: &Stmt, out: &B::Set) -> Result<B::Set, PtaError> {
    let killed = match stmt.def() {
        Some(d) => {
            let d = b.set_of(&[d])?;
            b.set_difference(out, &d)?
        }
        None => out.clone(),
    };
    let used = b.set_of(&stmt.uses())?;
    Ok(b.set_union(&killed, &used)?)
}

fn join_maps<B: Backend>(b: &mut B, facts: &[B::Map], from: &[usize]) -> Result<B::Map, PtaError> {
    let mut acc = b.empty_map();
    for &p in from {
        acc = b.map_join(&acc, &facts[p])?;
    }
    Ok(acc)
}

fn join_sets<B: Backend>(b: &mut B, facts: &[B::Set], from: &[usize]) -> Result<B::Set, PtaError> {
    let mut acc = b.empty_set();
    for &s in from {
        acc = b.set_union(&acc, &facts[s])?;
    }
    Ok(acc)
}

/// Runs the block's statements forward from `input`, recording per-statement
/// facts when `record` is given.
fn run_block_forward<B: Backend>(
    program: &Program,
    b: &mut B,
    block: usize,
    input: &B::Map,
    mut record: Option<&mut Solution<B::Map>>,
) -> Result<B::Map, PtaError> {
    let blk = &program.blocks[block];
    let mut cur = input.clone();
    for (i, stmt) in blk.stmts.iter().enumerate() {
        let next = points_to_transfer(program, b, stmt, &cur)?;
        if let Some(sol) = record.as_deref_mut() {
            sol.stmt_in[blk.first_stmt + i] = cur.clone();
            sol.stmt_out[blk.first_stmt + i] = next.clone();
        }
        cur = next;
    }
    Ok(cur)
}

fn run_block_backward<B: Backend>(
    program: &Program,
    b: &mut B,
    block: usize,
    output: &B::Set,
    mut record: Option<&mut Solution<B::Set>>,
) -> Result<B::Set, PtaError> {
    let blk = &program.blocks[block];
    let mut cur = output.clone();
    for (i, stmt) in blk.stmts.iter().enumerate().rev() {
        let prev = liveness_transfer(b, stmt, &cur)?;
        if let Some(sol) = record.as_deref_mut() {
            sol.stmt_out[blk.first_stmt + i] = cur.clone();
            sol.stmt_in[blk.first_stmt + i] = prev.clone();
        }
        cur = prev;
    }
    Ok(cur)
}

/// Priority worklist over positions in a fixed block order.
struct Worklist {
    pending: BTreeSet<usize>,
    position: Vec<usize>,
    order: Vec<usize>,
}

impl Worklist {
    fn new(order: Vec<usize>, blocks: usize) -> Self {
        let mut position = vec![usize::MAX; blocks];
        for (i, &b) in order.iter().enumerate() {
            position[b] = i;
        }
        Worklist {
            pending: (0..order.len()).collect(),
            position,
            order,
        }
    }

    fn pop(&mut self) -> Option<usize> {
        self.pending.pop_first().map(|i| self.order[i])
    }

    fn push(&mut self, block: usize) {
        self.pending.insert(self.position[block]);
    }
}

pub fn points_to<B: Backend>(program: &Program, b: &mut B, opts: Options) -> Result<Solution<B::Map>, PtaError> {
    let bottom = b.empty_map();
    let mut sol = Solution::new(program, bottom);
    let mut work = Worklist::new(program.reverse_post_order(), program.blocks.len());
    while let Some(block) = work.pop() {
        sol.block_visits += 1;
        let input = join_maps(b, &sol.block_out, program.preds(block))?;
        let output = run_block_forward(program, b, block, &input, Some(&mut sol))?;
        if opts.check_monotone
            && !(b.map_leq(&sol.block_in[block], &input)? && b.map_leq(&sol.block_out[block], &output)?)
        {
            return Err(PtaError::NotMonotone {
                block: program.blocks[block].label.clone(),
            });
        }
        sol.block_in[block] = input;
        if !b.map_eq(&sol.block_out[block], &output) {
            sol.block_out[block] = output;
            for &s in &program.blocks[block].succs {
                work.push(s);
            }
        }
    }
    Ok(sol)
}

pub fn liveness<B: Backend>(program: &Program, b: &mut B, opts: Options) -> Result<Solution<B::Set>, PtaError> {
    let bottom = b.empty_set();
    let mut sol = Solution::new(program, bottom);
    let mut work = Worklist::new(program.post_order(), program.blocks.len());
    while let Some(block) = work.pop() {
        sol.block_visits += 1;
        let output = join_sets(b, &sol.block_in, &program.blocks[block].succs)?;
        let input = run_block_backward(program, b, block, &output, Some(&mut sol))?;
        if opts.check_monotone {
            let grew = |b: &mut B, old: &B::Set, new: &B::Set| -> Result<bool, PtaError> {
                let joined = b.set_union(old, new)?;
                Ok(b.set_eq(&joined, new))
            };
            if !(grew(b, &sol.block_out[block], &output)? && grew(b, &sol.block_in[block], &input)?) {
                return Err(PtaError::NotMonotone {
                    block: program.blocks[block].label.clone(),
                });
            }
        }
        sol.block_out[block] = output;
        if !b.set_eq(&sol.block_in[block], &input) {
            sol.block_in[block] = input;
            for &p in program.preds(block) {
                work.push(p);
            }
        }
    }
    Ok(sol)
}

/// One more round of every transfer reproduces the solution.
pub fn points_to_is_fixed<B: Backend>(program: &Program, b: &mut B, sol: &Solution<B::Map>) -> Result<bool, PtaError> {
    for block in 0..program.blocks.len() {
        let input = join_maps(b, &sol.block_out, program.preds(block))?;
        let mut again = Solution::new(program, b.empty_map());
        let output = run_block_forward(program, b, block, &input, Some(&mut again))?;
        let blk = &program.blocks[block];
        let range = blk.first_stmt..blk.first_stmt + blk.stmts.len();
        let stmts_same = range.clone().all(|i| again.stmt_in[i] == sol.stmt_in[i] && again.stmt_out[i] == sol.stmt_out[i]);
        if input != sol.block_in[block] || output != sol.block_out[block] || !stmts_same {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn liveness_is_fixed<B: Backend>(program: &Program, b: &mut B, sol: &Solution<B::Set>) -> Result<bool, PtaError> {
    for block in 0..program.blocks.len() {
        let output = join_sets(b, &sol.block_in, &program.blocks[block].succs)?;
        let mut again = Solution::new(program, b.empty_set());
        let input = run_block_backward(program, b, block, &output, Some(&mut again))?;
        let blk = &program.blocks[block];
        let range = blk.first_stmt..blk.first_stmt + blk.stmts.len();
        let stmts_same = range.clone().all(|i| again.stmt_in[i] == sol.stmt_in[i] && again.stmt_out[i] == sol.stmt_out[i]);
        if input != sol.block_in[block] || output != sol.block_out[block] || !stmts_same {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Points-to and liveness of one program on one backend, in plain form.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub points_to: PointsToFacts,
    pub liveness: LiveFacts,
}

pub fn analyze<B: Backend>(program: &Program, b: &mut B, opts: Options) -> Result<Analysis, PtaError> {
    let pt = points_to(program, b, opts)?;
    let live = liveness(program, b, opts)?;
    let points_to = pt.try_map(|m| b.flatten(m))?;
    let liveness = live.try_map(|s| b.set_members(s).map(|v| v.into_iter().collect::<BTreeSet<Var>>()))?;
    Ok(Analysis { points_to, liveness })
}

/// Renders a points-to fact with variable names.
pub fn named_points_to(program: &Program, facts: &PointsTo) -> BTreeMap<String, Vec<String>> {
    let name = |v: &Var| program.symbols.name(*v).to_string();
    facts
        .iter()
        .map(|(k, s)| (name(k), s.iter().map(name).collect()))
        .collect()
}

pub fn named_vars(program: &Program, vars: &BTreeSet<Var>) -> Vec<String> {
    vars.iter().map(|v| program.symbols.name(*v).to_string()).collect()
}
