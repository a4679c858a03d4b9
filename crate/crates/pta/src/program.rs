//! Toy pointer programs: symbols, statements, control-flow graphs and the
//! line-based text format.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// An interned variable or heap site. Ordered by interning order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum VarKind {
    Stack,
    Heap,
}

fn is_heap_name(name: &str) -> bool {
    name.len() > 1 && name.starts_with('H') && name[1..].bytes().all(|b| b.is_ascii_digit())
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Name table. Heap sites are named `H0`, `H1`, ... in minting order.
#[derive(Clone, Debug, Default)]
pub struct Symbols {
    names: Vec<String>,
    kinds: Vec<VarKind>,
    by_name: HashMap<String, Var>,
    heap_sites: u32,
}

impl Symbols {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: String, kind: VarKind) -> Var {
        let var = Var(self.names.len() as u32);
        self.by_name.insert(name.clone(), var);
        self.names.push(name);
        self.kinds.push(kind);
        var
    }

    /// Declares a stack variable; `None` if the name is taken.
    pub fn declare(&mut self, name: &str) -> Option<Var> {
        if self.by_name.contains_key(name) {
            return None;
        }
        Some(self.push(name.to_string(), VarKind::Stack))
    }

    /// Mints the next heap site.
    pub fn mint_heap(&mut self) -> Var {
        loop {
            let name = format!("H{}", self.heap_sites);
            self.heap_sites += 1;
            if !self.by_name.contains_key(&name) {
                return self.push(name, VarKind::Heap);
            }
        }
    }

    /// Looks a name up, interning it if unknown. Used when reading stored
    /// state that may mention names this table has not seen.
    pub fn intern(&mut self, name: &str) -> Var {
        if let Some(&v) = self.by_name.get(name) {
            return v;
        }
        let kind = if is_heap_name(name) { VarKind::Heap } else { VarKind::Stack };
        self.push(name.to_string(), kind)
    }

    pub fn get(&self, name: &str) -> Option<Var> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, var: Var) -> &str {
        &self.names[var.index()]
    }

    pub fn kind(&self, var: Var) -> VarKind {
        self.kinds[var.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.names.len() as u32).map(Var)
    }

    pub fn heap_sites(&self) -> impl Iterator<Item = Var> + '_ {
        self.vars().filter(|v| self.kind(*v) == VarKind::Heap)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    /// `p = &x`
    AddressOf { dst: Var, target: Var },
    /// `p = q`
    Copy { dst: Var, src: Var },
    /// `p = *q`
    Load { dst: Var, src: Var },
    /// `*p = q`
    Store { dst: Var, src: Var },
    /// `p = new`
    Alloc { dst: Var, site: Var },
    /// `use x ...`
    Use(Vec<Var>),
}

impl Stmt {
    /// Variable whose value the statement overwrites.
    pub fn def(&self) -> Option<Var> {
        match *self {
            Stmt::AddressOf { dst, .. }
            | Stmt::Copy { dst, .. }
            | Stmt::Load { dst, .. }
            | Stmt::Alloc { dst, .. } => Some(dst),
            Stmt::Store { .. } | Stmt::Use(_) => None,
        }
    }

    /// Variables whose values the statement reads, sorted.
    pub fn uses(&self) -> Vec<Var> {
        let mut out = match self {
            Stmt::AddressOf { .. } | Stmt::Alloc { .. } => vec![],
            Stmt::Copy { src, .. } | Stmt::Load { src, .. } => vec![*src],
            Stmt::Store { dst, src } => vec![*dst, *src],
            Stmt::Use(vars) => vars.clone(),
        };
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Clone, Debug)]
pub struct Block {
    pub label: String,
    pub stmts: Vec<Stmt>,
    pub succs: Vec<usize>,
    /// Global number of the first statement, counting from zero.
    pub first_stmt: usize,
    pub line: usize,
}

/// A single-function program. Block 0 is the entry, the last block the exit.
#[derive(Clone, Debug)]
pub struct Program {
    pub name: String,
    pub symbols: Symbols,
    pub blocks: Vec<Block>,
    preds: Vec<Vec<usize>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

impl Program {
    /// Builds a program from already-resolved blocks. Successor lists must
    /// refer to existing blocks and every block must be reachable from
    /// block 0; the last block must have no successors.
    pub fn from_blocks(name: &str, symbols: Symbols, mut blocks: Vec<Block>) -> Result<Program, ParseError> {
        if blocks.is_empty() {
            blocks.push(Block {
                label: "entry".into(),
                stmts: vec![],
                succs: vec![],
                first_stmt: 0,
                line: 0,
            });
        }
        let n = blocks.len();
        let mut next = 0;
        for b in &mut blocks {
            b.first_stmt = next;
            next += b.stmts.len();
        }
        let mut preds = vec![Vec::new(); n];
        for (i, b) in blocks.iter().enumerate() {
            for &s in &b.succs {
                if s >= n {
                    return err(b.line, format!("block `{}` jumps to unknown block {s}", b.label));
                }
                if !preds[s].contains(&i) {
                    preds[s].push(i);
                }
            }
        }
        let exit = &blocks[n - 1];
        if !exit.succs.is_empty() {
            return err(exit.line, format!("exit block `{}` must not jump", exit.label));
        }
        let program = Program {
            name: name.to_string(),
            symbols,
            blocks,
            preds,
        };
        let order = program.reverse_post_order();
        if order.len() != n {
            let mut seen = vec![false; n];
            for b in order {
                seen[b] = true;
            }
            let b = &program.blocks[seen.iter().position(|s| !s).expect("some block unseen")];
            return err(b.line, format!("block `{}` is unreachable from the entry", b.label));
        }
        Ok(program)
    }

    pub fn parse(text: &str) -> Result<Program, ParseError> {
        Parser::default().parse(text)
    }

    pub fn entry(&self) -> usize {
        0
    }

    pub fn exit(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn preds(&self, block: usize) -> &[usize] {
        &self.preds[block]
    }

    pub fn stmt_count(&self) -> usize {
        self.blocks.iter().map(|b| b.stmts.len()).sum()
    }

    /// All statements in text order with their block.
    pub fn stmts(&self) -> impl Iterator<Item = (usize, &Stmt)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(i, b)| b.stmts.iter().map(move |s| (i, s)))
    }

    /// Blocks reachable from the entry in reverse post-order.
    pub fn reverse_post_order(&self) -> Vec<usize> {
        let mut post = self.post_order();
        post.reverse();
        post
    }

    /// Blocks reachable from the entry in post-order (iterative DFS,
    /// successors visited in listed order).
    pub fn post_order(&self) -> Vec<usize> {
        let n = self.blocks.len();
        let mut visited = vec![false; n];
        let mut out = Vec::with_capacity(n);
        let mut stack = vec![(self.entry(), 0usize)];
        visited[self.entry()] = true;
        while let Some((b, i)) = stack.pop() {
            if let Some(&s) = self.blocks[b].succs.get(i) {
                stack.push((b, i + 1));
                if !visited[s] {
                    visited[s] = true;
                    stack.push((s, 0));
                }
            } else {
                out.push(b);
            }
        }
        out
    }

    pub fn render_stmt(&self, stmt: &Stmt) -> String {
        let n = |v: &Var| self.symbols.name(*v);
        match stmt {
            Stmt::AddressOf { dst, target } => format!("{} = &{}", n(dst), n(target)),
            Stmt::Copy { dst, src } => format!("{} = {}", n(dst), n(src)),
            Stmt::Load { dst, src } => format!("{} = *{}", n(dst), n(src)),
            Stmt::Store { dst, src } => format!("*{} = {}", n(dst), n(src)),
            Stmt::Alloc { dst, .. } => format!("{} = new", n(dst)),
            Stmt::Use(vars) => {
                let names: Vec<&str> = vars.iter().map(n).collect();
                format!("use {}", names.join(" "))
            }
        }
    }
}

/// Text form; parsing it back yields the same program.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "func {}", self.name)?;
        let stack: Vec<&str> = self
            .symbols
            .vars()
            .filter(|v| self.symbols.kind(*v) == VarKind::Stack)
            .map(|v| self.symbols.name(v))
            .collect();
        if !stack.is_empty() {
            writeln!(f, "var {}", stack.join(" "))?;
        }
        for (i, b) in self.blocks.iter().enumerate() {
            writeln!(f, "block {}", b.label)?;
            for s in &b.stmts {
                writeln!(f, "  {}", self.render_stmt(s))?;
            }
            let falls_through = b.succs.len() == 1 && b.succs[0] == i + 1;
            if !b.succs.is_empty() && !falls_through {
                let labels: Vec<&str> = b.succs.iter().map(|&s| self.blocks[s].label.as_str()).collect();
                writeln!(f, "  goto {}", labels.join(" "))?;
            }
        }
        writeln!(f, "end")
    }
}

struct RawBlock {
    label: String,
    line: usize,
    stmts: Vec<Stmt>,
    gotos: Option<(usize, Vec<String>)>,
}

#[derive(Default)]
struct Parser {
    symbols: Symbols,
    blocks: Vec<RawBlock>,
}

impl Parser {
    fn var(&self, line: usize, name: &str) -> Result<Var, ParseError> {
        match self.symbols.get(name) {
            Some(v) if self.symbols.kind(v) == VarKind::Stack => Ok(v),
            _ => err(line, format!("undeclared variable `{name}`")),
        }
    }

    fn parse(mut self, text: &str) -> Result<Program, ParseError> {
        let mut name = None;
        let mut ended = false;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if ended {
                return err(line, "text after `end`");
            }
            let mut words = content.split_whitespace();
            let head = words.next().expect("non-empty line");
            match head {
                "func" => {
                    if name.is_some() {
                        return err(line, "second `func`");
                    }
                    let words: Vec<&str> = words.collect();
                    match words.as_slice() {
                        [n] if is_identifier(n) => name = Some(n.to_string()),
                        _ => return err(line, "expected `func <name>`"),
                    }
                    continue;
                }
                _ if name.is_none() => return err(line, "expected `func <name>` first"),
                "var" => {
                    if !self.blocks.is_empty() {
                        return err(line, "`var` after the first block");
                    }
                    for v in words {
                        if !is_identifier(v) {
                            return err(line, format!("bad variable name `{v}`"));
                        }
                        if is_heap_name(v) {
                            return err(line, format!("`{v}` is reserved for heap sites"));
                        }
                        if v == "new" || self.symbols.declare(v).is_none() {
                            return err(line, format!("variable `{v}` declared twice or reserved"));
                        }
                    }
                }
                "block" => {
                    let words: Vec<&str> = words.collect();
                    let [label] = words.as_slice() else {
                        return err(line, "expected `block <label>`");
                    };
                    if self.blocks.iter().any(|b| b.label == *label) {
                        return err(line, format!("duplicate block label `{label}`"));
                    }
                    self.blocks.push(RawBlock {
                        label: label.to_string(),
                        line,
                        stmts: vec![],
                        gotos: None,
                    });
                }
                "end" => {
                    if words.next().is_some() {
                        return err(line, "unexpected text after `end`");
                    }
                    ended = true;
                }
                _ => self.statement(line, content)?,
            }
        }
        let Some(name) = name else {
            return err(0, "missing `func <name>`");
        };
        if !ended {
            return err(text.lines().count(), "missing `end`");
        }
        self.finish(&name)
    }

    fn statement(&mut self, line: usize, content: &str) -> Result<(), ParseError> {
        if self.blocks.is_empty() {
            return err(line, "statement outside a block");
        }
        if self.blocks.last().expect("checked").gotos.is_some() {
            return err(line, "statement after `goto`");
        }
        let mut words = content.split_whitespace();
        let stmt = match words.next() {
            Some("goto") => {
                let labels: Vec<String> = words.map(str::to_string).collect();
                if labels.is_empty() || labels.len() > 2 {
                    return err(line, "`goto` takes one or two labels");
                }
                self.blocks.last_mut().expect("checked").gotos = Some((line, labels));
                return Ok(());
            }
            Some("use") => {
                let vars = words.map(|w| self.var(line, w)).collect::<Result<Vec<_>, _>>()?;
                if vars.is_empty() {
                    return err(line, "`use` needs a variable");
                }
                Stmt::Use(vars)
            }
            _ => self.assignment(line, content)?,
        };
        self.blocks.last_mut().expect("checked").stmts.push(stmt);
        Ok(())
    }

    fn assignment(&mut self, line: usize, content: &str) -> Result<Stmt, ParseError> {
        let Some((lhs, rhs)) = content.split_once('=') else {
            return err(line, format!("unrecognized statement `{content}`"));
        };
        let (lhs, rhs) = (lhs.trim(), rhs.trim());
        if let Some(p) = lhs.strip_prefix('*') {
            let dst = self.var(line, p.trim())?;
            if rhs.starts_with(['*', '&']) || rhs == "new" {
                return err(line, "a store takes a plain variable on the right");
            }
            return Ok(Stmt::Store {
                dst,
                src: self.var(line, rhs)?,
            });
        }
        let dst = self.var(line, lhs)?;
        Ok(if rhs == "new" {
            Stmt::Alloc {
                dst,
                site: self.symbols.mint_heap(),
            }
        } else if let Some(x) = rhs.strip_prefix('&') {
            Stmt::AddressOf {
                dst,
                target: self.var(line, x.trim())?,
            }
        } else if let Some(q) = rhs.strip_prefix('*') {
            Stmt::Load {
                dst,
                src: self.var(line, q.trim())?,
            }
        } else {
            Stmt::Copy {
                dst,
                src: self.var(line, rhs)?,
            }
        })
    }

    fn finish(self, name: &str) -> Result<Program, ParseError> {
        let labels: HashMap<&str, usize> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.label.as_str(), i))
            .collect();
        let n = self.blocks.len();
        let mut blocks = Vec::with_capacity(n);
        for (i, raw) in self.blocks.iter().enumerate() {
            let succs = match &raw.gotos {
                Some((line, targets)) => {
                    let mut succs = Vec::new();
                    for t in targets {
                        match labels.get(t.as_str()) {
                            Some(&s) if !succs.contains(&s) => succs.push(s),
                            Some(_) => {}
                            None => return err(*line, format!("unknown block label `{t}`")),
                        }
                    }
                    succs
                }
                None if i + 1 < n => vec![i + 1],
                None => vec![],
            };
            blocks.push(Block {
                label: raw.label.clone(),
                stmts: raw.stmts.clone(),
                succs,
                first_stmt: 0,
                line: raw.line,
            });
        }
        Program::from_blocks(name, self.symbols, blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_statement_form() {
        let p = Program::parse(
            "func f\nvar p q x\nblock a\n  p = &x\n  p = q\n  p = *q\n  *p = q\n  p = new # heap\n  use x q\nend\n",
        )
        .unwrap();
        let s = |n: &str| p.symbols.get(n).unwrap();
        let stmts: Vec<&Stmt> = p.stmts().map(|(_, st)| st).collect();
        assert_eq!(stmts.len(), 6);
        assert_eq!(*stmts[0], Stmt::AddressOf { dst: s("p"), target: s("x") });
        assert_eq!(*stmts[3], Stmt::Store { dst: s("p"), src: s("q") });
        assert_eq!(*stmts[4], Stmt::Alloc { dst: s("p"), site: s("H0") });
        assert_eq!(p.symbols.kind(s("H0")), VarKind::Heap);
    }

    #[test]
    fn empty_body_is_a_single_block() {
        let p = Program::parse("func f\nend\n").unwrap();
        assert_eq!(p.entry(), p.exit());
        assert_eq!(p.stmt_count(), 0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("func f\nvar p\nblock a\n  p = &y\nend\n", 4, "undeclared"),
            ("func f\nblock a\nblock a\nend\n", 3, "duplicate"),
            ("func f\nblock a\n  goto nowhere\nblock b\nend\n", 3, "unknown block"),
            ("func f\nblock a\n  goto c\nblock b\nblock c\nend\n", 4, "unreachable"),
            ("func f\nvar p\nblock a\n  p == q\nend\n", 4, "undeclared"),
            ("func f\nvar p\nblock a\n  frob p\nend\n", 4, "unrecognized"),
            ("block a\n", 1, "func"),
            ("func f\nblock a\n", 2, "missing `end`"),
            ("func f\nblock a\n  goto a\nend\n", 2, "must not jump"),
        ];
        for (text, line, needle) in cases {
            let e = Program::parse(text).unwrap_err();
            assert_eq!(e.line, line, "{text:?}: {e}");
            assert!(e.message.contains(needle), "{text:?}: {e}");
        }
    }

    #[test]
    fn text_round_trips() {
        let text = "func g\nvar a b\nblock x\n  a = new\n  goto y z\nblock y\n  b = a\n  goto x\nblock z\n  *a = b\n  use b\nend\n";
        let p = Program::parse(text).unwrap();
        assert_eq!(p.to_string(), text);
        assert_eq!(Program::parse(&p.to_string()).unwrap().to_string(), text);
    }

    #[test]
    fn orders_cover_reachable_blocks() {
        let p = Program::parse(
            "func f\nblock a\n  goto b c\nblock b\n  goto d\nblock c\nblock d\nend\n",
        )
        .unwrap();
        let rpo = p.reverse_post_order();
        assert_eq!(rpo[0], 0);
        assert_eq!(*rpo.last().unwrap(), 3);
        assert_eq!(p.preds(3), &[1, 2]);
    }
}
