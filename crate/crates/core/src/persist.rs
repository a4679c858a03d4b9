//! Whole-DAG snapshots.
//!
//! A snapshot lists nodes children-first. Each node carries its own atom
//! table (the rendered properties it mentions, sorted by rendering) and its
//! sets in index order, with `null` for evicted slots. Flat elements are atom
//! ordinals; nested elements are `[atom, child_index, ...]`. Emission goes
//! through `serde_json::Value`, whose maps keep keys sorted, and all lists
//! are sorted, so equal engine states produce byte-identical documents.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{Dag, Node, NodeId};
use crate::engine::{Engine, FlatEngine, NestedEngine};
use crate::index::{OpKind, SetIndex};
use crate::metrics::OpCounters;
use crate::shape::{NestedElement, Property, Shape};

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("malformed snapshot: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{location}: {reason}")]
    Invalid { location: String, reason: String },
}

fn invalid(location: impl Into<String>, reason: impl Into<String>) -> PersistError {
    PersistError::Invalid {
        location: location.into(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElemRepr {
    Atom(u32),
    Nested(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSnapshot {
    pub name: String,
    pub children: Vec<String>,
    pub atoms: Vec<String>,
    pub sets: Vec<Option<Vec<ElemRepr>>>,
    pub memo: BTreeMap<String, Vec<[u32; 3]>>,
    pub subset: Vec<(u32, u32, bool)>,
    pub counters: BTreeMap<String, OpCounters>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub nodes: Vec<NodeSnapshot>,
}

impl Snapshot {
    /// Captures every node of `dag`. `render` must be injective on the
    /// properties in use.
    pub fn capture<P: Property>(dag: &Dag<P>, render: impl Fn(&P) -> String) -> Snapshot {
        let names: Vec<String> = dag.nodes().map(|(_, n)| n.name().to_string()).collect();
        let nodes = dag
            .nodes()
            .map(|(_, node)| match node {
                Node::Flat(engine) => capture_node(engine, Vec::new(), &render, |p| p, |ord, _| {
                    ElemRepr::Atom(ord)
                }),
                Node::Nested { engine, children } => {
                    let child_names = children.iter().map(|c| names[c.index()].clone()).collect();
                    capture_node(engine, child_names, &render, |e| &e.key, |ord, e| {
                        let mut v = vec![ord];
                        v.extend(e.values.iter().map(|i| i.get()));
                        ElemRepr::Nested(v)
                    })
                }
            })
            .collect();
        Snapshot { nodes }
    }

    /// Canonical JSON text.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("snapshot is always serializable");
        let mut text = serde_json::to_string_pretty(&value).expect("value is always serializable");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Snapshot, PersistError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuilds the DAG. Indices, memo tables, subset relations and counters
    /// come back exactly as captured.
    pub fn restore<P: Property>(
        &self,
        mut parse: impl FnMut(&str) -> Result<P, String>,
    ) -> Result<Dag<P>, PersistError> {
        let mut dag = Dag::new();
        let mut ids: HashMap<&str, NodeId> = HashMap::new();
        for (n, snap) in self.nodes.iter().enumerate() {
            let at = format!("nodes[{n}] `{}`", snap.name);
            if ids.contains_key(snap.name.as_str()) {
                return Err(invalid(at, "duplicate node name"));
            }
            let mut children = Vec::with_capacity(snap.children.len());
            for c in &snap.children {
                let id = ids
                    .get(c.as_str())
                    .ok_or_else(|| invalid(&at, format!("child `{c}` is not defined before its parent")))?;
                children.push(*id);
            }
            let atoms = parse_atoms(&at, &snap.atoms, &mut parse)?;
            let node = if children.is_empty() {
                let mut engine = FlatEngine::new(snap.name.clone());
                restore_sets(&at, &mut engine, &snap.sets, |pos, e| match e {
                    ElemRepr::Atom(ord) => atom(&atoms, *ord).map_err(|r| (pos, r)),
                    ElemRepr::Nested(_) => Err((pos, "flat engine element must be an atom ordinal".into())),
                })?;
                restore_tables(&at, &mut engine, snap)?;
                Node::Flat(engine)
            } else {
                let mut engine = NestedEngine::new(snap.name.clone(), children.len());
                let child_nodes: Vec<&Node<P>> = children.iter().map(|c| dag.node(*c).expect("loaded")).collect();
                restore_sets(&at, &mut engine, &snap.sets, |pos, e| {
                    let ElemRepr::Nested(parts) = e else {
                        return Err((pos, "nested element must be [atom, child...]".into()));
                    };
                    if parts.len() != child_nodes.len() + 1 {
                        return Err((pos, format!("expected {} child indices", child_nodes.len())));
                    }
                    let key = atom(&atoms, parts[0]).map_err(|r| (pos, r))?;
                    let values = parts[1..].iter().map(|&v| SetIndex::new(v));
                    let elem = NestedElement::new(key, values);
                    for (slot, (v, child)) in elem.values.iter().zip(&child_nodes).enumerate() {
                        if !child.is_live(*v) {
                            return Err((pos, format!("slot {slot} refers to missing child set {v}")));
                        }
                    }
                    Ok(elem)
                })?;
                restore_tables(&at, &mut engine, snap)?;
                Node::Nested { engine, children }
            };
            let id = dag.push(node);
            ids.insert(&snap.name, id);
        }
        Ok(dag)
    }
}

fn capture_node<S: Shape>(
    engine: &Engine<S>,
    children: Vec<String>,
    render: &impl Fn(&S::Key) -> String,
    key_of: impl Fn(&S::Elem) -> &S::Key,
    encode: impl Fn(u32, &S::Elem) -> ElemRepr,
) -> NodeSnapshot
where
    S::Key: Property,
{
    let mut rendered: BTreeMap<String, ()> = BTreeMap::new();
    let mut by_key: HashMap<S::Key, String> = HashMap::new();
    for (_, elems) in engine.store().iter() {
        for e in elems {
            let k = key_of(e);
            if !by_key.contains_key(k) {
                let text = render(k);
                rendered.insert(text.clone(), ());
                by_key.insert(k.clone(), text);
            }
        }
    }
    let atoms: Vec<String> = rendered.into_keys().collect();
    let ordinal: HashMap<&str, u32> = atoms.iter().enumerate().map(|(i, a)| (a.as_str(), i as u32)).collect();

    let sets = engine
        .store()
        .slots()
        .map(|slot| {
            slot.map(|elems| {
                let mut out: Vec<(u32, ElemRepr)> = elems
                    .iter()
                    .map(|e| {
                        let ord = ordinal[by_key[key_of(e)].as_str()];
                        (ord, encode(ord, e))
                    })
                    .collect();
                out.sort_by_key(|(ord, _)| *ord);
                out.into_iter().map(|(_, r)| r).collect()
            })
        })
        .collect();

    let memo = OpKind::ALL
        .into_iter()
        .map(|op| {
            let mut rows: Vec<[u32; 3]> = engine
                .memo(op)
                .iter()
                .map(|(&(l, r), &res)| [l.get(), r.get(), res.get()])
                .collect();
            rows.sort_unstable();
            (op.name().to_string(), rows)
        })
        .collect();
    let mut subset: Vec<(u32, u32, bool)> = engine
        .subset_relations()
        .iter()
        .map(|(&(a, b), &rel)| (a.get(), b.get(), rel))
        .collect();
    subset.sort_unstable();
    let counters = engine
        .metrics()
        .iter()
        .map(|(op, c)| (op.name().to_string(), *c))
        .collect();

    NodeSnapshot {
        name: engine.name().to_string(),
        children,
        atoms,
        sets,
        memo,
        subset,
        counters,
    }
}

fn parse_atoms<P>(
    at: &str,
    atoms: &[String],
    parse: &mut impl FnMut(&str) -> Result<P, String>,
) -> Result<Vec<P>, PersistError> {
    let distinct: BTreeSet<&String> = atoms.iter().collect();
    if distinct.len() != atoms.len() {
        return Err(invalid(format!("{at}.atoms"), "duplicate atom"));
    }
    atoms
        .iter()
        .enumerate()
        .map(|(i, a)| parse(a).map_err(|r| invalid(format!("{at}.atoms[{i}]"), r)))
        .collect()
}

fn atom<P: Clone>(atoms: &[P], ord: u32) -> Result<P, String> {
    atoms
        .get(ord as usize)
        .cloned()
        .ok_or_else(|| format!("atom ordinal {ord} out of range"))
}

fn restore_sets<S: Shape>(
    at: &str,
    engine: &mut Engine<S>,
    sets: &[Option<Vec<ElemRepr>>],
    mut decode: impl FnMut(usize, &ElemRepr) -> Result<S::Elem, (usize, String)>,
) -> Result<(), PersistError> {
    match sets.first() {
        Some(Some(first)) if first.is_empty() => {}
        _ => return Err(invalid(format!("{at}.sets[0]"), "index 0 must be the empty set")),
    }
    for (i, slot) in sets.iter().enumerate().skip(1) {
        let loc = format!("{at}.sets[{i}]");
        let Some(reprs) = slot else {
            engine.store_mut().push_tombstone();
            continue;
        };
        let mut elems = Vec::with_capacity(reprs.len());
        for (pos, r) in reprs.iter().enumerate() {
            let e = decode(pos, r).map_err(|(p, reason)| invalid(format!("{loc}[{p}]"), reason))?;
            elems.push(e);
        }
        elems.sort_by(|a, b| S::key(a).cmp(S::key(b)));
        if let Some(p) = elems.iter().position(S::is_vacuous) {
            return Err(invalid(&loc, format!("element {p} binds only empty child sets")));
        }
        let expected = engine.store().slot_count();
        let (idx, fresh) = engine
            .register(elems)
            .map_err(|e| invalid(&loc, format!("not a valid set: {e}")))?;
        if !fresh || idx.as_usize() != expected {
            return Err(invalid(&loc, format!("content duplicates set {idx}")));
        }
    }
    Ok(())
}

fn restore_tables<S: Shape>(at: &str, engine: &mut Engine<S>, snap: &NodeSnapshot) -> Result<(), PersistError> {
    let live = |engine: &Engine<S>, i: u32| engine.store().is_live(SetIndex::new(i));
    for (name, rows) in &snap.memo {
        let op = OpKind::from_name(name).ok_or_else(|| invalid(format!("{at}.memo"), format!("unknown operation `{name}`")))?;
        for (n, &[l, r, res]) in rows.iter().enumerate() {
            let loc = format!("{at}.memo.{name}[{n}]");
            if !(live(engine, l) && live(engine, r) && live(engine, res)) {
                return Err(invalid(loc, "refers to a missing set"));
            }
            if op.is_commutative() && l >= r {
                return Err(invalid(loc, "operands of a commutative operation must be ascending"));
            }
            if !engine.restore_memo(op, (SetIndex::new(l), SetIndex::new(r)), SetIndex::new(res)) {
                return Err(invalid(loc, "duplicate operand pair"));
            }
        }
    }
    for (n, &(a, b, rel)) in snap.subset.iter().enumerate() {
        let loc = format!("{at}.subset[{n}]");
        if a >= b || !live(engine, a) || !live(engine, b) {
            return Err(invalid(loc, "relation must join two live sets in ascending order"));
        }
        engine.subset_relations_mut().insert((SetIndex::new(a), SetIndex::new(b)), rel);
    }
    for (name, counters) in &snap.counters {
        let op = OpKind::from_name(name)
            .ok_or_else(|| invalid(format!("{at}.counters"), format!("unknown operation `{name}`")))?;
        *engine.metrics_mut().get_mut(op) = *counters;
    }
    Ok(())
}

/// Snapshot of a DAG whose properties render through `Display`.
pub fn to_json<P: Property + std::fmt::Display>(dag: &Dag<P>) -> String {
    Snapshot::capture(dag, |p| p.to_string()).to_json()
}

/// Inverse of [`to_json`] for properties parsed through `FromStr`.
pub fn from_json<P>(text: &str) -> Result<Dag<P>, PersistError>
where
    P: Property + std::str::FromStr,
    P::Err: std::fmt::Display,
{
    Snapshot::from_json(text)?.restore(|s| s.parse::<P>().map_err(|e| e.to_string()))
}
