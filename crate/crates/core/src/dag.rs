//! A network of engines wired parent-to-child.
//!
//! Nodes are added children first, so a node's children always sit at lower
//! positions. A nested operation on node `n` splits the node vector at `n`
//! and hands the lower half to the merge kernel as its child context; the
//! graph is acyclic by construction.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::{FlatEngine, NestedEngine};
use crate::error::MdeError;
use crate::index::{OpKind, SetIndex};
use crate::metrics::{EngineMetrics, MetricsReport};
use crate::shape::{ChildOps, NestedElement, NoChildren, Property};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

pub enum Node<P: Property> {
    Flat(FlatEngine<P>),
    Nested {
        engine: NestedEngine<P>,
        children: Vec<NodeId>,
    },
}

impl<P: Property> Node<P> {
    pub fn name(&self) -> &str {
        match self {
            Node::Flat(e) => e.name(),
            Node::Nested { engine, .. } => engine.name(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Node::Flat(_) => "flat",
            Node::Nested { .. } => "nested",
        }
    }

    pub fn children(&self) -> &[NodeId] {
        match self {
            Node::Flat(_) => &[],
            Node::Nested { children, .. } => children,
        }
    }

    pub fn metrics(&self) -> &crate::metrics::EngineMetrics {
        match self {
            Node::Flat(e) => e.metrics(),
            Node::Nested { engine, .. } => engine.metrics(),
        }
    }

    pub fn config_mut(&mut self) -> &mut crate::engine::EngineConfig {
        match self {
            Node::Flat(e) => e.config_mut(),
            Node::Nested { engine, .. } => engine.config_mut(),
        }
    }

    pub(crate) fn is_live(&self, idx: SetIndex) -> bool {
        match self {
            Node::Flat(e) => e.store().is_live(idx),
            Node::Nested { engine, .. } => engine.store().is_live(idx),
        }
    }
}

/// Child context backed by the lower part of the node vector.
struct DagChildren<'a, P: Property> {
    nodes: &'a mut [Node<P>],
    ids: &'a [NodeId],
}

impl<P: Property> ChildOps for DagChildren<'_, P> {
    fn apply(&mut self, slot: usize, op: OpKind, a: SetIndex, b: SetIndex) -> Result<SetIndex, MdeError> {
        let id = *self.ids.get(slot).ok_or(MdeError::MissingChild)?;
        operate_on(self.nodes, id, op, a, b)
    }

    fn is_subset(&mut self, slot: usize, a: SetIndex, b: SetIndex) -> Result<bool, MdeError> {
        let id = *self.ids.get(slot).ok_or(MdeError::MissingChild)?;
        subset_on(self.nodes, id, a, b)
    }
}

fn operate_on<P: Property>(
    nodes: &mut [Node<P>],
    id: NodeId,
    op: OpKind,
    a: SetIndex,
    b: SetIndex,
) -> Result<SetIndex, MdeError> {
    if id.0 >= nodes.len() {
        return Err(MdeError::UnknownNode(id.0));
    }
    let (lower, upper) = nodes.split_at_mut(id.0);
    match &mut upper[0] {
        Node::Flat(engine) => engine.operate_with(op, a, b, &mut NoChildren),
        Node::Nested { engine, children } => {
            let mut ctx = DagChildren {
                nodes: lower,
                ids: children,
            };
            engine.operate_with(op, a, b, &mut ctx)
        }
    }
}

fn subset_on<P: Property>(
    nodes: &mut [Node<P>],
    id: NodeId,
    a: SetIndex,
    b: SetIndex,
) -> Result<bool, MdeError> {
    if id.0 >= nodes.len() {
        return Err(MdeError::UnknownNode(id.0));
    }
    let (lower, upper) = nodes.split_at_mut(id.0);
    match &mut upper[0] {
        Node::Flat(engine) => engine.is_subset_with(a, b, &mut NoChildren),
        Node::Nested { engine, children } => {
            let mut ctx = DagChildren {
                nodes: lower,
                ids: children,
            };
            engine.is_subset_with(a, b, &mut ctx)
        }
    }
}

/// Engines of one property type, wired into a DAG.
pub struct Dag<P: Property> {
    nodes: Vec<Node<P>>,
}

impl<P: Property> Default for Dag<P> {
    fn default() -> Self {
        Dag { nodes: Vec::new() }
    }
}

impl<P: Property> Dag<P> {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_name(&self, name: &str) -> Result<(), MdeError> {
        if self.find(name).is_some() {
            return Err(MdeError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub(crate) fn push(&mut self, node: Node<P>) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    pub fn add_flat(&mut self, name: &str) -> Result<NodeId, MdeError> {
        self.check_name(name)?;
        Ok(self.push(Node::Flat(FlatEngine::new(name))))
    }

    /// Adds a nested engine with one child slot per entry of `children`.
    /// Children may be shared with other parents.
    pub fn add_nested(&mut self, name: &str, children: &[NodeId]) -> Result<NodeId, MdeError> {
        self.check_name(name)?;
        if children.is_empty() {
            return Err(MdeError::NoChildren(name.to_string()));
        }
        for c in children {
            self.node(*c)?;
        }
        Ok(self.push(Node::Nested {
            engine: NestedEngine::new(name, children.len()),
            children: children.to_vec(),
        }))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name() == name).map(NodeId)
    }

    pub fn node(&self, id: NodeId) -> Result<&Node<P>, MdeError> {
        self.nodes.get(id.0).ok_or(MdeError::UnknownNode(id.0))
    }

    pub fn node_mut(&mut self, id: NodeId) -> Result<&mut Node<P>, MdeError> {
        self.nodes.get_mut(id.0).ok_or(MdeError::UnknownNode(id.0))
    }

    pub fn flat(&self, id: NodeId) -> Result<&FlatEngine<P>, MdeError> {
        match self.node(id)? {
            Node::Flat(e) => Ok(e),
            other => Err(wrong_kind(other, "flat")),
        }
    }

    pub fn flat_mut(&mut self, id: NodeId) -> Result<&mut FlatEngine<P>, MdeError> {
        match self.node_mut(id)? {
            Node::Flat(e) => Ok(e),
            other => Err(wrong_kind(other, "flat")),
        }
    }

    pub fn nested(&self, id: NodeId) -> Result<&NestedEngine<P>, MdeError> {
        match self.node(id)? {
            Node::Nested { engine, .. } => Ok(engine),
            other => Err(wrong_kind(other, "nested")),
        }
    }

    pub fn nested_mut(&mut self, id: NodeId) -> Result<&mut NestedEngine<P>, MdeError> {
        match self.node_mut(id)? {
            Node::Nested { engine, .. } => Ok(engine),
            other => Err(wrong_kind(other, "nested")),
        }
    }

    pub fn children(&self, id: NodeId) -> Result<&[NodeId], MdeError> {
        Ok(self.node(id)?.children())
    }

    pub fn operate(&mut self, id: NodeId, op: OpKind, a: SetIndex, b: SetIndex) -> Result<SetIndex, MdeError> {
        operate_on(&mut self.nodes, id, op, a, b)
    }

    pub fn union(&mut self, id: NodeId, a: SetIndex, b: SetIndex) -> Result<SetIndex, MdeError> {
        self.operate(id, OpKind::Union, a, b)
    }

    pub fn intersection(&mut self, id: NodeId, a: SetIndex, b: SetIndex) -> Result<SetIndex, MdeError> {
        self.operate(id, OpKind::Intersection, a, b)
    }

    pub fn difference(&mut self, id: NodeId, a: SetIndex, b: SetIndex) -> Result<SetIndex, MdeError> {
        self.operate(id, OpKind::Difference, a, b)
    }

    /// Subset test. For nested nodes this is containment of the flattened
    /// key/pointee pairs.
    pub fn is_subset(&mut self, id: NodeId, a: SetIndex, b: SetIndex) -> Result<bool, MdeError> {
        subset_on(&mut self.nodes, id, a, b)
    }

    fn single_child(&self, id: NodeId) -> Result<NodeId, MdeError> {
        match self.children(id)? {
            [c] => Ok(*c),
            other => Err(MdeError::ArityMismatch {
                expected: 1,
                found: other.len(),
            }),
        }
    }

    /// Adds `prop` to the pointee set of `key`, adding `key` if absent.
    pub fn insert_pointee(&mut self, id: NodeId, idx: SetIndex, key: P, prop: P) -> Result<SetIndex, MdeError> {
        let child = self.single_child(id)?;
        self.nested(id)?.store().check(idx)?;
        let single = self.flat_mut(child)?.singleton(prop);
        let (delta, _) = self
            .nested_mut(id)?
            .register(vec![NestedElement::single(key, single)])?;
        self.union(id, idx, delta)
    }

    /// Strong update: `key` bound to `child_idx`, replacing any previous
    /// binding. Binding the empty set removes the key.
    pub fn update_pointees(
        &mut self,
        id: NodeId,
        idx: SetIndex,
        key: P,
        child_idx: SetIndex,
    ) -> Result<SetIndex, MdeError> {
        self.update_values(id, idx, key, &[child_idx])
    }

    /// k-ary form of [`update_pointees`](Self::update_pointees).
    pub fn update_values(
        &mut self,
        id: NodeId,
        idx: SetIndex,
        key: P,
        values: &[SetIndex],
    ) -> Result<SetIndex, MdeError> {
        let children = self.children(id)?.to_vec();
        for (&c, &v) in children.iter().zip(values) {
            if !self.node(c)?.is_live(v) {
                return Err(MdeError::UnknownIndex(v));
            }
        }
        self.nested_mut(id)?.rebind(idx, key, values)
    }

    /// Child index bound to `key`, for arity-1 nodes.
    pub fn get_pointees(&self, id: NodeId, idx: SetIndex, key: &P) -> Result<Option<SetIndex>, MdeError> {
        self.single_child(id)?;
        Ok(self.nested(id)?.values_of(idx, key)?.map(|v| v[0]))
    }

    /// Expands an arity-1 map into its (key, pointee) pairs, in order.
    pub fn flatten(&self, id: NodeId, idx: SetIndex) -> Result<Vec<(P, P)>, MdeError> {
        let child = self.single_child(id)?;
        let child = self.flat(child)?;
        let mut pairs = Vec::new();
        for elem in self.nested(id)?.resolve(idx)? {
            for p in child.resolve(elem.value())? {
                pairs.push((elem.key.clone(), p.clone()));
            }
        }
        Ok(pairs)
    }

    /// Expands a map of any arity into (key, slot, pointee) triples.
    pub fn flatten_slots(&self, id: NodeId, idx: SetIndex) -> Result<BTreeSet<(P, usize, P)>, MdeError> {
        let children = self.children(id)?.to_vec();
        let mut out = BTreeSet::new();
        for elem in self.nested(id)?.resolve(idx)? {
            for (slot, (&c, &v)) in children.iter().zip(&elem.values).enumerate() {
                for p in self.flat(c)?.resolve(v)? {
                    out.insert((elem.key.clone(), slot, p.clone()));
                }
            }
        }
        Ok(out)
    }

    /// Evicts sets from one node after checking that no registered set of a
    /// parent node still refers to them.
    pub fn evict(&mut self, id: NodeId, victims: &[SetIndex]) -> Result<(), MdeError> {
        self.node(id)?;
        let doomed: BTreeSet<SetIndex> = victims.iter().copied().collect();
        for node in &self.nodes {
            let Node::Nested { engine, children } = node else {
                continue;
            };
            for (slot, _) in children.iter().enumerate().filter(|(_, c)| **c == id) {
                for (parent_set, elems) in engine.store().iter() {
                    if let Some(e) = elems.iter().find(|e| doomed.contains(&e.values[slot])) {
                        return Err(MdeError::EvictReferenced {
                            victim: e.values[slot],
                            parent: engine.name().to_string(),
                            parent_set,
                        });
                    }
                }
            }
        }
        match self.node_mut(id)? {
            Node::Flat(e) => e.evict(victims),
            Node::Nested { engine, .. } => engine.evict(victims),
        }
    }

    pub fn metrics_report(&self) -> MetricsReport {
        let mut report = MetricsReport::new();
        for node in &self.nodes {
            report.add_engine(node.name(), node.metrics());
        }
        report
    }

    /// Current counters of every node, by name.
    pub fn metrics_by_node(&self) -> BTreeMap<String, EngineMetrics> {
        self.nodes
            .iter()
            .map(|n| (n.name().to_string(), n.metrics().clone()))
            .collect()
    }

    /// Report of the counter movement since `baseline` was taken. Nodes
    /// missing from the baseline count from zero.
    pub fn metrics_report_since(&self, baseline: &BTreeMap<String, EngineMetrics>) -> MetricsReport {
        let mut report = MetricsReport::new();
        for node in &self.nodes {
            let delta = match baseline.get(node.name()) {
                Some(before) => node.metrics().since(before),
                None => node.metrics().clone(),
            };
            report.add_engine(node.name(), &delta);
        }
        report
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node<P>)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }
}

fn wrong_kind<P: Property>(node: &Node<P>, expected: &'static str) -> MdeError {
    MdeError::WrongNodeKind {
        name: node.name().to_string(),
        expected,
        found: node.kind(),
    }
}
