//! Multi-level deduplication engine.
//!
//! An [`Engine`] interns immutable sorted sets under dense [`SetIndex`]
//! handles (index 0 is always the empty set) and memoizes union,
//! intersection, difference and subset queries on those handles. Engines
//! compose: a nested engine stores maps from keys to indices of a child
//! engine, so map-valued facts such as points-to maps are deduplicated both
//! as whole maps and per pointee set. A [`Dag`] owns a network of engines
//! and routes nested operations to the right children.
//!
//! ```
//! use mde::{FlatEngine, SetIndex};
//!
//! let mut e = FlatEngine::new("vars");
//! let (a, _) = e.register(vec!['a', 'b', 'c']).unwrap();
//! let (b, _) = e.register(vec!['a', 'b', 'd']).unwrap();
//! let u = e.union(a, b).unwrap();
//! assert_eq!(e.resolve(u).unwrap(), &['a', 'b', 'c', 'd']);
//! assert_eq!(e.union(b, a).unwrap(), u); // memoized
//! assert_eq!(e.union(u, SetIndex::EMPTY).unwrap(), u);
//! ```

mod dag;
mod engine;
mod error;
mod index;
mod kernel;
pub mod metrics;
pub mod persist;
mod shape;
mod store;

pub use dag::{Dag, Node, NodeId};
pub use engine::{Engine, EngineConfig, FlatEngine, NestedEngine, OperandPair};
pub use error::MdeError;
pub use index::{indices_equal, OpKind, SetIndex};
pub use metrics::{EngineMetrics, MetricsReport, OpCounters, Outcome};
pub use persist::{PersistError, Snapshot};
pub use shape::{ChildOps, ChildValues, Flat, Nested, NestedElement, NoChildren, Property, Shape};
pub use store::SetStore;
