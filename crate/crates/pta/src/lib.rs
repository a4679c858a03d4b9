//! A toy pointer language with a flow-sensitive may-points-to analysis and
//! a live-variables analysis, each runnable on plain sets or on interned
//! sets and maps.
//!
//! ```
//! use mde_pta::{analyze, bundled, MultiLevel, Options, Program};
//!
//! let program = Program::parse(bundled::MERGE_HEAP).unwrap();
//! let mut backend = MultiLevel::new();
//! let result = analyze(&program, &mut backend, Options::default()).unwrap();
//! let at_six = result.points_to.point(6).unwrap();
//! let c = program.symbols.get("c").unwrap();
//! assert_eq!(at_six[&c].len(), 3);
//! ```

pub mod analysis;
pub mod backend;
pub mod error;
pub mod footprint;
pub mod generate;
pub mod program;

pub use analysis::{analyze, liveness, points_to, Analysis, LiveFacts, Options, PointsToFacts, Solution};
pub use backend::{Backend, BackendKind, MultiLevel, Naive, PointsTo, SingleLevel, WorkStats};
pub use error::PtaError;
pub use footprint::{footprint, FootprintReport};
pub use program::{ParseError, Program, Stmt, Symbols, Var, VarKind};

/// Programs shipped with the crate.
pub mod bundled {
    /// Three allocation paths merging into one block.
    pub const MERGE_HEAP: &str = include_str!("../programs/merge_heap.ptl");
    pub const EMPTY: &str = include_str!("../programs/empty.ptl");
    /// Strong and weak stores inside a loop.
    pub const STORES: &str = include_str!("../programs/stores.ptl");

    pub const ALL: [(&str, &str); 3] = [("merge_heap", MERGE_HEAP), ("empty", EMPTY), ("stores", STORES)];
}
