//! Command-line front end: scripted demos, program analysis, oracle
//! verification, benchmarks and engine snapshots.

pub mod analyze;
pub mod bench;
mod cli;
pub mod demo;
pub mod error;
pub mod state;
pub mod verify;

pub use cli::run;
pub use error::CliError;
