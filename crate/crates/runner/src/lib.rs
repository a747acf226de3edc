//! Scenario runner, verification suites and estimate probes on top of
//! `ptt_core`.

pub mod config;
pub mod error;
pub mod probes;
pub mod run;
pub mod scenario;
pub mod verify;

pub use config::{RunConfig, Scenario};
pub use error::RunnerError;
pub use run::{run, Report, RunOutcome};
