//! Config-driven scenario runner for the `optomech` simulator.

pub mod config;
pub mod run;

pub use config::{parse, validate, RawConfig, Scenario};
pub use run::{rerun, run_scenario, RunError, RunManifest};
