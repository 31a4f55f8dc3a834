//! Library behind the `rwdre` binary: experiment configuration files, the
//! experiment registry, and the runner that turns a config into CSV rows
//! plus a JSON-lines manifest entry.

pub mod config;
pub mod registry;
pub mod runner;

pub use config::{ConfigModel, ExperimentConfig};
pub use registry::{lookup, ExperimentInfo, EXPERIMENTS};
pub use runner::{exit_code, run, RowCore, RunSummary};
