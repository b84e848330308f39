//! Command-line driver: configuration files, experiment runs and result files.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_list_benchmarks, cmd_oracle, cmd_report, cmd_run, RunOutputs};
pub use config::{ConfigFile, Loaded, Overrides};
