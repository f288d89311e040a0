//! Configuration and orchestration behind the `mvfbm` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_with_overrides, Command, ConfigError, Overrides, RunConfig};
pub use run::{run, RunError, RunSummary};
