//! Configuration, command dispatch and artifact emission for the `volform` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, parse_config_for, Command, ConfigError, FieldSource, MetricSpec, RunConfig};
pub use run::{run, Outcome, RunError, Status};
