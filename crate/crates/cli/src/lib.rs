//! Configuration and commands behind the `amopt` binary.

pub mod commands;
pub mod config;

pub use commands::{CliError, GradientRow, OptimizationResult, SimulationSummary};
pub use config::{load_config, parse_config, RunConfig};
