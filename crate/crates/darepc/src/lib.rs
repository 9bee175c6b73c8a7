//! Experiment runner over `darepc-core`: TOML configs, text artifacts and
//! the `learn`, `verify`, `simulate` and `sweep` workflows.

pub mod commands;
pub mod config;
pub mod exec;
pub mod format;
pub mod scenario;

pub use commands::{Exit, Failure, RunContext};
pub use config::ExperimentConfig;
