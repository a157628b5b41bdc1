//! Experiment harness for `beatres`: a TOML experiment configuration, file
//! formats for signals, models and metrics, and the subcommands of the
//! `beatres` binary as plain functions.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
