//! Configuration-driven experiment runner for `stdd-core`.
//!
//! `stdd run cfg.json` solves the monolithic reference, runs the configured
//! splitting scheme and writes a per-sweep CSV trace plus a JSON summary.
//! `stdd verify cfg.json` runs the structural property checks.

pub mod app;
pub mod checks;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod output;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use experiment::Experiment;
