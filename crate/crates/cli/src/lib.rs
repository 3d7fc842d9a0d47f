//! Experiment harness around `greenline-core`: JSON run configurations,
//! pipeline execution and deterministic CSV artifacts.

pub mod config;
pub mod csvio;
pub mod runner;

pub use config::{load_config, RunConfig};
pub use runner::{execute, Outcome};
