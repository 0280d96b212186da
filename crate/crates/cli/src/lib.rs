//! Experiment harness for Hopfield deep equilibrium models.

pub mod commands;
pub mod config;
pub mod exit;
pub mod metrics;
pub mod sim;

pub use config::{ConfigError, ExperimentConfig, Scheme};
pub use exit::{classify, ExitCategory};
