//! Experiment harness: Asian and barrier sensitivity studies, the portfolio
//! SIMM study and the finite-difference instability demo.

pub mod cache;
pub mod config;
pub mod market;
pub mod setup;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind, MethodKind, RunOptions};
pub use experiments::{run_experiment, RunReport};
