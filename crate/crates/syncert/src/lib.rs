//! Experiment runner around `syncert_core`: configuration files, network
//! files, artifact writers and the brute-force oracles used by the tests.

pub mod config;
pub mod netfile;
pub mod oracle;
pub mod output;
pub mod run;

pub use config::ExperimentConfig;
pub use run::{run, RunOptions, RunSummary};
