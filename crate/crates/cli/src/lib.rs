//! Config-driven runner: loads a run configuration, solves, simulates,
//! checks the monotonicity hypotheses and conclusions, and writes artifacts.

pub mod config;
pub mod examples;
pub mod export;
pub mod run;

pub use config::{load_config, save_config, CheckName, ConfigError, RunConfig};
pub use examples::{builtin_examples, find_example};
pub use export::export_artifacts;
pub use run::{check_hypotheses, run_problem, RunArtifacts, RunError, Stage};
