//! Command-line orchestration for anova-rgs: config parsing, manifests and
//! the `fit`, `tune`, `simulate`, `sweep` and `probe` runs.

pub mod config;
pub mod error;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{run, run_with_jobs, Manifest, RunOutcome};
