//! Configuration-driven experiments over the `oscbath` library.
//!
//! Each experiment kind runs one pipeline, collects tables and embedded
//! pass/fail assertions in a [`Report`], and can write them as CSV files plus
//! a JSON manifest.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, Kind};
pub use report::{Assertion, Report, Table};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] oscbath::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Runs the experiment named by `config.kind`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    let kind = config.kind.ok_or_else(|| HarnessError::Config("no experiment kind given".into()))?;
    config.validate()?;
    experiments::run(kind, config)
}
