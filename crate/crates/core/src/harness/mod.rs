//! Batch pipeline behind the command-line front end: run configuration,
//! seeding, and the generate / evolve / simulate / evaluate / report stages.

mod commands;
mod config;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{
    cmd_evaluate, cmd_evolve, cmd_generate, cmd_report, cmd_simulate, evaluate_one, evolve_one, generate_one,
    scenario_id, stage_scenario, tree_digest, Outcome, StageReport,
};
pub use config::{substream, BackendMode, RunConfig, Stage};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error(transparent)]
    Knowledge(#[from] crate::knowledge::KnowledgeError),
    #[error(transparent)]
    Perturb(#[from] crate::perturb::PerturbError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Scenario(#[from] crate::model::ScenarioIoError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("configuration: {0}")]
    Config(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        HarnessError::Io { path: path.into(), msg: e.to_string() }
    }
}
