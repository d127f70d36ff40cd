//! Window loss, its gradient, projection onto feasible trajectories and the
//! descent that perturbs the selected collaborators.

mod evolve;
mod loss;
mod optimize;
mod project;

use thiserror::Error;

use crate::graph::GraphError;

pub use evolve::{evolve_scenario, EvolveParams, Evolution};
pub use loss::{loss, loss_gradient, LossTerms, LossWeights, OCC_EPS};
pub use optimize::{optimize_segment, trace_csv, OptimizerConfig, Optimized};
pub use project::{is_feasible, project_feasible, Corridor, FeasibilityConstraints};

#[derive(Debug, Error, PartialEq)]
pub enum PerturbError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
