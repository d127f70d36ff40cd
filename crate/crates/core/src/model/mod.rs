//! Trajectories, agents, scenes and the on-disk scenario format.

pub mod agent;
pub mod io;
pub mod scenario;
pub mod scene;
pub mod trajectory;
pub mod validate;

use thiserror::Error;

pub use agent::{AgentClass, AgentKind, AgentSpec, Behavior, Footprint, Pose, SpeedLimits};
pub use io::{load_meta, load_scenario, save_meta, save_scenario, scenario_from_str, scenario_to_string, ScenarioIoError};
pub use scenario::{AdvScenario, Background, MetaScenario, PerturbationRecord};
pub use scene::{Lane, LaneRole, LightState, RoadType, Route, SceneContext, SignalGroup, StaticObstacle, StopControl, StopLine};
pub use trajectory::{Trajectory, DEFAULT_DT};
pub use validate::{validate_scenario, ValidationReport, Violation};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("timestep must be positive, got {0}")]
    NonPositiveDt(f64),
}
