//! Closed-loop 2D replay: baseline traffic, an occlusion-aware scripted ego,
//! collision and rule-event logging.

mod flow;
mod rollout;
mod sensor;

use thiserror::Error;

pub use flow::{
    flow_context, generate_background_flow, generate_background_flow_with, generate_meta_flow, spawn_lanes, FlowConfig,
};
pub use rollout::{
    agent_kind, ego_trajectory, simulate_closed_loop, simulate_with, CollisionEvent, EgoPolicyConfig, FrameRecord,
    RolloutLog, RuleEvent, RuleKind, SimOptions, Termination,
};
pub use sensor::{line_of_sight_occluded, SensorModel};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("cannot spawn {requested} vehicles: spawn lanes hold at most {capacity} cars at the minimum gap")]
    Spawn { requested: usize, capacity: usize },
}
