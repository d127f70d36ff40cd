//! Scenes shared by the simulator tests and the acceptance suite.
#![allow(dead_code)]

use scenevo::geom::Vec2;
use scenevo::model::{
    AdvScenario, AgentClass, AgentKind, AgentSpec, Behavior, Footprint, LightState, MetaScenario, Pose, RoadType,
    StaticObstacle, Trajectory,
};
use scenevo::roads::RoadLibrary;
use scenevo::sim::{EgoPolicyConfig, RolloutLog};

pub const DT: f64 = 0.1;
pub const FRAMES: usize = 200;
pub const EGO_HALF_LEN: f64 = 2.25;

/// Pedestrian crossing the ego lane at `x` from `y0`, timed to touch the
/// ego's path (|y| = 0.9 + 0.3) when an unbraked ego's front bumper reaches it.
pub fn crossing_scene(x: f64, y0: f64, truck: bool) -> AdvScenario {
    let p = EgoPolicyConfig::default();
    let mut ctx = RoadLibrary::standard().get(RoadType::Straight).unwrap().with_light(LightState::None);
    let walk = 1.5;
    let arrive = (x - 0.3 - EGO_HALF_LEN) / p.cruise_speed;
    let start = arrive - (-1.2 - y0) / walk;
    assert!(start > 0.0);
    let points = (0..FRAMES)
        .map(|f| {
            let t = f as f64 * DT;
            Vec2::new(x, (y0 + walk * (t - start).max(0.0)).min(6.0))
        })
        .collect();
    if truck {
        let fp = Footprint::new(10.0, 2.5);
        ctx.obstacles.push(StaticObstacle {
            id: "truck".into(),
            class: AgentClass::Truck,
            footprint: fp,
            pose: Pose::new(x - 1.0 - 0.5 * fp.length, -3.5, 0.0),
        });
    }
    let meta = MetaScenario {
        ego: AgentSpec::new("ego", AgentKind::Ego, AgentClass::Car, Pose::new(0.0, 0.0, 0.0), Behavior::LaneFollow),
        adversary: AgentSpec::new(
            "adversary",
            AgentKind::Adversary,
            AgentClass::Pedestrian,
            Pose::new(x, y0, std::f64::consts::FRAC_PI_2),
            Behavior::Crossing,
        ),
        context: ctx,
        adversary_trajectory: Trajectory::new(DT, points),
    };
    AdvScenario::from_meta(meta)
}

/// Gap from the ego's front bumper to the adversary's near edge at first detection.
pub fn detection_gap(log: &RolloutLog, x: f64) -> f64 {
    let f = log.first_detection.expect("adversary detected");
    x - 0.3 - (log.frames[f].x + EGO_HALF_LEN)
}

/// Distance covered from detection to standstill: reaction at cruise speed,
/// then constant braking.
pub fn stopping_distance(p: &EgoPolicyConfig) -> f64 {
    p.cruise_speed * p.reaction_delay + p.cruise_speed * p.cruise_speed / (2.0 * p.max_brake)
}

