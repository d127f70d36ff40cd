use serde::{Deserialize, Serialize};

use crate::geom::{Polyline, Vec2};
use crate::model::agent::{AgentClass, Footprint, Pose, SpeedLimits};

/// Road type `R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoadType {
    Straight,
    Intersection,
    TJunction,
    Roundabout,
    Curve,
}

impl RoadType {
    pub const ALL: [RoadType; 5] = [
        RoadType::Straight,
        RoadType::Intersection,
        RoadType::TJunction,
        RoadType::Roundabout,
        RoadType::Curve,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoadType::Straight => "straight",
            RoadType::Intersection => "intersection",
            RoadType::TJunction => "t-junction",
            RoadType::Roundabout => "roundabout",
            RoadType::Curve => "curve",
        }
    }
}

/// Traffic light state `L`, i.e. the signal facing the threat's approach.
/// Approaches on the ego's road show the complementary phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LightState {
    Red,
    Yellow,
    Green,
    None,
}

impl LightState {
    pub const ALL: [LightState; 4] = [LightState::Red, LightState::Yellow, LightState::Green, LightState::None];

    pub fn as_str(self) -> &'static str {
        match self {
            LightState::Red => "red",
            LightState::Yellow => "yellow",
            LightState::Green => "green",
            LightState::None => "none",
        }
    }

    /// Phase shown to the ego's road when the cross approach shows `self`.
    pub fn main_road_phase(self) -> LightState {
        match self {
            LightState::Red | LightState::Yellow => LightState::Green,
            LightState::Green => LightState::Red,
            LightState::None => LightState::None,
        }
    }

    /// Whether vehicles facing this phase must stop.
    pub fn requires_stop(self) -> bool {
        matches!(self, LightState::Red | LightState::Yellow)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaneRole {
    /// The lane holding the ego route.
    Ego,
    /// Same direction as the ego, beside it.
    Adjacent,
    Oncoming,
    /// Crosses or merges with the ego road.
    Cross,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: String,
    pub role: LaneRole,
    pub centerline: Polyline,
    pub width: f64,
    /// Arc-length range where background vehicles may spawn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawn: Option<(f64, f64)>,
    /// Index into `SceneContext::stop_lines` governing this lane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_line: Option<usize>,
}

impl Lane {
    pub fn half_width(&self) -> f64 {
        0.5 * self.width
    }

    /// Lateral distance by which a point lies outside the lane corridor
    /// (0 when inside).
    pub fn excess(&self, p: Vec2) -> f64 {
        (self.centerline.project(p).lateral.abs() - self.half_width()).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopControl {
    Signal,
    StopSign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalGroup {
    /// Approaches along the ego's road.
    Main,
    /// Approaches crossing the ego's road (the threat side).
    Cross,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopLine {
    pub a: Vec2,
    pub b: Vec2,
    pub control: StopControl,
    pub group: SignalGroup,
}

/// Route the ego must follow, ending at `goal`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub path: Polyline,
    pub goal: Vec2,
}

impl Route {
    pub fn new(path: Polyline) -> Self {
        let goal = path.last().unwrap_or_default();
        Route { path, goal }
    }

    pub fn length(&self) -> f64 {
        self.path.length()
    }
}

/// Parked vehicle or other fixed scene object that blocks sight lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticObstacle {
    pub id: String,
    pub class: AgentClass,
    pub footprint: Footprint,
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneContext {
    pub road_type: RoadType,
    pub light_state: LightState,
    pub lanes: Vec<Lane>,
    pub stop_lines: Vec<StopLine>,
    pub route: Route,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<StaticObstacle>,
    #[serde(default)]
    pub speed_limits: SpeedLimits,
}

/// Margin around the lanes counted as part of the scene (sidewalks, verges).
pub const ROADSIDE_MARGIN: f64 = 15.0;

impl SceneContext {
    pub fn lane(&self, id: &str) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }

    pub fn ego_lane(&self) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.role == LaneRole::Ego)
    }

    /// Signal state in force at a stop line (`None` for stop signs).
    pub fn signal_at(&self, line: &StopLine) -> LightState {
        match (line.control, line.group) {
            (StopControl::StopSign, _) => LightState::None,
            (StopControl::Signal, SignalGroup::Cross) => self.light_state,
            (StopControl::Signal, SignalGroup::Main) => self.light_state.main_road_phase(),
        }
    }

    /// Whether vehicles on `lane` must hold at its stop line.
    pub fn lane_must_stop(&self, lane: &Lane) -> bool {
        match lane.stop_line.and_then(|i| self.stop_lines.get(i)) {
            Some(line) => match line.control {
                StopControl::StopSign => true,
                StopControl::Signal => self.signal_at(line).requires_stop(),
            },
            None => false,
        }
    }

    /// Axis-aligned `(min, max)` box of the lanes expanded by the roadside margin.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for lane in &self.lanes {
            let m = lane.half_width() + ROADSIDE_MARGIN;
            for p in lane.centerline.points() {
                lo = Vec2::new(lo.x.min(p.x - m), lo.y.min(p.y - m));
                hi = Vec2::new(hi.x.max(p.x + m), hi.y.max(p.y + m));
            }
        }
        (lo, hi)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (lo, hi) = self.bounding_box();
        p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
    }

    /// Distance by which `p` lies outside every lane corridor.
    pub fn off_road_excess(&self, p: Vec2) -> f64 {
        self.lanes.iter().map(|l| l.excess(p)).fold(f64::INFINITY, f64::min).min(f64::MAX)
    }
}

macro_rules! text_impls {
    ($($t:ty),+) => {$(
        impl std::fmt::Display for $t {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl std::str::FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                Self::ALL
                    .into_iter()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| format!("unknown {} `{}`", stringify!($t), s))
            }
        }
    )+};
}

text_impls!(RoadType, LightState);
