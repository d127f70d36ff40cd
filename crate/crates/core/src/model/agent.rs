use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geom::{OrientedRect, Vec2};

macro_rules! vocabulary {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| format!("unknown {} `{}`", stringify!($name), s))
            }
        }
    };
}

pub(crate) use vocabulary;

vocabulary!(
    AgentKind {
        Ego => "ego",
        Adversary => "adversary",
        Background => "background",
    }
);

vocabulary!(
    /// Agent class `c`.
    AgentClass {
        Car => "car",
        Truck => "truck",
        Pedestrian => "pedestrian",
        Cyclist => "cyclist",
        Scooter => "scooter",
    }
);

vocabulary!(
    /// Closed behavior vocabulary `b`.
    Behavior {
        LaneFollow => "lane-follow",
        Stationary => "stationary",
        Crossing => "crossing",
        SuddenEmergence => "sudden-emergence",
        RedLightRun => "red-light-run",
        CutIn => "cut-in",
        SuddenBrake => "sudden-brake",
        LeftTurn => "left-turn",
    }
);

impl AgentClass {
    /// Length x width in meters.
    pub fn default_footprint(self) -> Footprint {
        match self {
            AgentClass::Car => Footprint::new(4.5, 1.8),
            AgentClass::Truck => Footprint::new(8.0, 2.5),
            AgentClass::Pedestrian => Footprint::new(0.6, 0.6),
            AgentClass::Cyclist => Footprint::new(1.8, 0.6),
            AgentClass::Scooter => Footprint::new(1.5, 0.6),
        }
    }

    pub fn is_vehicle(self) -> bool {
        matches!(self, AgentClass::Car | AgentClass::Truck)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub fn new(length: f64, width: f64) -> Self {
        Footprint { length, width }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose { x, y, heading }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: String,
    pub kind: AgentKind,
    pub class: AgentClass,
    pub footprint: Footprint,
    pub initial_pose: Pose,
    pub behavior: Behavior,
}

impl AgentSpec {
    pub fn new(id: impl Into<String>, kind: AgentKind, class: AgentClass, pose: Pose, behavior: Behavior) -> Self {
        AgentSpec {
            id: id.into(),
            kind,
            class,
            footprint: class.default_footprint(),
            initial_pose: pose,
            behavior,
        }
    }

    pub fn rect_at(&self, center: Vec2, heading: f64) -> OrientedRect {
        OrientedRect::new(center, heading, self.footprint.length, self.footprint.width)
    }
}

/// Class-specific speed caps in m/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedLimits {
    pub car: f64,
    pub truck: f64,
    pub pedestrian: f64,
    pub cyclist: f64,
    pub scooter: f64,
}

impl Default for SpeedLimits {
    fn default() -> Self {
        SpeedLimits { car: 20.0, truck: 20.0, pedestrian: 3.0, cyclist: 8.0, scooter: 8.0 }
    }
}

impl SpeedLimits {
    pub fn for_class(&self, class: AgentClass) -> f64 {
        match class {
            AgentClass::Car => self.car,
            AgentClass::Truck => self.truck,
            AgentClass::Pedestrian => self.pedestrian,
            AgentClass::Cyclist => self.cyclist,
            AgentClass::Scooter => self.scooter,
        }
    }
}
