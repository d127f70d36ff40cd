//! Built-in road templates, one per road type. The ego always starts at the
//! origin heading +x; lanes are 3.5 m wide and traffic keeps right.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::geom::{Polyline, Vec2};
use crate::model::{Lane, LaneRole, LightState, RoadType, Route, SceneContext, SignalGroup, SpeedLimits, StopControl, StopLine};

pub const LANE_WIDTH: f64 = 3.5;
/// Arc length along the route from which placement offsets are measured.
pub const PLACEMENT_ANCHOR: f64 = 45.0;

#[derive(Clone, Copy, Debug)]
pub enum Piece {
    Line(f64),
    /// Radius and signed turn angle, positive to the left.
    Arc(f64, f64),
}

/// Samples a path made of `pieces`, shifted `offset` metres to the left of
/// travel.
pub fn build_path(start: Vec2, heading: f64, pieces: &[Piece], offset: f64) -> Polyline {
    let mut pts = Vec::new();
    let mut p = start;
    let mut h = heading;
    let shift = |p: Vec2, h: f64| p + Vec2::from_angle(h).perp() * offset;
    pts.push(shift(p, h));
    for piece in pieces {
        match *piece {
            Piece::Line(len) => {
                p = p + Vec2::from_angle(h) * len;
                pts.push(shift(p, h));
            }
            Piece::Arc(r, angle) => {
                let steps = ((angle.abs() / (2.0f64).to_radians()).ceil() as usize).max(1);
                let side = angle.signum();
                let center = p + Vec2::from_angle(h).perp() * (r * side);
                let start_dir = p - center;
                for k in 1..=steps {
                    let a = angle * k as f64 / steps as f64;
                    let q = center + start_dir.rotate(a);
                    pts.push(shift(q, h + a));
                }
                h += angle;
                p = center + start_dir.rotate(angle);
            }
        }
    }
    Polyline::new(pts)
}

fn reversed(p: Polyline) -> Polyline {
    let mut pts = p.points().to_vec();
    pts.reverse();
    Polyline::new(pts)
}

fn lane(id: &str, role: LaneRole, centerline: Polyline, spawn: Option<(f64, f64)>, stop_line: Option<usize>) -> Lane {
    Lane { id: id.into(), role, centerline, width: LANE_WIDTH, spawn, stop_line }
}

fn signal(a: (f64, f64), b: (f64, f64), group: SignalGroup) -> StopLine {
    StopLine { a: Vec2::new(a.0, a.1), b: Vec2::new(b.0, b.1), control: StopControl::Signal, group }
}

/// A road type's scene plus the reference points used to place adversaries.
#[derive(Clone, Debug)]
pub struct RoadTemplate {
    pub context: SceneContext,
    pub anchor: f64,
    /// Route arc length of the junction or crosswalk where crossing traffic
    /// meets the ego path.
    pub junction: f64,
    /// Whether the template carries traffic signals at all.
    pub signalized: bool,
    /// Lanes crossing the route from the right and from the left.
    pub cross_right: Option<String>,
    pub cross_left: Option<String>,
}

impl RoadTemplate {
    pub fn with_light(&self, light: LightState) -> SceneContext {
        let mut ctx = self.context.clone();
        ctx.light_state = light;
        ctx
    }

    pub fn has_lane(&self, role: LaneRole) -> bool {
        self.context.lanes.iter().any(|l| l.role == role)
    }
}

#[derive(Clone, Debug)]
pub struct RoadLibrary {
    templates: BTreeMap<RoadType, RoadTemplate>,
}

fn context(road_type: RoadType, lanes: Vec<Lane>, stop_lines: Vec<StopLine>, route: Polyline) -> SceneContext {
    SceneContext {
        road_type,
        light_state: LightState::None,
        lanes,
        stop_lines,
        route: Route::new(route),
        obstacles: Vec::new(),
        speed_limits: SpeedLimits::default(),
    }
}

fn main_road(len: f64, right_spawn: (f64, f64), oncoming_spawn: (f64, f64), stops: (Option<usize>, Option<usize>)) -> Vec<Lane> {
    let start = Vec2::new(-60.0, 0.0);
    let pieces = [Piece::Line(len)];
    vec![
        lane("ego", LaneRole::Ego, build_path(start, 0.0, &pieces, 0.0), None, stops.0),
        lane("right", LaneRole::Adjacent, build_path(start, 0.0, &pieces, -LANE_WIDTH), Some(right_spawn), stops.0),
        lane("oncoming", LaneRole::Oncoming, reversed(build_path(start, 0.0, &pieces, LANE_WIDTH)), Some(oncoming_spawn), stops.1),
    ]
}

fn straight() -> RoadTemplate {
    let lanes = main_road(280.0, (20.0, 160.0), (20.0, 200.0), (Some(0), Some(1)));
    let stops = vec![
        signal((68.0, -5.25), (68.0, 1.75), SignalGroup::Main),
        signal((72.0, 1.75), (72.0, 5.25), SignalGroup::Main),
    ];
    let route = build_path(Vec2::zero(), 0.0, &[Piece::Line(140.0)], 0.0);
    RoadTemplate {
        context: context(RoadType::Straight, lanes, stops, route),
        anchor: PLACEMENT_ANCHOR,
        junction: 70.0,
        signalized: true,
        cross_right: None,
        cross_left: None,
    }
}

fn intersection() -> RoadTemplate {
    let mut lanes = main_road(260.0, (20.0, 150.0), (20.0, 180.0), (Some(0), Some(1)));
    let half = 0.5 * LANE_WIDTH;
    lanes.push(lane(
        "cross-north",
        LaneRole::Cross,
        build_path(Vec2::new(70.0 + half, -100.0), FRAC_PI_2, &[Piece::Line(200.0)], 0.0),
        Some((10.0, 80.0)),
        Some(2),
    ));
    lanes.push(lane(
        "cross-south",
        LaneRole::Cross,
        build_path(Vec2::new(70.0 - half, 100.0), -FRAC_PI_2, &[Piece::Line(200.0)], 0.0),
        Some((10.0, 80.0)),
        Some(3),
    ));
    let stops = vec![
        signal((64.0, -5.25), (64.0, 1.75), SignalGroup::Main),
        signal((76.0, 1.75), (76.0, 5.25), SignalGroup::Main),
        signal((70.0, -7.0), (73.5, -7.0), SignalGroup::Cross),
        signal((66.5, 7.0), (70.0, 7.0), SignalGroup::Cross),
    ];
    let route = build_path(Vec2::zero(), 0.0, &[Piece::Line(140.0)], 0.0);
    RoadTemplate {
        context: context(RoadType::Intersection, lanes, stops, route),
        anchor: PLACEMENT_ANCHOR,
        junction: 70.0,
        signalized: true,
        cross_right: Some("cross-north".into()),
        cross_left: Some("cross-south".into()),
    }
}

fn t_junction() -> RoadTemplate {
    let mut lanes = main_road(260.0, (20.0, 150.0), (20.0, 180.0), (None, None));
    let half = 0.5 * LANE_WIDTH;
    lanes.push(lane(
        "side-in",
        LaneRole::Cross,
        build_path(Vec2::new(70.0 + half, -100.0), FRAC_PI_2, &[Piece::Line(100.0 - 3.0 * half)], 0.0),
        Some((10.0, 80.0)),
        Some(0),
    ));
    lanes.push(lane(
        "side-out",
        LaneRole::Cross,
        build_path(Vec2::new(70.0 - half, -3.0 * half), -FRAC_PI_2, &[Piece::Line(100.0 - 3.0 * half)], 0.0),
        None,
        None,
    ));
    let stops = vec![StopLine {
        a: Vec2::new(70.0, -7.0),
        b: Vec2::new(73.5, -7.0),
        control: StopControl::StopSign,
        group: SignalGroup::Cross,
    }];
    let route = build_path(Vec2::zero(), 0.0, &[Piece::Line(140.0)], 0.0);
    RoadTemplate {
        context: context(RoadType::TJunction, lanes, stops, route),
        anchor: PLACEMENT_ANCHOR,
        junction: 70.0,
        signalized: false,
        cross_right: Some("side-in".into()),
        cross_left: None,
    }
}

fn roundabout() -> RoadTemplate {
    let r = 18.0;
    let ego_pieces = [Piece::Line(130.0), Piece::Arc(r, FRAC_PI_2), Piece::Line(80.0)];
    let lanes = vec![
        lane("ego", LaneRole::Ego, build_path(Vec2::new(-60.0, 0.0), 0.0, &ego_pieces, 0.0), None, None),
        lane(
            "oncoming",
            LaneRole::Oncoming,
            build_path(Vec2::new(55.0, LANE_WIDTH), PI, &[Piece::Line(115.0)], 0.0),
            Some((10.0, 100.0)),
            None,
        ),
        lane(
            "exit-oncoming",
            LaneRole::Oncoming,
            build_path(Vec2::new(88.0 + LANE_WIDTH, 98.0), -FRAC_PI_2, &[Piece::Line(73.0)], 0.0),
            Some((5.0, 40.0)),
            None,
        ),
        lane("ring", LaneRole::Cross, build_path(Vec2::new(70.0, 0.0), 0.0, &[Piece::Arc(r, 2.0 * PI)], 0.0), None, None),
    ];
    let route = build_path(Vec2::zero(), 0.0, &[Piece::Line(70.0), Piece::Arc(r, FRAC_PI_2), Piece::Line(40.0)], 0.0);
    RoadTemplate {
        context: context(RoadType::Roundabout, lanes, Vec::new(), route),
        anchor: PLACEMENT_ANCHOR,
        junction: 70.0,
        signalized: false,
        cross_right: None,
        cross_left: None,
    }
}

fn curve() -> RoadTemplate {
    let r = 60.0;
    let start = Vec2::new(-60.0, 0.0);
    let pieces = [Piece::Line(90.0), Piece::Arc(r, FRAC_PI_2), Piece::Line(100.0)];
    let lanes = vec![
        lane("ego", LaneRole::Ego, build_path(start, 0.0, &pieces, 0.0), None, None),
        lane("right", LaneRole::Adjacent, build_path(start, 0.0, &pieces, -LANE_WIDTH), Some((20.0, 170.0)), None),
        lane("oncoming", LaneRole::Oncoming, reversed(build_path(start, 0.0, &pieces, LANE_WIDTH)), Some((20.0, 200.0)), None),
    ];
    let route = build_path(Vec2::zero(), 0.0, &[Piece::Line(30.0), Piece::Arc(r, FRAC_PI_2), Piece::Line(30.0)], 0.0);
    RoadTemplate {
        context: context(RoadType::Curve, lanes, Vec::new(), route),
        anchor: PLACEMENT_ANCHOR,
        junction: 70.0,
        signalized: false,
        cross_right: None,
        cross_left: None,
    }
}

impl RoadLibrary {
    /// The five shipped templates.
    pub fn standard() -> Self {
        let templates = [straight(), intersection(), t_junction(), roundabout(), curve()]
            .into_iter()
            .map(|t| (t.context.road_type, t))
            .collect();
        RoadLibrary { templates }
    }

    pub fn get(&self, road: RoadType) -> Option<&RoadTemplate> {
        self.templates.get(&road)
    }

    pub fn road_types(&self) -> impl Iterator<Item = RoadType> + '_ {
        self.templates.keys().copied()
    }
}

impl Default for RoadLibrary {
    fn default() -> Self {
        RoadLibrary::standard()
    }
}
