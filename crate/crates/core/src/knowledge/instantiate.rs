use serde::{Deserialize, Serialize};

use crate::geom::{Polyline, Vec2};
use crate::knowledge::kb::Placement;
use crate::knowledge::parse::Structured;
use crate::knowledge::KnowledgeError;
use crate::model::{
    AgentClass, AgentKind, AgentSpec, Behavior, LaneRole, MetaScenario, Pose, SceneContext, StaticObstacle, Trajectory,
    DEFAULT_DT,
};
use crate::roads::{build_path, Piece, RoadLibrary, RoadTemplate, LANE_WIDTH};

/// Distance between the nominal ego front and a waiting adversary at which a
/// sudden emergence starts (m).
pub const TRIGGER_DISTANCE: f64 = 15.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstantiateParams {
    pub trigger_distance: f64,
    /// Ego speed assumed when timing scripted adversaries (m/s).
    pub nominal_speed: f64,
    pub dt: f64,
    /// Seconds added after the nominal arrival at the goal.
    pub tail: f64,
}

impl Default for InstantiateParams {
    fn default() -> Self {
        InstantiateParams { trigger_distance: TRIGGER_DISTANCE, nominal_speed: 10.0, dt: DEFAULT_DT, tail: 4.0 }
    }
}

/// Cruising speed of a scripted agent following a lane or crossing (m/s).
fn travel_speed(class: AgentClass) -> f64 {
    match class {
        AgentClass::Car | AgentClass::Truck => 8.0,
        AgentClass::Cyclist | AgentClass::Scooter => 5.0,
        AgentClass::Pedestrian => 1.5,
    }
}

const RED_LIGHT_SPEED: f64 = 12.0;
const CROSS_SPEED: f64 = 10.0;
const TURN_SPEED: f64 = 7.0;
const TURN_RADIUS: f64 = 10.0;
const BRAKE_DECEL: f64 = 8.0;
/// Centre gap to the nominal ego at which a lead vehicle brakes (m).
const BRAKE_GAP: f64 = 15.0;
/// Centre gap to the nominal ego when a cut-in completes (m).
const CUT_IN_GAP: f64 = 10.0;
const CUT_IN_DURATION: f64 = 2.0;

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

struct Layout<'a> {
    tpl: &'a RoadTemplate,
    ctx: &'a SceneContext,
    route: &'a Polyline,
    p: &'a InstantiateParams,
    class: AgentClass,
    /// Interaction arc length along the route.
    s_i: f64,
    ego_half: f64,
    right_edge: f64,
    left_edge: f64,
}

type Motion = Box<dyn Fn(f64) -> Vec2>;

impl Layout<'_> {
    fn infeasible(&self, what: &str) -> KnowledgeError {
        KnowledgeError::Instantiate(format!("{what} on road {}", self.ctx.road_type.as_str()))
    }

    fn width(&self) -> f64 {
        self.class.default_footprint().width
    }

    fn half_length(&self) -> f64 {
        0.5 * self.class.default_footprint().length
    }

    /// Route point shifted `lateral` metres to the left.
    fn at(&self, s: f64, lateral: f64) -> Vec2 {
        let (p, t) = self.route.sample(s);
        p + t.perp() * lateral
    }

    fn tangent(&self, s: f64) -> Vec2 {
        self.route.sample(s).1
    }

    /// Time at which the nominal ego front reaches route arc `s`.
    fn ego_front_time(&self, s: f64) -> f64 {
        (s - self.ego_half) / self.p.nominal_speed
    }

    fn require(&self, role: LaneRole, what: &str) -> Result<(), KnowledgeError> {
        if self.tpl.has_lane(role) {
            Ok(())
        } else {
            Err(self.infeasible(what))
        }
    }

    /// Parked truck hiding the roadside adversary; it stands in the kerb lane
    /// when there is one, otherwise on the verge.
    fn occluder(&self) -> (StaticObstacle, f64) {
        let fp = AgentClass::Truck.default_footprint();
        let lateral = if self.tpl.has_lane(LaneRole::Adjacent) {
            -(0.5 * LANE_WIDTH + LANE_WIDTH) + 0.5 * fp.width
        } else {
            -(0.5 * LANE_WIDTH + 0.3 + 0.5 * fp.width)
        };
        let s = self.s_i - (self.half_length() + 0.3 + 0.5 * fp.length);
        let c = self.at(s, lateral);
        let obstacle = StaticObstacle {
            id: "parked-truck".into(),
            class: AgentClass::Truck,
            footprint: fp,
            pose: Pose::new(c.x, c.y, self.tangent(s).angle()),
        };
        (obstacle, lateral)
    }

    /// Lateral start of a kerbside agent and any occluder it hides behind.
    fn side_start(&self, placement: Placement) -> Result<(f64, Option<StaticObstacle>), KnowledgeError> {
        let margin = 1.0 + 0.5 * self.width();
        Ok(match placement {
            Placement::CrossingRight => (-(self.right_edge + margin), None),
            Placement::CrossingLeft => (self.left_edge + margin, None),
            Placement::OccludedRoadside => {
                let (o, lateral) = self.occluder();
                (lateral - 1.0, Some(o))
            }
            _ => return Err(self.infeasible(&format!("placement {placement} cannot cross the road"))),
        })
    }

    /// Lateral target on the far side of the road.
    fn far_side(&self, start: f64) -> f64 {
        let margin = 1.0 + 0.5 * self.width();
        if start < 0.0 {
            self.left_edge + margin
        } else {
            -(self.right_edge + margin)
        }
    }

    /// Lane-bound start for lane placements: lateral offset and direction sign.
    fn lane_start(&self, placement: Placement) -> Result<(f64, f64), KnowledgeError> {
        match placement {
            Placement::AheadSameLane => Ok((0.0, 1.0)),
            Placement::AheadAdjacentLane => {
                self.require(LaneRole::Adjacent, "ahead-adjacent-lane needs an adjacent lane")?;
                Ok((-LANE_WIDTH, 1.0))
            }
            Placement::Oncoming => {
                self.require(LaneRole::Oncoming, "oncoming needs an oncoming lane")?;
                Ok((LANE_WIDTH, -1.0))
            }
            other => Err(self.infeasible(&format!("placement {other} is not a lane position"))),
        }
    }

    /// Crossing lane for vehicles entering from `placement`'s side.
    fn cross_lane(&self, placement: Placement) -> Result<&Polyline, KnowledgeError> {
        let id = match placement {
            Placement::CrossingRight | Placement::OccludedRoadside => self.tpl.cross_right.as_ref(),
            Placement::CrossingLeft => self.tpl.cross_left.as_ref(),
            _ => None,
        };
        id.and_then(|id| self.ctx.lane(id))
            .map(|l| &l.centerline)
            .ok_or_else(|| self.infeasible(&format!("no crossing lane for {placement}")))
    }

    /// Motion along `path` passing its route crossing when the nominal ego
    /// front reaches it.
    fn synced_path(&self, path: Polyline, speed: f64) -> Result<Motion, KnowledgeError> {
        let s_c = crossing_arc(&path, self.route).ok_or_else(|| self.infeasible("path never meets the route"))?;
        let s_route = self.route.project(path.point_at(s_c)).arc_length;
        let t_star = self.ego_front_time(s_route);
        Ok(Box::new(move |t| path.point_at(s_c + speed * (t - t_star))))
    }

    /// Walk or ride straight across the route at `s_i`, reaching the route
    /// centreline when the nominal ego front arrives.
    fn synced_crossing(&self, start: f64, speed: f64) -> Motion {
        let end = self.far_side(start);
        let t_star = self.ego_front_time(self.s_i);
        let t0 = t_star - start.abs() / speed;
        self.crossing_from(start, end, speed, t0)
    }

    fn crossing_from(&self, start: f64, end: f64, speed: f64, t0: f64) -> Motion {
        let (p, tan) = self.route.sample(self.s_i);
        let n = tan.perp();
        let dir = (end - start).signum();
        let span = (end - start).abs();
        Box::new(move |t| {
            let d = (speed * (t - t0)).clamp(0.0, span);
            p + n * (start + dir * d)
        })
    }

    fn motion(&self, placement: Placement, behavior: Behavior) -> Result<(Motion, Option<StaticObstacle>, f64), KnowledgeError> {
        let cap = self.ctx.speed_limits.for_class(self.class);
        let v_travel = travel_speed(self.class).min(cap);
        let s_i = self.s_i;
        let tangent_heading = self.tangent(s_i).angle();
        let vehicle = self.class.is_vehicle();
        match behavior {
            Behavior::Stationary => {
                let (at, heading, obstacle) = match placement {
                    Placement::AheadSameLane | Placement::AheadAdjacentLane | Placement::Oncoming => {
                        let (lat, dir) = self.lane_start(placement)?;
                        let h = if dir > 0.0 { tangent_heading } else { tangent_heading + std::f64::consts::PI };
                        (self.at(s_i, lat), h, None)
                    }
                    _ => {
                        let (lat, o) = self.side_start(placement)?;
                        let h = self.tangent(s_i).perp().angle() + if lat > 0.0 { std::f64::consts::PI } else { 0.0 };
                        (self.at(s_i, lat), h, o)
                    }
                };
                Ok((Box::new(move |_| at), obstacle, heading))
            }
            Behavior::LaneFollow => match placement {
                Placement::AheadSameLane | Placement::AheadAdjacentLane | Placement::Oncoming => {
                    let (lat, dir) = self.lane_start(placement)?;
                    let route = self.route.clone();
                    Ok((
                        Box::new(move |t| {
                            let (p, tan) = route.sample(s_i + dir * v_travel * t);
                            p + tan.perp() * lat
                        }),
                        None,
                        tangent_heading,
                    ))
                }
                _ => self.motion(placement, Behavior::Crossing),
            },
            Behavior::Crossing | Behavior::RedLightRun if vehicle => {
                let speed = if behavior == Behavior::RedLightRun { RED_LIGHT_SPEED } else { CROSS_SPEED }.min(cap);
                if placement == Placement::Oncoming {
                    self.require(LaneRole::Oncoming, "oncoming needs an oncoming lane")?;
                    // Straight through on the oncoming lane, passing the
                    // interaction point as the nominal ego front does.
                    let t_star = self.ego_front_time(s_i);
                    let route = self.route.clone();
                    return Ok((
                        Box::new(move |t| {
                            let (p, tan) = route.sample(s_i - speed * (t - t_star));
                            p + tan.perp() * LANE_WIDTH
                        }),
                        None,
                        tangent_heading,
                    ));
                }
                let path = self.cross_lane(placement)?.clone();
                let obstacle = (placement == Placement::OccludedRoadside).then(|| self.occluder().0);
                Ok((self.synced_path(path, speed)?, obstacle, tangent_heading))
            }
            Behavior::Crossing | Behavior::RedLightRun => {
                let (start, obstacle) = self.side_start(placement)?;
                Ok((self.synced_crossing(start, v_travel), obstacle, tangent_heading))
            }
            Behavior::SuddenEmergence => {
                let (start, obstacle) = self.side_start(placement)?;
                let end = self.far_side(start);
                let t0 = ((s_i - self.ego_half - self.p.trigger_distance) / self.p.nominal_speed).max(0.0);
                Ok((self.crossing_from(start, end, cap, t0), obstacle, tangent_heading))
            }
            Behavior::CutIn => match placement {
                Placement::AheadAdjacentLane => {
                    self.require(LaneRole::Adjacent, "cut-in needs an adjacent lane")?;
                    let t_c = (s_i - CUT_IN_GAP) / self.p.nominal_speed;
                    let route = self.route.clone();
                    Ok((
                        Box::new(move |t| {
                            let (p, tan) = route.sample(s_i + v_travel * (t - t_c));
                            let k = smoothstep((t - (t_c - CUT_IN_DURATION)) / CUT_IN_DURATION);
                            p + tan.perp() * (-LANE_WIDTH * (1.0 - k))
                        }),
                        None,
                        tangent_heading,
                    ))
                }
                Placement::Oncoming => {
                    self.require(LaneRole::Oncoming, "drift needs an oncoming lane")?;
                    let t_m = (s_i - self.ego_half - self.half_length()) / self.p.nominal_speed;
                    let route = self.route.clone();
                    let inner = 0.8;
                    Ok((
                        Box::new(move |t| {
                            let (p, tan) = route.sample(s_i - v_travel * (t - t_m));
                            let k_in = smoothstep((t - (t_m - 1.8)) / 1.5);
                            let k_out = smoothstep((t - (t_m + 0.7)) / 1.5);
                            let lat = LANE_WIDTH - (LANE_WIDTH - inner) * (k_in - k_out);
                            p + tan.perp() * lat
                        }),
                        None,
                        tangent_heading + std::f64::consts::PI,
                    ))
                }
                other => Err(self.infeasible(&format!("cut-in from {other}"))),
            },
            Behavior::SuddenBrake => {
                let lat = match placement {
                    Placement::AheadSameLane | Placement::AheadAdjacentLane => self.lane_start(placement)?.0,
                    other => return Err(self.infeasible(&format!("sudden-brake from {other}"))),
                };
                let t_b = ((s_i - BRAKE_GAP) / self.p.nominal_speed).max(0.0);
                let route = self.route.clone();
                Ok((
                    Box::new(move |t| {
                        let s = if t < t_b {
                            s_i - v_travel * (t_b - t)
                        } else {
                            let tau = (t - t_b).min(v_travel / BRAKE_DECEL);
                            s_i + v_travel * tau - 0.5 * BRAKE_DECEL * tau * tau
                        };
                        let (p, tan) = route.sample(s);
                        p + tan.perp() * lat
                    }),
                    None,
                    tangent_heading,
                ))
            }
            Behavior::LeftTurn => {
                if placement != Placement::Oncoming || !vehicle {
                    return Err(self.infeasible(&format!("left-turn by a {} from {placement}", self.class)));
                }
                self.require(LaneRole::Oncoming, "left-turn needs an oncoming lane")?;
                if self.tpl.cross_right.is_none() && self.tpl.cross_left.is_none() {
                    return Err(self.infeasible("left-turn needs a junction"));
                }
                // Oncoming lane, quarter arc to the left, exit on the near
                // side of the junction.
                let j = self.tpl.junction;
                let s_turn = j - 0.5 * LANE_WIDTH + TURN_RADIUS;
                let lead = 80.0;
                let start = self.at(s_turn + lead, LANE_WIDTH);
                let heading = self.tangent(s_turn).angle() + std::f64::consts::PI;
                let path = build_path(
                    start,
                    heading,
                    &[Piece::Line(lead), Piece::Arc(TURN_RADIUS, std::f64::consts::FRAC_PI_2), Piece::Line(100.0)],
                    0.0,
                );
                Ok((self.synced_path(path, TURN_SPEED.min(cap))?, None, heading))
            }
        }
    }
}

/// First arc length where `path` crosses the route centreline, found by a
/// sign change of the lateral offset followed by bisection. The path is
/// extrapolated 30 m past its end.
pub fn crossing_arc(path: &Polyline, route: &Polyline) -> Option<f64> {
    let route_len = route.length();
    let lateral = |s: f64| {
        let pr = route.project(path.point_at(s));
        (pr.arc_length > 1e-6 && pr.arc_length < route_len - 1e-6).then_some(pr.lateral)
    };
    let step = 0.25;
    let end = path.length() + 30.0;
    let mut s = 0.0;
    let mut prev = lateral(s);
    while s < end {
        let next_s = s + step;
        let next = lateral(next_s);
        if let (Some(a), Some(b)) = (prev, next) {
            if a == 0.0 {
                return Some(s);
            }
            if a.signum() != b.signum() {
                let (mut lo, mut hi) = (s, next_s);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    match lateral(mid) {
                        Some(m) if m.signum() == a.signum() => lo = mid,
                        _ => hi = mid,
                    }
                }
                return Some(0.5 * (lo + hi));
            }
        }
        s = next_s;
        prev = next;
    }
    None
}

pub fn instantiate_meta(s: &Structured, lib: &RoadLibrary) -> Result<MetaScenario, KnowledgeError> {
    instantiate_meta_with(s, lib, &InstantiateParams::default())
}

/// Builds the scene for `s.road` under light `s.light`, places the adversary
/// `s.offset` metres past the template anchor and scripts its motion.
/// Adversary timing assumes the ego cruises at `nominal_speed` from the start.
pub fn instantiate_meta_with(
    s: &Structured,
    lib: &RoadLibrary,
    p: &InstantiateParams,
) -> Result<MetaScenario, KnowledgeError> {
    if !(p.nominal_speed > 0.0 && p.dt > 0.0 && p.trigger_distance >= 0.0 && p.tail >= 0.0) {
        return Err(KnowledgeError::Domain(format!("bad instantiation parameters {p:?}")));
    }
    let tpl = lib
        .get(s.road)
        .ok_or_else(|| KnowledgeError::Instantiate(format!("road library has no {} template", s.road.as_str())))?;
    let mut ctx = tpl.with_light(s.light);
    let route = ctx.route.path.clone();
    let route_len = route.length();
    let s_i = tpl.anchor + s.offset;
    if !(s.offset.is_finite() && s.offset >= 0.0 && s_i < route_len - 5.0) {
        return Err(KnowledgeError::Instantiate(format!(
            "offset {} m puts the adversary past the {:.0} m route",
            s.offset, route_len
        )));
    }
    let ego_fp = AgentClass::Car.default_footprint();
    let layout = Layout {
        tpl,
        ctx: &ctx,
        route: &route,
        p,
        class: s.class,
        s_i,
        ego_half: 0.5 * ego_fp.length,
        right_edge: 0.5 * LANE_WIDTH + if tpl.has_lane(LaneRole::Adjacent) { LANE_WIDTH } else { 0.0 },
        left_edge: 0.5 * LANE_WIDTH + if tpl.has_lane(LaneRole::Oncoming) { LANE_WIDTH } else { 0.0 },
    };
    let (motion, obstacle, fallback_heading) = layout.motion(s.placement, s.behavior)?;

    let frames = (route_len / p.nominal_speed / p.dt).ceil() as usize + (p.tail / p.dt).round() as usize;
    let points: Vec<Vec2> = (0..frames).map(|k| motion(k as f64 * p.dt)).collect();
    let trajectory = Trajectory::new(p.dt, points);
    let moves = trajectory.points.windows(2).any(|w| (w[1] - w[0]).norm() > 1e-9);
    let heading = if moves { trajectory.heading(0) } else { fallback_heading };
    let start = trajectory.points[0];
    let adversary = AgentSpec::new("adversary", AgentKind::Adversary, s.class, Pose::new(start.x, start.y, heading), s.behavior);
    let origin = route.point_at(0.0);
    let ego = AgentSpec::new(
        "ego",
        AgentKind::Ego,
        AgentClass::Car,
        Pose::new(origin.x, origin.y, route.heading_at(0.0)),
        Behavior::LaneFollow,
    );
    ctx.obstacles.extend(obstacle);
    Ok(MetaScenario { ego, adversary, context: ctx, adversary_trajectory: trajectory })
}
