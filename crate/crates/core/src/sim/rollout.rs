use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, OrientedRect, Vec2};
use crate::model::{
    AdvScenario, AgentKind, AgentSpec, Behavior, Footprint, Lane, LightState, Route, SceneContext, StopControl, Trajectory,
};
use crate::sim::sensor::SensorModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoPolicyConfig {
    pub cruise_speed: f64,
    pub max_brake: f64,
    pub reaction_delay: f64,
    pub detection_range: f64,
    pub fov: f64,
    pub lookahead: f64,
    /// Throttle limit (m/s²).
    pub max_accel: f64,
    /// Time-to-collision horizon for braking (s).
    pub ttc_horizon: f64,
}

impl Default for EgoPolicyConfig {
    fn default() -> Self {
        EgoPolicyConfig {
            cruise_speed: 10.0,
            max_brake: 6.0,
            reaction_delay: 0.3,
            detection_range: 50.0,
            fov: std::f64::consts::PI,
            lookahead: 6.0,
            max_accel: 2.0,
            ttc_horizon: 2.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub include_adversary: bool,
    pub t_max: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { include_adversary: true, t_max: 600 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Goal,
    Collision,
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    RedLight,
    StopSign,
    LaneInvasion,
    OffRoad,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleEvent {
    pub frame: usize,
    pub kind: RuleKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub frame: usize,
    pub other: String,
    pub contact: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    pub yaw_rate: f64,
    pub visible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutLog {
    pub dt: f64,
    pub frames: Vec<FrameRecord>,
    pub collisions: Vec<CollisionEvent>,
    pub rule_events: Vec<RuleEvent>,
    pub termination: Termination,
    /// Frame at which the adversary was first seen.
    pub first_detection: Option<usize>,
}

impl RolloutLog {
    pub fn collided(&self) -> bool {
        !self.collisions.is_empty()
    }

    pub fn count(&self, kind: RuleKind) -> usize {
        self.rule_events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("rollout log serializes");
        s.push('\n');
        s
    }

    /// Per-frame CSV: `frame,x,y,speed,accel,yaw_rate,visible`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,x,y,speed,accel,yaw_rate,visible\n");
        for f in &self.frames {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                f.frame, f.x, f.y, f.speed, f.accel, f.yaw_rate, f.visible as u8
            ));
        }
        out
    }
}

struct Scripted<'a> {
    spec: &'a AgentSpec,
    traj: &'a Trajectory,
    headings: Vec<f64>,
    moves: bool,
}

impl<'a> Scripted<'a> {
    fn new(spec: &'a AgentSpec, traj: &'a Trajectory) -> Self {
        let moves = traj.points.windows(2).any(|w| w[0] != w[1]);
        Scripted { spec, traj, headings: traj.headings(), moves }
    }

    fn heading(&self, f: usize) -> f64 {
        if !self.moves || self.headings.is_empty() {
            self.spec.initial_pose.heading
        } else {
            self.headings[f.min(self.headings.len() - 1)]
        }
    }

    fn velocity(&self, f: usize) -> Vec2 {
        if f + 1 < self.traj.len() {
            (self.traj.points[f + 1] - self.traj.points[f]) * (1.0 / self.traj.dt)
        } else {
            Vec2::zero()
        }
    }

    fn yaw_rate(&self, f: usize) -> f64 {
        if f + 1 < self.traj.len() {
            wrap_angle(self.heading(f + 1) - self.heading(f)) / self.traj.dt
        } else {
            0.0
        }
    }

    fn rect(&self, f: usize) -> OrientedRect {
        self.spec.rect_at(self.traj.at(f), self.heading(f))
    }
}

/// Footprints of `a` for the next `steps` frames after `f`. Lane-following
/// agents are advanced along the lane they occupy at their current speed and
/// offset; everything else keeps its speed and turn rate.
fn predict(a: &Scripted, f: usize, now: OrientedRect, lanes: &[Lane], steps: usize) -> Vec<OrientedRect> {
    let dt = a.traj.dt;
    let mut vel = a.velocity(f);
    let speed = vel.norm();
    if a.spec.behavior == Behavior::LaneFollow {
        let heading = a.heading(f);
        let lane = lanes
            .iter()
            .map(|l| (l, l.centerline.project(now.center)))
            .filter(|(l, pr)| {
                pr.lateral.abs() <= l.half_width() && wrap_angle(heading - pr.tangent.angle()).abs() < FRAC_PI_4
            })
            .min_by(|x, y| x.1.lateral.abs().total_cmp(&y.1.lateral.abs()));
        if let Some((l, pr)) = lane {
            return (1..=steps)
                .map(|k| {
                    let (c, t) = l.centerline.sample(pr.arc_length + speed * k as f64 * dt);
                    OrientedRect { center: c + t.perp() * pr.lateral, heading: t.angle(), ..now }
                })
                .collect();
        }
    }
    let w = a.yaw_rate(f);
    let turn = Vec2::from_angle(w * dt);
    let mut r = now;
    (1..=steps)
        .map(|_| {
            r.center = r.center + vel * dt;
            r.heading += w * dt;
            vel = Vec2::new(vel.x * turn.x - vel.y * turn.y, vel.x * turn.y + vel.y * turn.x);
            r
        })
        .collect()
}

fn contact_point(a: &OrientedRect, b: &OrientedRect) -> Vec2 {
    let inside: Vec<Vec2> = a
        .corners()
        .into_iter()
        .filter(|&p| b.contains(p))
        .chain(b.corners().into_iter().filter(|&p| a.contains(p)))
        .collect();
    if inside.is_empty() {
        (a.center + b.center) * 0.5
    } else {
        inside.iter().fold(Vec2::zero(), |s, &p| s + p) * (1.0 / inside.len() as f64)
    }
}

fn segments_cross(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> bool {
    let d = p1 - p0;
    let e = q1 - q0;
    let denom = d.cross(e);
    if denom == 0.0 {
        return false;
    }
    let t = (q0 - p0).cross(e) / denom;
    let u = (q0 - p0).cross(d) / denom;
    (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)
}

/// Lateral distance of the ego's widest corner beyond the route lane edge.
/// Corners past either end of the route are measured against the extended
/// end segment.
fn route_invasion(route: &Route, rect: &OrientedRect, half_lane: f64) -> bool {
    rect.corners().iter().any(|&c| {
        let pr = route.path.project(c);
        (c - pr.point).dot(pr.tangent.perp()).abs() > half_lane
    })
}

pub fn simulate_closed_loop(s: &AdvScenario, p: &EgoPolicyConfig) -> RolloutLog {
    simulate_with(s, p, &SimOptions::default())
}

pub fn simulate_with(s: &AdvScenario, p: &EgoPolicyConfig, opts: &SimOptions) -> RolloutLog {
    let ctx: &SceneContext = &s.meta.context;
    let dt = s.dt();
    let route = &ctx.route;
    let route_len = route.length();
    let ego_spec = &s.meta.ego;
    let ego_fp: Footprint = ego_spec.footprint;
    let delay_frames = (p.reaction_delay / dt).round() as usize;
    let sensor = SensorModel { range: p.detection_range, fov: p.fov };
    let half_lane = ctx.ego_lane().map_or(1.75, |l| l.half_width());

    let mut agents: Vec<Scripted> = Vec::new();
    if opts.include_adversary {
        agents.push(Scripted::new(&s.meta.adversary, &s.meta.adversary_trajectory));
    }
    agents.extend(s.backgrounds.iter().map(|b| Scripted::new(&b.spec, &b.trajectory)));
    let adv_slot = opts.include_adversary.then_some(0);
    let statics: Vec<(String, OrientedRect)> = ctx
        .obstacles
        .iter()
        .map(|o| (o.id.clone(), OrientedRect::new(o.pose.position(), o.pose.heading, o.footprint.length, o.footprint.width)))
        .collect();

    // Stop line governing the ego lane, when its phase asks for a stop.
    let ego_stop = ctx
        .ego_lane()
        .filter(|l| ctx.lane_must_stop(l))
        .and_then(|l| l.stop_line)
        .and_then(|i| ctx.stop_lines.get(i))
        .map(|sl| route.path.project((sl.a + sl.b) * 0.5).arc_length);

    let mut pos = ego_spec.initial_pose.position();
    let mut heading = ego_spec.initial_pose.heading;
    let mut v = p.cruise_speed;
    let mut first_seen: Vec<Option<usize>> = vec![None; agents.len()];
    let mut frames = Vec::new();
    let mut collisions = Vec::new();
    let mut rule_events = Vec::new();
    let mut termination = Termination::Timeout;
    let mut invading = false;
    let mut off_road = false;
    let mut last_stop_frame: Option<usize> = None;

    for f in 0..opts.t_max {
        let ego_rect = OrientedRect::new(pos, heading, ego_fp.length, ego_fp.width);
        let rects: Vec<OrientedRect> = agents.iter().map(|a| a.rect(f)).collect();

        let hit = rects
            .iter()
            .enumerate()
            .find(|(_, r)| ego_rect.overlaps(r))
            .map(|(i, r)| (agents[i].spec.id.clone(), *r))
            .or_else(|| statics.iter().find(|(_, r)| ego_rect.overlaps(r)).cloned());

        // Perception.
        let eye = ego_rect.front_center();
        let mut adv_visible = false;
        for (i, r) in rects.iter().enumerate() {
            let blockers: Vec<OrientedRect> = rects
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, r)| *r)
                .chain(statics.iter().map(|(_, r)| *r))
                .collect();
            let seen = sensor.sees(eye, heading, r, &blockers);
            if seen && first_seen[i].is_none() {
                first_seen[i] = Some(f);
            }
            if seen && Some(i) == adv_slot {
                adv_visible = true;
            }
        }

        let progress = route.path.project(pos).arc_length;
        let record = |accel: f64, yaw_rate: f64| FrameRecord {
            frame: f,
            x: pos.x,
            y: pos.y,
            heading,
            speed: v,
            accel,
            yaw_rate,
            visible: adv_visible,
        };

        if let Some((other, r)) = hit {
            collisions.push(CollisionEvent { frame: f, other, contact: contact_point(&ego_rect, &r) });
            frames.push(record(0.0, 0.0));
            termination = Termination::Collision;
            break;
        }
        if progress >= route_len - 0.5 || (pos - route.goal).norm() < 1.0 {
            frames.push(record(0.0, 0.0));
            termination = Termination::Goal;
            break;
        }

        // Threat assessment on agents known for at least the reaction delay.
        let v_pred = v.max(2.0);
        let steps = (p.ttc_horizon / dt).round() as usize;
        let mut threat = false;
        'agents: for (i, a) in agents.iter().enumerate() {
            let Some(seen) = first_seen[i] else { continue };
            if f < seen + delay_frames {
                continue;
            }
            let future = predict(a, f, rects[i], &ctx.lanes, steps);
            for (k, future) in future.iter().enumerate() {
                let tau = (k + 1) as f64 * dt;
                let (ep, et) = route.path.sample(progress + v_pred * tau);
                let ego_future = OrientedRect::new(ep, et.angle(), ego_fp.length + 1.0, ego_fp.width + 0.6);
                if ego_future.overlaps(future) {
                    threat = true;
                    break 'agents;
                }
            }
        }
        if let Some(stop) = ego_stop {
            let front = progress + 0.5 * ego_fp.length;
            let d = stop - 1.0 - front;
            if d > -0.5 && d < v_pred * p.ttc_horizon {
                threat = true;
            }
        }

        let target_accel = if threat { -p.max_brake } else { ((p.cruise_speed - v) / dt).min(p.max_accel.min(p.max_brake)) };
        let v_next = (v + target_accel * dt).clamp(0.0, p.cruise_speed);
        let accel = (v_next - v) / dt;

        // Pure pursuit toward the route point `lookahead` ahead.
        let target = route.path.point_at(progress + p.lookahead);
        let alpha = wrap_angle((target - pos).angle() - heading);
        let ld = (target - pos).norm().max(1e-6);
        let curvature = 2.0 * alpha.sin() / ld;
        let yaw_rate = v_next * curvature;

        frames.push(record(accel, yaw_rate));

        let prev_front = eye;
        heading = wrap_angle(heading + yaw_rate * dt);
        pos = pos + Vec2::from_angle(heading) * (v_next * dt);
        v = v_next;
        if v < 0.1 {
            last_stop_frame = Some(f);
        }

        // Rule events along the step just taken.
        let new_rect = OrientedRect::new(pos, heading, ego_fp.length, ego_fp.width);
        let new_front = new_rect.front_center();
        for line in &ctx.stop_lines {
            if !segments_cross(prev_front, new_front, line.a, line.b) {
                continue;
            }
            match line.control {
                StopControl::Signal => {
                    if ctx.signal_at(line) == LightState::Red {
                        rule_events.push(RuleEvent { frame: f + 1, kind: RuleKind::RedLight });
                    }
                }
                StopControl::StopSign => {
                    let window = (3.0 / dt) as usize;
                    if last_stop_frame.map_or(true, |s| f > s + window) {
                        rule_events.push(RuleEvent { frame: f + 1, kind: RuleKind::StopSign });
                    }
                }
            }
        }
        let now_invading = route_invasion(route, &new_rect, half_lane);
        if now_invading && !invading {
            rule_events.push(RuleEvent { frame: f + 1, kind: RuleKind::LaneInvasion });
        }
        invading = now_invading;
        let now_off = ctx.off_road_excess(pos) > 0.0;
        if now_off && !off_road {
            rule_events.push(RuleEvent { frame: f + 1, kind: RuleKind::OffRoad });
        }
        off_road = now_off;
    }

    let first_detection = adv_slot.and_then(|i| first_seen[i]);
    RolloutLog { dt, frames, collisions, rule_events, termination, first_detection }
}

/// Ego positions of a rollout as a trajectory of exactly `frames` frames,
/// holding the final pose when the rollout ended early.
pub fn ego_trajectory(log: &RolloutLog, frames: usize) -> Trajectory {
    let mut pts: Vec<Vec2> = log.frames.iter().take(frames).map(|f| Vec2::new(f.x, f.y)).collect();
    let last = pts.last().copied().unwrap_or_default();
    pts.resize(frames, last);
    Trajectory::new(log.dt, pts)
}

/// Kinds of agent taking part in a rollout, for reporting.
pub fn agent_kind(s: &AdvScenario, id: &str) -> Option<AgentKind> {
    s.agents().find(|a| a.id == id).map(|a| a.kind)
}
