use std::collections::HashMap;
use std::f64::consts::FRAC_PI_6;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::wrap_angle;
use crate::model::{
    AgentClass, AgentKind, AgentSpec, Background, Behavior, Lane, LaneRole, MetaScenario, Pose, SceneContext, Trajectory,
};
use crate::sim::SimError;

/// Car-following parameters for baseline traffic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub min_speed: f64,
    pub max_speed: f64,
    /// Minimum bumper-to-bumper gap (m).
    pub min_gap: f64,
    /// Time headway (s).
    pub headway: f64,
    pub max_accel: f64,
    pub max_decel: f64,
    pub truck_share: f64,
    /// Distance held before a stop line (m).
    pub stop_margin: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            min_speed: 6.0,
            max_speed: 12.0,
            min_gap: 5.0,
            headway: 1.5,
            max_accel: 2.0,
            max_decel: 4.0,
            truck_share: 0.2,
            stop_margin: 1.0,
        }
    }
}

struct Vehicle {
    index: usize,
    class: AgentClass,
    length: f64,
    desired: f64,
    s: f64,
    v: f64,
}

/// Lanes background traffic may use: any lane with a spawn range except the
/// ego's, and crossing lanes only while they are held at their stop line.
pub fn spawn_lanes(ctx: &SceneContext) -> Vec<&Lane> {
    ctx.lanes
        .iter()
        .filter(|l| l.spawn.is_some() && l.role != LaneRole::Ego)
        .filter(|l| l.role != LaneRole::Cross || ctx.lane_must_stop(l))
        .collect()
}

/// How many vehicles of `length` fit in a spawn range at the minimum gap.
fn capacity(range: (f64, f64), length: f64, gap: f64) -> usize {
    let span = (range.1 - range.0).max(0.0);
    if span < length {
        0
    } else {
        ((span - length) / (length + gap)).floor() as usize + 1
    }
}

pub fn generate_background_flow(
    ctx: &SceneContext,
    n: usize,
    seed: u64,
    frames: usize,
    dt: f64,
) -> Result<Vec<Background>, SimError> {
    generate_background_flow_with(ctx, n, seed, frames, dt, &FlowConfig::default())
}

/// Spawns `n` vehicles at seeded positions and speeds and rolls them forward
/// for `frames` frames under a gap-keeping car-following rule.
pub fn generate_background_flow_with(
    ctx: &SceneContext,
    n: usize,
    seed: u64,
    frames: usize,
    dt: f64,
    cfg: &FlowConfig,
) -> Result<Vec<Background>, SimError> {
    flow_with_leaders(ctx, n, seed, frames, dt, cfg, &HashMap::new())
}

/// Baseline traffic for a meta-scenario: spawns in [`flow_context`], and
/// vehicles hold their gap to the adversary whenever it occupies their lane
/// now or within the next two seconds.
pub fn generate_meta_flow(meta: &MetaScenario, n: usize, seed: u64, cfg: &FlowConfig) -> Result<Vec<Background>, SimError> {
    let ctx = flow_context(meta, cfg);
    let lookahead = (2.0 / meta.dt()).round() as usize;
    let leaders = ctx
        .lanes
        .iter()
        .filter_map(|l| Some((l.id.clone(), adversary_blocking(meta, l, lookahead)?)))
        .collect();
    flow_with_leaders(&ctx, n, seed, meta.frames(), meta.dt(), cfg, &leaders)
}

/// Adversary arc length along `lane` per frame while it drives in the lane
/// and roughly along it; `None` when it never does.
fn adversary_track(meta: &MetaScenario, lane: &Lane) -> Option<Vec<Option<f64>>> {
    let traj = &meta.adversary_trajectory;
    let headings = traj.headings();
    let track: Vec<Option<f64>> = (0..traj.len())
        .map(|t| {
            let pr = lane.centerline.project(traj.points[t]);
            let h = headings.get(t).copied().unwrap_or(meta.adversary.initial_pose.heading);
            let along = wrap_angle(h - pr.tangent.angle()).abs() < FRAC_PI_6;
            let inside = pr.lateral.abs() < lane.half_width() && pr.arc_length > 0.0 && pr.arc_length < lane.centerline.length();
            (inside && along).then_some(pr.arc_length)
        })
        .collect();
    track.iter().any(Option::is_some).then_some(track)
}

/// Per frame, the nearest arc length along `lane` (rear edge of the
/// adversary's footprint) over the frames `t..=t + lookahead` in which the
/// footprint reaches into the lane.
fn adversary_blocking(meta: &MetaScenario, lane: &Lane, lookahead: usize) -> Option<Vec<Option<f64>>> {
    let traj = &meta.adversary_trajectory;
    let headings = traj.headings();
    let fp = meta.adversary.footprint;
    let occupied: Vec<Option<f64>> = (0..traj.len())
        .map(|t| {
            let pr = lane.centerline.project(traj.points[t]);
            let h = headings.get(t).copied().unwrap_or(meta.adversary.initial_pose.heading);
            let rel = h - pr.tangent.angle();
            let (c, s) = (rel.cos().abs(), rel.sin().abs());
            let along_half = 0.5 * (fp.length * c + fp.width * s);
            let across_half = 0.5 * (fp.length * s + fp.width * c);
            let inside = pr.lateral.abs() < lane.half_width() + across_half
                && pr.arc_length > 0.0
                && pr.arc_length < lane.centerline.length();
            inside.then_some(pr.arc_length - along_half)
        })
        .collect();
    if occupied.iter().all(Option::is_none) {
        return None;
    }
    Some(
        (0..occupied.len())
            .map(|t| occupied[t..(t + lookahead + 1).min(occupied.len())].iter().flatten().copied().reduce(f64::min))
            .collect(),
    )
}

/// `leaders[lane id][frame]`: rear-bumper arc length of a scripted leader.
fn flow_with_leaders(
    ctx: &SceneContext,
    n: usize,
    seed: u64,
    frames: usize,
    dt: f64,
    cfg: &FlowConfig,
    leaders: &HashMap<String, Vec<Option<f64>>>,
) -> Result<Vec<Background>, SimError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let lanes = spawn_lanes(ctx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let car_len = AgentClass::Car.default_footprint().length;
    let total_capacity: usize = lanes.iter().map(|l| capacity(l.spawn.unwrap_or_default(), car_len, cfg.min_gap)).sum();

    // Assign classes and lanes.
    let mut per_lane: Vec<Vec<Vehicle>> = lanes.iter().map(|_| Vec::new()).collect();
    let mut used: Vec<f64> = vec![0.0; lanes.len()];
    for index in 0..n {
        let class = if rng.gen::<f64>() < cfg.truck_share { AgentClass::Truck } else { AgentClass::Car };
        let length = class.default_footprint().length;
        let open: Vec<usize> = (0..lanes.len())
            .filter(|&k| {
                let (a, b) = lanes[k].spawn.unwrap_or_default();
                let extra = if per_lane[k].is_empty() { length } else { length + cfg.min_gap };
                used[k] + extra <= b - a
            })
            .collect();
        if open.is_empty() {
            return Err(SimError::Spawn { requested: n, capacity: total_capacity });
        }
        let k = open[rng.gen_range(0..open.len())];
        used[k] += if per_lane[k].is_empty() { length } else { length + cfg.min_gap };
        let desired = rng.gen_range(cfg.min_speed..=cfg.max_speed);
        per_lane[k].push(Vehicle { index, class, length, desired, s: 0.0, v: 0.0 });
    }

    // Exact-spacing placement: the slack is split by sorted uniform draws.
    for (k, vehicles) in per_lane.iter_mut().enumerate() {
        if vehicles.is_empty() {
            continue;
        }
        let (a, b) = lanes[k].spawn.unwrap_or_default();
        let slack = (b - a - used[k]).max(0.0);
        let mut draws: Vec<f64> = (0..vehicles.len()).map(|_| rng.gen_range(0.0..=1.0) * slack).collect();
        draws.sort_by(f64::total_cmp);
        let mut offset = a;
        for (veh, u) in vehicles.iter_mut().zip(draws) {
            veh.s = offset + u + 0.5 * veh.length;
            offset += veh.length + cfg.min_gap;
        }
    }

    let mut out: Vec<Option<Background>> = (0..n).map(|_| None).collect();
    for (k, mut vehicles) in per_lane.into_iter().enumerate() {
        if vehicles.is_empty() {
            continue;
        }
        let lane = lanes[k];
        let mut stops: Vec<f64> = obstacle_stops(ctx, lane, cfg);
        if ctx.lane_must_stop(lane) {
            stops.extend(
                lane.stop_line
                    .and_then(|i| ctx.stop_lines.get(i))
                    .map(|sl| lane.centerline.project((sl.a + sl.b) * 0.5).arc_length - cfg.stop_margin),
            );
        }
        let scripted = leaders.get(&lane.id);
        let leader_at = |f: usize| scripted.and_then(|t| t.get(f).copied().flatten());
        // Leader first.
        vehicles.sort_by(|x, y| y.s.total_cmp(&x.s));
        for i in 0..vehicles.len() {
            let gap = lead_gap(&vehicles, i, &stops, leader_at(0));
            vehicles[i].v = vehicles[i].desired.min(((gap - cfg.min_gap) / cfg.headway).max(0.0));
        }
        let mut tracks: Vec<Vec<f64>> = vehicles.iter().map(|v| vec![v.s]).collect();
        for f in 1..frames {
            for i in 0..vehicles.len() {
                let gap = lead_gap(&vehicles, i, &stops, leader_at(f));
                let veh = &vehicles[i];
                let target = veh.desired.min(((gap - cfg.min_gap) / cfg.headway).max(0.0));
                let a = ((target - veh.v) / dt).clamp(-cfg.max_decel, cfg.max_accel);
                let mut v = (veh.v + a * dt).max(0.0);
                let mut s = veh.s + v * dt;
                // Hard limit: never close the gap below the minimum.
                let front_limit = veh.s + 0.5 * veh.length + (gap - cfg.min_gap).max(0.0);
                if s + 0.5 * veh.length > front_limit {
                    s = front_limit - 0.5 * veh.length;
                    v = ((s - veh.s) / dt).max(0.0);
                }
                vehicles[i].s = s;
                vehicles[i].v = v;
                tracks[i].push(s);
            }
        }
        for (veh, track) in vehicles.iter().zip(tracks) {
            let points = track.iter().map(|&s| lane.centerline.point_at(s)).collect();
            let trajectory = Trajectory::new(dt, points);
            let p0 = trajectory.points[0];
            let spec = AgentSpec::new(
                format!("bg-{}", veh.index),
                AgentKind::Background,
                veh.class,
                Pose::new(p0.x, p0.y, lane.centerline.heading_at(track[0])),
                Behavior::LaneFollow,
            );
            out[veh.index] = Some(Background { spec, trajectory });
        }
    }
    Ok(out.into_iter().map(|b| b.expect("every vehicle placed")).collect())
}

/// Stop positions (lane arc length) in front of static obstacles standing in
/// `lane`.
fn obstacle_stops(ctx: &SceneContext, lane: &Lane, cfg: &FlowConfig) -> Vec<f64> {
    ctx.obstacles
        .iter()
        .filter_map(|o| {
            let pr = lane.centerline.project(o.pose.position());
            let inside = pr.lateral.abs() < lane.half_width() + 0.5 * o.footprint.width;
            let on_lane = pr.arc_length > 0.0 && pr.arc_length < lane.centerline.length();
            (inside && on_lane).then(|| pr.arc_length - 0.5 * o.footprint.length - cfg.stop_margin)
        })
        .collect()
}

/// Bumper gap from vehicle `i` to its leader (already advanced this frame)
/// or to the nearest stop position it has not passed yet. `scripted` is the
/// rear bumper of a scripted leader in the lane.
fn lead_gap(vehicles: &[Vehicle], i: usize, stops: &[f64], scripted: Option<f64>) -> f64 {
    let me = &vehicles[i];
    let front = me.s + 0.5 * me.length;
    let mut gap = f64::INFINITY;
    if i > 0 {
        let lead = &vehicles[i - 1];
        gap = lead.s - 0.5 * lead.length - front;
    }
    if let Some(rear) = scripted.filter(|&r| r > front - 1e-9) {
        gap = gap.min(rear - front);
    }
    for &stop in stops {
        if front <= stop + 1e-9 {
            // Treat the stop position as a leader's rear bumper `min_gap` beyond it.
            gap = gap.min(stop - front + FlowConfig::default().min_gap);
        }
    }
    gap
}

/// Copy of the meta-scenario's context prepared for background traffic:
/// on lanes the adversary drives along, spawns end behind the point where
/// it first appears in the lane, and spawn ranges end short of static
/// obstacles standing in the lane.
pub fn flow_context(meta: &MetaScenario, cfg: &FlowConfig) -> SceneContext {
    let mut ctx = meta.context.clone();
    let obstacles = ctx.obstacles.clone();
    let half = 0.5 * meta.adversary.footprint.length;
    for lane in ctx.lanes.iter_mut() {
        let Some((a, mut b)) = lane.spawn else {
            continue;
        };
        if let Some(track) = adversary_track(meta, lane) {
            let entry = track.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            b = b.min(entry - half - cfg.min_gap);
        }
        for o in &obstacles {
            let pr = lane.centerline.project(o.pose.position());
            if pr.lateral.abs() < lane.half_width() + 0.5 * o.footprint.width {
                let rear = pr.arc_length - 0.5 * o.footprint.length - cfg.stop_margin - cfg.min_gap;
                if rear < b && pr.arc_length + 0.5 * o.footprint.length > a {
                    b = rear;
                }
            }
        }
        lane.spawn = (b > a).then_some((a, b));
    }
    ctx
}
