use std::fmt;

use serde::Serialize;

use crate::model::agent::{AgentClass, AgentKind, AgentSpec};
use crate::model::scenario::{AdvScenario, MetaScenario};
use crate::model::scene::SceneContext;
use crate::model::trajectory::Trajectory;

pub const MIN_LANE_WIDTH: f64 = 2.5;
const SPEED_TOLERANCE: f64 = 1e-9;

/// A single broken invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
    pub agent: Option<String>,
    pub frame: Option<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.invariant)?;
        if let Some(a) = &self.agent {
            write!(f, " [agent {a}]")?;
        }
        if let Some(t) = self.frame {
            write!(f, " [frame {t}]")?;
        }
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, invariant: &str) -> bool {
        self.violations.iter().any(|v| v.invariant == invariant)
    }

    fn push(&mut self, invariant: &'static str, detail: impl Into<String>, agent: Option<&str>, frame: Option<usize>) {
        self.violations.push(Violation {
            invariant,
            detail: detail.into(),
            agent: agent.map(str::to_owned),
            frame,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub trait Validate {
    fn validate_into(&self, report: &mut ValidationReport);
}

/// Checks every scenario invariant; never fails, only reports.
pub fn validate_scenario<V: Validate + ?Sized>(s: &V) -> ValidationReport {
    let mut report = ValidationReport::default();
    s.validate_into(&mut report);
    report
}

fn check_agent(spec: &AgentSpec, report: &mut ValidationReport) {
    let fp = spec.footprint;
    if !(fp.length > 0.0 && fp.width > 0.0) {
        report.push(
            "footprint dims > 0",
            format!("{} x {}", fp.length, fp.width),
            Some(&spec.id),
            None,
        );
    }
    if spec.class == AgentClass::Pedestrian && (fp.length > 1.0 || fp.width > 1.0) {
        report.push(
            "pedestrian footprint <= 1 m x 1 m",
            format!("{} x {}", fp.length, fp.width),
            Some(&spec.id),
            None,
        );
    }
}

fn check_trajectory(
    id: &str,
    class: AgentClass,
    traj: &Trajectory,
    ctx: &SceneContext,
    report: &mut ValidationReport,
) {
    if !(traj.dt > 0.0) || !traj.dt.is_finite() {
        report.push("dt > 0", format!("dt = {}", traj.dt), Some(id), None);
    }
    if traj.len() < 2 {
        report.push("trajectory length >= 2", format!("T = {}", traj.len()), Some(id), None);
    }
    if let Some(t) = traj.first_non_finite() {
        report.push("coordinates finite", format!("{}", traj.points[t]), Some(id), Some(t));
        return;
    }
    if traj.len() >= 2 && traj.dt > 0.0 {
        let cap = ctx.speed_limits.for_class(class);
        for (t, v) in traj.speeds().into_iter().enumerate().take(traj.len() - 1) {
            if v > cap * (1.0 + SPEED_TOLERANCE) + SPEED_TOLERANCE {
                report.push(
                    "class max speed",
                    format!("{v:.3} m/s exceeds {cap} m/s for {class}"),
                    Some(id),
                    Some(t),
                );
                break;
            }
        }
    }
}

fn check_context(ctx: &SceneContext, report: &mut ValidationReport) {
    for lane in &ctx.lanes {
        if !(lane.width > MIN_LANE_WIDTH) {
            report.push("lane width > 2.5 m", format!("lane {} width {}", lane.id, lane.width), None, None);
        }
    }
    if ctx.light_state != crate::model::scene::LightState::None && ctx.stop_lines.is_empty() {
        report.push(
            "stop lines present when light != none",
            format!("light {}", ctx.light_state.as_str()),
            None,
            None,
        );
    }
    let path = &ctx.route.path;
    if path.len() < 2 {
        report.push("route within lane corridor", "route has fewer than two points", None, None);
        return;
    }
    let len = path.length();
    let samples = (len.ceil() as usize).max(1);
    for k in 0..=samples {
        let p = path.point_at(len * k as f64 / samples as f64);
        let inside = ctx
            .lanes
            .iter()
            .any(|l| l.centerline.project(p).lateral.abs() <= l.half_width() + 1e-6);
        if !inside {
            report.push("route within lane corridor", format!("route point {p} outside all lanes"), None, None);
            break;
        }
    }
}

fn check_meta(meta: &MetaScenario, report: &mut ValidationReport) {
    check_agent(&meta.ego, report);
    check_agent(&meta.adversary, report);
    check_context(&meta.context, report);
    let adv = &meta.adversary;
    if !meta.context.contains(adv.initial_pose.position()) {
        report.push(
            "adversary inside scene",
            format!("initial pose {} outside scene bounds", adv.initial_pose.position()),
            Some(&adv.id),
            None,
        );
    }
    check_trajectory(&adv.id, adv.class, &meta.adversary_trajectory, &meta.context, report);
}

fn count_kinds<'a>(agents: impl Iterator<Item = &'a AgentSpec>, report: &mut ValidationReport) {
    let mut egos = Vec::new();
    let mut advs = Vec::new();
    for a in agents {
        match a.kind {
            AgentKind::Ego => egos.push(a.id.clone()),
            AgentKind::Adversary => advs.push(a.id.clone()),
            AgentKind::Background => {}
        }
    }
    if egos.len() != 1 {
        report.push("exactly one ego", format!("found {} ({})", egos.len(), egos.join(", ")), None, None);
    }
    if advs.len() > 1 {
        report.push("at most one adversary", format!("found {} ({})", advs.len(), advs.join(", ")), None, None);
    }
}

impl Validate for MetaScenario {
    fn validate_into(&self, report: &mut ValidationReport) {
        count_kinds([&self.ego, &self.adversary].into_iter(), report);
        check_meta(self, report);
    }
}

impl Validate for AdvScenario {
    fn validate_into(&self, report: &mut ValidationReport) {
        count_kinds(self.agents(), report);
        check_meta(&self.meta, report);
        let dt = self.meta.dt();
        let frames = self.meta.frames();
        for bg in &self.backgrounds {
            check_agent(&bg.spec, report);
            check_trajectory(&bg.spec.id, bg.spec.class, &bg.trajectory, &self.meta.context, report);
            if bg.trajectory.dt != dt {
                report.push(
                    "uniform dt",
                    format!("dt {} differs from scenario dt {}", bg.trajectory.dt, dt),
                    Some(&bg.spec.id),
                    None,
                );
            }
            if bg.trajectory.len() != frames {
                report.push(
                    "equal episode length",
                    format!("T = {} but scenario T = {}", bg.trajectory.len(), frames),
                    Some(&bg.spec.id),
                    None,
                );
            }
        }
        for (k, rec) in self.perturbations.iter().enumerate() {
            let Some(bg) = self.backgrounds.get(rec.agent_index) else {
                report.push(
                    "perturbation agent index",
                    format!("record {k} names background {} of {}", rec.agent_index, self.backgrounds.len()),
                    None,
                    None,
                );
                continue;
            };
            let id = bg.spec.id.as_str();
            let (a, b) = rec.window;
            let t_len = bg.trajectory.len();
            if a >= b || b > t_len {
                report.push(
                    "perturbation window within [0, T)",
                    format!("window [{a}, {b}) with T = {t_len}"),
                    Some(id),
                    Some(a),
                );
                continue;
            }
            if rec.original.len() != b - a || rec.optimized.len() != b - a {
                report.push(
                    "perturbation segment lengths equal",
                    format!(
                        "window {} frames, original {}, optimized {}",
                        b - a,
                        rec.original.len(),
                        rec.optimized.len()
                    ),
                    Some(id),
                    Some(a),
                );
                continue;
            }
            if let Some(off) = (a..b).position(|t| bg.trajectory.points[t] != rec.optimized[t - a]) {
                report.push(
                    "perturbed segment applied",
                    "trajectory differs from the recorded optimized segment",
                    Some(id),
                    Some(a + off),
                );
            }
        }
    }
}
