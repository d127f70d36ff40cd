//! Per-rollout metrics, suite aggregation and the overall score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Route, SceneContext};
use crate::sim::{RolloutLog, RuleKind, Termination};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Raw metrics of one rollout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutMetrics {
    pub collision: bool,
    pub red_light: usize,
    pub stop_sign: usize,
    /// Mean lateral excess beyond the road edge (m).
    pub off_road: f64,
    pub route_following: f64,
    pub completion: f64,
    /// Termination time (s).
    pub time: f64,
    pub mean_abs_accel: f64,
    pub mean_abs_yaw_rate: f64,
    pub lane_invasions: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn compute_rollout_metrics(log: &RolloutLog, route: &Route, ctx: &SceneContext) -> Result<RolloutMetrics, MetricsError> {
    let len = route.length();
    if !(len > 0.0) {
        return Err(MetricsError::Domain("route length must be positive".into()));
    }
    let half_lane = ctx.ego_lane().map_or(1.75, |l| l.half_width());
    let pos = |f: &crate::sim::FrameRecord| crate::geom::Vec2::new(f.x, f.y);
    let lateral = mean(log.frames.iter().map(|f| route.path.project(pos(f)).lateral.abs()));
    let completion = if log.termination == Termination::Goal {
        1.0
    } else {
        log.frames.last().map_or(0.0, |f| (route.path.project(pos(f)).arc_length / len).clamp(0.0, 1.0))
    };
    Ok(RolloutMetrics {
        collision: log.collided(),
        red_light: log.count(RuleKind::RedLight),
        stop_sign: log.count(RuleKind::StopSign),
        off_road: mean(log.frames.iter().map(|f| ctx.off_road_excess(pos(f)))),
        route_following: 1.0 - (lateral / half_lane).clamp(0.0, 1.0),
        completion,
        time: log.frames.last().map_or(0.0, |f| f.frame as f64 * log.dt),
        mean_abs_accel: mean(log.frames.iter().map(|f| f.accel.abs())),
        mean_abs_yaw_rate: mean(log.frames.iter().map(|f| f.yaw_rate.abs())),
        lane_invasions: log.count(RuleKind::LaneInvasion),
    })
}

/// Suite-level report; every field except `cr` is a mean over rollouts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cr: f64,
    pub rr: f64,
    pub ss: f64,
    pub or: f64,
    pub rf: f64,
    pub comp: f64,
    pub ts: f64,
    pub acc: f64,
    pub yv: f64,
    pub li: f64,
    pub os: f64,
    pub rollouts: usize,
}

pub const COLUMNS: [&str; 11] = ["CR", "RR", "SS", "OR", "RF", "Comp", "TS", "ACC", "YV", "LI", "OS"];

impl MetricsReport {
    pub fn values(&self) -> [f64; 11] {
        [self.cr, self.rr, self.ss, self.or, self.rf, self.comp, self.ts, self.acc, self.yv, self.li, self.os]
    }
}

/// Weights of the overall score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub safety: f64,
    pub function: f64,
    pub etiquette: f64,
    /// Acceleration treated as fully uncomfortable (m/s²).
    pub a_ref: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { safety: 0.5, function: 0.3, etiquette: 0.2, a_ref: 3.0 }
    }
}

/// Unweighted safety, completion and comfort parts of the overall score,
/// each in `[0, 1]`.
pub fn score_parts(r: &MetricsReport, a_ref: f64) -> [f64; 3] {
    let cr_adj = (r.cr + 0.1 * (r.rr + r.ss) + 0.05 * r.or.min(1.0)).clamp(0.0, 1.0);
    [1.0 - cr_adj, r.rf * r.comp, 1.0 - (r.acc / a_ref).clamp(0.0, 1.0)]
}

/// `w_s (1 - CR_adj) + w_f RF Comp + w_e (1 - clamp(ACC / a_ref, 0, 1))` with
/// `CR_adj = clamp(CR + 0.1 (RR + SS) + 0.05 min(OR, 1), 0, 1)`.
pub fn overall_score(r: &MetricsReport, w: &ScoreWeights) -> Result<f64, MetricsError> {
    let parts = [w.safety, w.function, w.etiquette];
    if parts.iter().any(|x| !(*x >= 0.0)) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 || !(w.a_ref > 0.0) {
        return Err(MetricsError::Domain(format!("weights must be non-negative and sum to 1, got {w:?}")));
    }
    let [safety, function, comfort] = score_parts(r, w.a_ref);
    Ok(w.safety * safety + w.function * function + w.etiquette * comfort)
}

pub fn aggregate_suite(rollouts: &[RolloutMetrics]) -> Result<MetricsReport, MetricsError> {
    aggregate_suite_with(rollouts, &ScoreWeights::default())
}

pub fn aggregate_suite_with(rollouts: &[RolloutMetrics], w: &ScoreWeights) -> Result<MetricsReport, MetricsError> {
    if rollouts.is_empty() {
        return Err(MetricsError::Domain("cannot aggregate an empty suite".into()));
    }
    let n = rollouts.len() as f64;
    // Sums in a fixed order: sorted copies keep the result permutation invariant.
    let avg = |f: &dyn Fn(&RolloutMetrics) -> f64| {
        let mut xs: Vec<f64> = rollouts.iter().map(f).collect();
        xs.sort_by(f64::total_cmp);
        xs.iter().sum::<f64>() / n
    };
    let mut r = MetricsReport {
        cr: avg(&|m| m.collision as u8 as f64),
        rr: avg(&|m| m.red_light as f64),
        ss: avg(&|m| m.stop_sign as f64),
        or: avg(&|m| m.off_road),
        rf: avg(&|m| m.route_following),
        comp: avg(&|m| m.completion),
        ts: avg(&|m| m.time),
        acc: avg(&|m| m.mean_abs_accel),
        yv: avg(&|m| m.mean_abs_yaw_rate),
        li: avg(&|m| m.lane_invasions as f64),
        os: 0.0,
        rollouts: rollouts.len(),
    };
    r.os = overall_score(&r, w)?;
    Ok(r)
}

/// CSV with a leading `name` column and the eleven metric columns.
pub fn report_csv(rows: &[(String, MetricsReport)]) -> String {
    let mut out = format!("name,{},rollouts\n", COLUMNS.join(","));
    for (name, r) in rows {
        let vals: Vec<String> = r.values().iter().map(|v| format!("{v:.4}")).collect();
        out.push_str(&format!("{name},{},{}\n", vals.join(","), r.rollouts));
    }
    out
}

/// Fixed-width text table of the same rows.
pub fn report_table(rows: &[(String, MetricsReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(4).max(4);
    let mut out = format!("{:<width$}", "name");
    for c in COLUMNS {
        out.push_str(&format!(" {c:>7}"));
    }
    out.push('\n');
    for (name, r) in rows {
        out.push_str(&format!("{name:<width$}"));
        for v in r.values() {
            out.push_str(&format!(" {v:>7.3}"));
        }
        out.push('\n');
    }
    out
}

/// `name,safety,completion,comfort` rows for a grouped bar chart.
pub fn bar_csv(rows: &[(String, MetricsReport)], a_ref: f64) -> String {
    let mut out = String::from("name,safety,completion,comfort\n");
    for (name, r) in rows {
        let [s, c, f] = score_parts(r, a_ref);
        out.push_str(&format!("{name},{s:.4},{c:.4},{f:.4}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::straight_context;
    use crate::sim::FrameRecord;

    fn log(accels: &[f64], speed: f64, termination: Termination) -> RolloutLog {
        let dt = 0.1;
        let mut x = 0.0;
        let frames = accels
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let f = FrameRecord { frame: i, x, y: 0.0, heading: 0.0, speed, accel: a, yaw_rate: 0.0, visible: false };
                x += speed * dt;
                f
            })
            .collect();
        RolloutLog { dt, frames, collisions: Vec::new(), rule_events: Vec::new(), termination, first_detection: None }
    }

    #[test]
    fn accelerate_then_cruise_mean_accel() {
        let ctx = straight_context();
        let mut a = vec![2.0; 50];
        a.extend(vec![0.0; 50]);
        let m = compute_rollout_metrics(&log(&a, 5.0, Termination::Timeout), &ctx.route, &ctx).unwrap();
        assert!((m.mean_abs_accel - 1.0).abs() < 1e-12);
    }

    #[test]
    fn goal_and_stationary() {
        let ctx = straight_context();
        let goal = compute_rollout_metrics(&log(&[0.0; 10], 10.0, Termination::Goal), &ctx.route, &ctx).unwrap();
        assert_eq!(goal.completion, 1.0);
        assert_eq!(goal.route_following, 1.0);
        let still = compute_rollout_metrics(&log(&[0.0; 10], 0.0, Termination::Timeout), &ctx.route, &ctx).unwrap();
        assert_eq!((still.mean_abs_accel, still.mean_abs_yaw_rate, still.completion), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_length_route_rejected() {
        let ctx = straight_context();
        let route = Route::new(crate::geom::Polyline::new(vec![crate::geom::Vec2::zero(); 2]));
        assert!(compute_rollout_metrics(&log(&[0.0], 0.0, Termination::Goal), &route, &ctx).is_err());
    }

    fn raw(collision: bool, completion: f64) -> RolloutMetrics {
        RolloutMetrics {
            collision,
            red_light: 0,
            stop_sign: 0,
            off_road: 0.0,
            route_following: 1.0,
            completion,
            time: 1.0,
            mean_abs_accel: 0.0,
            mean_abs_yaw_rate: 0.0,
            lane_invasions: 0,
        }
    }

    #[test]
    fn aggregation() {
        assert!(aggregate_suite(&[]).is_err());
        let none: Vec<_> = (0..10).map(|_| raw(false, 1.0)).collect();
        assert_eq!(aggregate_suite(&none).unwrap().cr, 0.0);
        let mix: Vec<_> = (0..100).map(|i| raw(i < 82, 1.0)).collect();
        assert!((aggregate_suite(&mix).unwrap().cr - 0.82).abs() < 1e-12);
        let two = aggregate_suite(&[raw(false, 0.4), raw(false, 0.6)]).unwrap();
        assert!((two.comp - 0.5).abs() < 1e-12);
        assert!((aggregate_suite(&none).unwrap().os - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_score() {
        let r = MetricsReport { cr: 0.5, rr: 0.0, ss: 0.0, or: 0.0, rf: 0.8, comp: 0.5, ts: 0.0, acc: 1.5, yv: 0.0, li: 0.0, os: 0.0, rollouts: 1 };
        let os = overall_score(&r, &ScoreWeights::default()).unwrap();
        assert!((os - (0.5 * 0.5 + 0.3 * 0.4 + 0.2 * 0.5)).abs() < 1e-12);
        assert!((os - 0.47).abs() < 1e-12);
        let crash = MetricsReport { cr: 1.0, comp: 0.0, ..r };
        assert!(overall_score(&crash, &ScoreWeights::default()).unwrap() <= 0.2 + 1e-12);
        let bad = ScoreWeights { safety: 0.6, ..ScoreWeights::default() };
        assert!(overall_score(&r, &bad).is_err());
    }

    #[test]
    fn table_has_all_columns() {
        let r = aggregate_suite(&[raw(false, 1.0)]).unwrap();
        let csv = report_csv(&[("s".into(), r)]);
        assert_eq!(csv.lines().next().unwrap(), "name,CR,RR,SS,OR,RF,Comp,TS,ACC,YV,LI,OS,rollouts");
        assert!(report_table(&[("s".into(), r)]).contains("Comp"));
    }
}
