use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::perturb::loss::{loss, loss_gradient, LossTerms, LossWeights};
use crate::perturb::project::{is_feasible, project_feasible, FeasibilityConstraints};
use crate::perturb::PerturbError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig<S = f64> {
    /// Largest per-frame move of one gradient step (metres).
    pub step: S,
    pub max_iters: usize,
    /// Relative improvement below which the run counts as converged.
    pub tolerance: S,
    /// Iterations over which the improvement is measured.
    pub patience: usize,
    pub max_halvings: usize,
}

impl<S: Scalar> Default for OptimizerConfig<S> {
    fn default() -> Self {
        OptimizerConfig { step: S::lit(0.05), max_iters: 200, tolerance: S::lit(1e-4), patience: 10, max_halvings: 5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized<S = f64> {
    pub segment: Vec<Vec2<S>>,
    /// Loss of the initial segment followed by every accepted step.
    pub trace: Vec<LossTerms<S>>,
}

/// Projected descent on the window loss. Each step moves the frame with the
/// largest gradient by `step` metres; a step whose projected result is
/// infeasible or raises the loss is retried at half length.
pub fn optimize_segment<S: Scalar>(
    segment: &[Vec2<S>],
    ego: &[Vec2<S>],
    adv: &[Vec2<S>],
    w: &LossWeights<S>,
    c: &FeasibilityConstraints<S>,
    dt: S,
    cfg: &OptimizerConfig<S>,
) -> Result<Optimized<S>, PerturbError> {
    if !(cfg.step > S::zero()) {
        return Err(PerturbError::Domain(format!("step must be positive, got {}", cfg.step)));
    }
    let original = segment.to_vec();
    let mut x = original.clone();
    let mut current = loss(&x, ego, adv, w)?;
    let mut trace = vec![current];

    for _ in 0..cfg.max_iters {
        let g = loss_gradient(&x, ego, adv, w)?;
        let gmax = g.iter().map(|v| v.norm()).fold(S::zero(), S::max);
        if !(gmax > S::zero()) {
            break;
        }
        let mut step = cfg.step;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let moved: Vec<Vec2<S>> = x.iter().zip(&g).map(|(&p, &d)| p - d * (step / gmax)).collect();
            let cand = project_feasible(&moved, &original, c, dt);
            if is_feasible(&cand, &original, c, dt) {
                let l = loss(&cand, ego, adv, w)?;
                if l.total <= current.total {
                    accepted = Some((cand, l));
                    break;
                }
            }
            step = step * S::lit(0.5);
        }
        let Some((cand, l)) = accepted else { break };
        x = cand;
        current = l;
        trace.push(l);
        if trace.len() > cfg.patience {
            let old = trace[trace.len() - 1 - cfg.patience].total;
            if old - current.total <= cfg.tolerance * old.abs().max(S::min_positive_value()) {
                break;
            }
        }
    }
    Ok(Optimized { segment: x, trace })
}

/// Loss trace as CSV with header `iter,total,l_ego,l_occ,l_smooth`.
pub fn trace_csv<S: Scalar>(trace: &[LossTerms<S>]) -> String {
    let mut out = String::from("iter,total,l_ego,l_occ,l_smooth\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{},{},{},{}\n", l.total, l.l_ego, l.l_occ, l.l_smooth));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Polyline;
    use crate::perturb::project::Corridor;

    fn frames(n: usize, f: impl Fn(usize) -> (f64, f64)) -> Vec<Vec2> {
        (0..n).map(|j| {
            let (x, y) = f(j);
            Vec2::new(x, y)
        })
        .collect()
    }

    #[test]
    fn zero_iterations_is_identity() {
        let seg = frames(10, |j| (j as f64, 8.0));
        let ego = frames(10, |j| (j as f64, 0.0));
        let cfg = OptimizerConfig { max_iters: 0, ..Default::default() };
        let c = FeasibilityConstraints::new(20.0, None);
        let r = optimize_segment(&seg, &ego, &ego, &LossWeights::default(), &c, 0.1, &cfg).unwrap();
        assert_eq!(r.segment, seg);
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.trace[0], loss(&seg, &ego, &ego, &LossWeights::default()).unwrap());
    }

    #[test]
    fn parallel_collaborator_moves_closer() {
        let seg = frames(30, |j| (j as f64, 8.0));
        let ego = frames(30, |j| (j as f64, 0.0));
        let adv = frames(30, |_| (40.0, 0.0));
        let c = FeasibilityConstraints::new(20.0, None);
        let w = LossWeights::default();
        let r = optimize_segment(&seg, &ego, &adv, &w, &c, 0.1, &OptimizerConfig::default()).unwrap();
        let first = r.trace[0];
        let last = *r.trace.last().unwrap();
        assert!(last.l_ego < first.l_ego);
        assert!(r.trace.windows(2).all(|p| p[1].total <= p[0].total));
        assert!(is_feasible(&r.segment, &seg, &c, 0.1));
    }

    #[test]
    fn occlusion_term_pulls_toward_sight_line() {
        let seg = frames(30, |j| (10.0 + 0.5 * j as f64, -3.5));
        let ego = frames(30, |j| (0.5 * j as f64, 0.0));
        let adv = frames(30, |_| (40.0, -8.0));
        let corridor = Corridor {
            centerline: Polyline::new(vec![Vec2::new(-50.0, -3.5), Vec2::new(200.0, -3.5)]),
            limit: 0.85,
        };
        let c = FeasibilityConstraints::new(20.0, Some(corridor));
        let w = LossWeights::new(0.0, 0.2, 0.5).unwrap();
        let r = optimize_segment(&seg, &ego, &adv, &w, &c, 0.1, &OptimizerConfig::default()).unwrap();
        assert!(r.trace.last().unwrap().l_occ < r.trace[0].l_occ);
    }

    #[test]
    fn csv_header_and_rows() {
        let t = vec![LossTerms { total: 1.0, l_ego: 2.0, l_occ: 3.0, l_smooth: 4.0 }];
        assert_eq!(trace_csv(&t), "iter,total,l_ego,l_occ,l_smooth\n0,1,2,3,4\n");
    }
}
