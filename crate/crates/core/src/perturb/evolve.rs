use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::graph::{build_relevance_with, collaborator_set, Collaborator, RelevanceMatrix, RelevanceOptions};
use crate::model::{AdvScenario, Background, MetaScenario, PerturbationRecord, SceneContext, Trajectory};
use crate::perturb::loss::{LossTerms, LossWeights};
use crate::perturb::optimize::{optimize_segment, OptimizerConfig};
use crate::perturb::project::{Corridor, FeasibilityConstraints};
use crate::perturb::PerturbError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveParams {
    pub k: usize,
    pub ratio: f64,
    pub gamma: f64,
    #[serde(default = "yes")]
    pub causal_mask: bool,
    #[serde(default = "yes")]
    pub decay: bool,
    pub weights: LossWeights,
    pub a_max: f64,
    pub blend_frames: usize,
    pub optimizer: OptimizerConfig,
}

fn yes() -> bool {
    true
}

impl Default for EvolveParams {
    fn default() -> Self {
        EvolveParams {
            k: 4,
            ratio: 0.6,
            gamma: 0.8,
            causal_mask: true,
            decay: true,
            weights: LossWeights::default(),
            a_max: 4.0,
            blend_frames: 3,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub scenario: AdvScenario,
    pub relevance: RelevanceMatrix,
    pub collaborators: Vec<Collaborator>,
    /// One loss trace per collaborator, in collaborator order.
    pub traces: Vec<Vec<LossTerms>>,
}

/// Lane whose centreline passes closest to `p`, as a corridor for a vehicle
/// of width `width`.
fn corridor_for(ctx: &SceneContext, p: Vec2, width: f64) -> Option<Corridor> {
    ctx.lanes
        .iter()
        .map(|l| (l.centerline.project(p).lateral.abs(), l))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, lane)| Corridor { centerline: lane.centerline.clone(), limit: (lane.half_width() - 0.5 * width).max(0.0) })
}

/// Selects collaborators from one relevance pass over the frozen ego and
/// adversary trajectories, optimises their windows independently and splices
/// the results into a copy of `backgrounds`.
pub fn evolve_scenario(
    meta: &MetaScenario,
    backgrounds: Vec<Background>,
    ego: &Trajectory,
    p: &EvolveParams,
) -> Result<Evolution, PerturbError> {
    if backgrounds.is_empty() {
        return Err(PerturbError::Domain("evolution needs at least one background agent".into()));
    }
    if p.k == 0 {
        return Err(PerturbError::Domain("k must be at least 1".into()));
    }
    let adv = &meta.adversary_trajectory;
    let bg_trajs: Vec<Trajectory> = backgrounds.iter().map(|b| b.trajectory.clone()).collect();
    let opts = RelevanceOptions { gamma: p.gamma, causal_mask: p.causal_mask, decay: p.decay };
    let relevance = build_relevance_with(ego, adv, &bg_trajs, opts)?;
    let collaborators = collaborator_set(&relevance, p.k, p.ratio)?;
    let dt = meta.dt();
    for c in &collaborators {
        let len = c.window.1 - c.window.0;
        if 2 * p.blend_frames >= len {
            return Err(PerturbError::Domain(format!(
                "window of {len} frames is too short for {} blend frames at each end",
                p.blend_frames
            )));
        }
    }

    let results: Vec<_> = collaborators
        .par_iter()
        .map(|c| {
            let bg = &backgrounds[c.index];
            let (a, b) = c.window;
            let original = &bg.trajectory.points[a..b];
            let constraints = FeasibilityConstraints {
                v_max: meta.context.speed_limits.for_class(bg.spec.class),
                a_max: p.a_max,
                corridor: corridor_for(&meta.context, bg.trajectory.points[c.keyframe], bg.spec.footprint.width),
                blend_frames: p.blend_frames,
            };
            optimize_segment(original, &ego.points[a..b], &adv.points[a..b], &p.weights, &constraints, dt, &p.optimizer)
        })
        .collect();

    let mut out = backgrounds;
    let mut perturbations = Vec::with_capacity(collaborators.len());
    let mut traces = Vec::with_capacity(collaborators.len());
    for (c, r) in collaborators.iter().zip(results) {
        let r = r?;
        let (a, b) = c.window;
        let traj = &mut out[c.index].trajectory;
        let original = traj.points[a..b].to_vec();
        traj.points[a..b].copy_from_slice(&r.segment);
        perturbations.push(PerturbationRecord {
            agent_index: c.index,
            keyframe: c.keyframe,
            window: c.window,
            original,
            optimized: r.segment,
        });
        traces.push(r.trace);
    }
    let scenario = AdvScenario { meta: meta.clone(), backgrounds: out, perturbations };
    Ok(Evolution { scenario, relevance, collaborators, traces })
}
