use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::model::agent::AgentSpec;
use crate::model::scene::SceneContext;
use crate::model::trajectory::Trajectory;

/// Ego + one adversarial agent in a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaScenario {
    pub ego: AgentSpec,
    pub adversary: AgentSpec,
    pub context: SceneContext,
    /// Scripted adversary motion; its length is the episode length `T`.
    pub adversary_trajectory: Trajectory,
}

impl MetaScenario {
    pub fn frames(&self) -> usize {
        self.adversary_trajectory.len()
    }

    pub fn dt(&self) -> f64 {
        self.adversary_trajectory.dt
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub spec: AgentSpec,
    pub trajectory: Trajectory,
}

/// One optimized collaborator segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    /// Index into `AdvScenario::backgrounds`.
    pub agent_index: usize,
    pub keyframe: usize,
    /// Half-open frame range `[start, end)`.
    pub window: (usize, usize),
    pub original: Vec<Vec2>,
    pub optimized: Vec<Vec2>,
}

impl PerturbationRecord {
    pub fn window_len(&self) -> usize {
        self.window.1.saturating_sub(self.window.0)
    }
}

/// Meta-scenario plus background traffic, some of it perturbed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvScenario {
    pub meta: MetaScenario,
    pub backgrounds: Vec<Background>,
    pub perturbations: Vec<PerturbationRecord>,
}

impl AdvScenario {
    pub fn from_meta(meta: MetaScenario) -> Self {
        AdvScenario { meta, backgrounds: Vec::new(), perturbations: Vec::new() }
    }

    pub fn with_backgrounds(meta: MetaScenario, backgrounds: Vec<Background>) -> Self {
        AdvScenario { meta, backgrounds, perturbations: Vec::new() }
    }

    pub fn dt(&self) -> f64 {
        self.meta.dt()
    }

    pub fn frames(&self) -> usize {
        self.meta.frames()
    }

    /// Background trajectories with every recorded window restored to its
    /// original segment.
    pub fn baseline_backgrounds(&self) -> Vec<Background> {
        let mut out = self.backgrounds.clone();
        for rec in &self.perturbations {
            if let Some(bg) = out.get_mut(rec.agent_index) {
                let (a, b) = rec.window;
                if b <= bg.trajectory.len() && rec.original.len() == b - a {
                    bg.trajectory.points[a..b].copy_from_slice(&rec.original);
                }
            }
        }
        out
    }

    /// Same scenario with perturbations undone.
    pub fn baseline(&self) -> AdvScenario {
        AdvScenario {
            meta: self.meta.clone(),
            backgrounds: self.baseline_backgrounds(),
            perturbations: Vec::new(),
        }
    }

    /// Every agent spec in file order: ego, adversary, backgrounds.
    pub fn agents(&self) -> impl Iterator<Item = &AgentSpec> {
        [&self.meta.ego, &self.meta.adversary]
            .into_iter()
            .chain(self.backgrounds.iter().map(|b| &b.spec))
    }
}
