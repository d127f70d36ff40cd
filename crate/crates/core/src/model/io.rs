//! Scenario files: pretty-printed JSON with top-level keys `version`, `dt`,
//! `context`, `agents`, `trajectories` and `perturbations`.
//!
//! `agents` is positional: entry 0 is the ego slot, entry 1 the adversary
//! slot, the rest are backgrounds. Every non-ego agent has exactly one entry in
//! `trajectories`, matched by id. Coordinates are written with the shortest
//! decimal representation that reads back to the identical `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::model::agent::AgentSpec;
use crate::model::scenario::{AdvScenario, Background, MetaScenario, PerturbationRecord};
use crate::model::scene::SceneContext;
use crate::model::trajectory::Trajectory;

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum ScenarioIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema version mismatch: file has `{found}`, reader expects `{expected}`")]
    Version { found: String, expected: String },
    #[error("invalid scenario file: {0}")]
    Schema(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: String,
    dt: f64,
    context: SceneContext,
    agents: Vec<AgentSpec>,
    trajectories: Vec<TrajectoryEntry>,
    perturbations: Vec<PerturbationRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryEntry {
    agent: String,
    points: Vec<Vec2>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<String>,
}

fn parse_error(e: serde_json::Error) -> ScenarioIoError {
    ScenarioIoError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

pub fn scenario_to_string(s: &AdvScenario) -> String {
    let meta = &s.meta;
    let mut agents = vec![meta.ego.clone(), meta.adversary.clone()];
    let mut trajectories = vec![TrajectoryEntry {
        agent: meta.adversary.id.clone(),
        points: meta.adversary_trajectory.points.clone(),
    }];
    for bg in &s.backgrounds {
        agents.push(bg.spec.clone());
        trajectories.push(TrajectoryEntry { agent: bg.spec.id.clone(), points: bg.trajectory.points.clone() });
    }
    let file = ScenarioFile {
        version: SCHEMA_VERSION.to_owned(),
        dt: meta.dt(),
        context: meta.context.clone(),
        agents,
        trajectories,
        perturbations: s.perturbations.clone(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("scenario serializes");
    out.push('\n');
    out
}

pub fn scenario_from_str(text: &str) -> Result<AdvScenario, ScenarioIoError> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(parse_error)?;
    match probe.version {
        Some(v) if v == SCHEMA_VERSION => {}
        Some(v) => return Err(ScenarioIoError::Version { found: v, expected: SCHEMA_VERSION.to_owned() }),
        None => {
            return Err(ScenarioIoError::Parse { line: 1, column: 1, message: "missing field `version`".into() })
        }
    }
    let file: ScenarioFile = serde_json::from_str(text).map_err(parse_error)?;
    if file.agents.len() < 2 {
        return Err(ScenarioIoError::Schema(format!(
            "`agents` needs an ego and an adversary entry, found {}",
            file.agents.len()
        )));
    }
    let mut agents = file.agents.into_iter();
    let ego = agents.next().expect("checked length");
    let adversary = agents.next().expect("checked length");
    let backgrounds: Vec<AgentSpec> = agents.collect();
    if file.trajectories.len() != backgrounds.len() + 1 {
        return Err(ScenarioIoError::Schema(format!(
            "`trajectories` has {} entries, expected {}",
            file.trajectories.len(),
            backgrounds.len() + 1
        )));
    }
    let mut entries = file.trajectories.into_iter();
    let mut take = |id: &str| -> Result<Trajectory, ScenarioIoError> {
        let entry = entries.next().expect("checked length");
        if entry.agent != id {
            return Err(ScenarioIoError::Schema(format!(
                "trajectory entry `{}` found where `{id}` was expected",
                entry.agent
            )));
        }
        Ok(Trajectory::new(file.dt, entry.points))
    };
    let adversary_trajectory = take(&adversary.id)?;
    let mut bgs = Vec::with_capacity(backgrounds.len());
    for spec in backgrounds {
        let trajectory = take(&spec.id)?;
        bgs.push(Background { spec, trajectory });
    }
    Ok(AdvScenario {
        meta: MetaScenario { ego, adversary, context: file.context, adversary_trajectory },
        backgrounds: bgs,
        perturbations: file.perturbations,
    })
}

pub fn save_scenario(s: &AdvScenario, path: impl AsRef<Path>) -> Result<(), ScenarioIoError> {
    let path = path.as_ref();
    fs::write(path, scenario_to_string(s)).map_err(|source| ScenarioIoError::Io { path: path.to_owned(), source })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<AdvScenario, ScenarioIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioIoError::Io { path: path.to_owned(), source })?;
    scenario_from_str(&text)
}

pub fn save_meta(m: &MetaScenario, path: impl AsRef<Path>) -> Result<(), ScenarioIoError> {
    save_scenario(&AdvScenario::from_meta(m.clone()), path)
}

/// Loads a file and keeps only its meta-scenario part.
pub fn load_meta(path: impl AsRef<Path>) -> Result<MetaScenario, ScenarioIoError> {
    Ok(load_scenario(path)?.meta)
}
