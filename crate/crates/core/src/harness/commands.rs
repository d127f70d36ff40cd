use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::graph::GraphDump;
use crate::harness::config::{RunConfig, Stage};
use crate::harness::HarnessError;
use crate::knowledge::{bundled_kb, emit_scenic, generate_meta, Generated, KnowledgeEntry};
use crate::metrics::{aggregate_suite_with, bar_csv, compute_rollout_metrics, report_csv, report_table, MetricsReport, RolloutMetrics};
use crate::model::{load_meta, load_scenario, save_meta, save_scenario, AdvScenario, MetaScenario};
use crate::perturb::{evolve_scenario, trace_csv, Evolution};
use crate::roads::RoadLibrary;
use crate::sim::{ego_trajectory, generate_meta_flow, simulate_with, RolloutLog, SimOptions};

/// Per-scenario results of one command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub ok: Vec<String>,
    /// `(scenario id, error)`.
    pub failed: Vec<(String, String)>,
}

impl Outcome {
    /// 0 when everything succeeded, 2 when only some scenarios failed, 1 when
    /// nothing succeeded.
    pub fn exit_code(&self) -> i32 {
        match (self.ok.is_empty(), self.failed.is_empty()) {
            (_, true) => 0,
            (false, false) => 2,
            (true, false) => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StageReport {
    pub stage: Stage,
    pub outcome: Outcome,
    pub rollouts: Vec<(String, RolloutMetrics)>,
    /// `None` when no scenario could be replayed.
    pub report: Option<MetricsReport>,
}

pub fn scenario_id(prompt_name: &str, seed_index: usize) -> String {
    format!("{prompt_name}-s{seed_index:02}")
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

fn write_manifest(path: &Path, kind: &str, entries: &[(String, Result<Vec<String>, String>)]) -> Result<(), HarnessError> {
    let rows: Vec<serde_json::Value> = entries
        .iter()
        .map(|(id, r)| match r {
            Ok(files) => json!({"id": id, "status": "ok", "files": files}),
            Err(e) => json!({"id": id, "status": "failed", "error": e}),
        })
        .collect();
    let body = json!({"kind": kind, "entries": rows});
    write(path, &(serde_json::to_string_pretty(&body).expect("manifest serializes") + "\n"))
}

fn outcome(entries: &[(String, Result<Vec<String>, String>)]) -> Outcome {
    let mut o = Outcome::default();
    for (id, r) in entries {
        match r {
            Ok(_) => o.ok.push(id.clone()),
            Err(e) => {
                log::error!("{id}: {e}");
                o.failed.push((id.clone(), e.clone()));
            }
        }
    }
    o
}

fn prepare(cfg: &RunConfig) -> Result<rayon::ThreadPool, HarnessError> {
    cfg.validate()?;
    write(&cfg.out.join("run_config.json"), &cfg.to_json())?;
    pool(cfg.jobs)
}

pub fn generate_one(
    cfg: &RunConfig,
    kb: &[KnowledgeEntry],
    lib: &RoadLibrary,
    id: &str,
    prompt: &str,
) -> Result<Generated, HarnessError> {
    let backend = cfg.backend.backend(cfg.substream(&format!("{id}/generate")));
    Ok(generate_meta(kb, prompt, &backend, lib)?)
}

/// Writes `meta/<id>/{meta.json,scene.scenic,semantics.json}` for every
/// prompt and seed, then `meta/manifest.json`.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    let pool = prepare(cfg)?;
    let kb = bundled_kb();
    let lib = RoadLibrary::standard();
    let jobs: Vec<(String, &str)> = cfg
        .prompts
        .iter()
        .flat_map(|(name, prompt)| (0..cfg.seeds_per_prompt).map(move |i| (scenario_id(name, i), prompt.as_str())))
        .collect();
    let root = cfg.out.join("meta");
    let entries: Vec<(String, Result<Vec<String>, String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|(id, prompt)| {
                let run = || -> Result<Vec<String>, HarnessError> {
                    let g = generate_one(cfg, &kb, &lib, id, prompt)?;
                    let dir = root.join(id);
                    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
                    save_meta(&g.meta, dir.join("meta.json"))?;
                    write(&dir.join("scene.scenic"), &emit_scenic(&g.meta))?;
                    let semantics = json!({
                        "prompt": prompt,
                        "retrieved": g.retrieved.iter().map(|e| format!("{} {}", e.source, e.id)).collect::<Vec<_>>(),
                        "tuple": g.tuple,
                        "structured": g.structured,
                    });
                    write(&dir.join("semantics.json"), &(serde_json::to_string_pretty(&semantics).expect("serializes") + "\n"))?;
                    Ok(["meta.json", "scene.scenic", "semantics.json"].map(|f| format!("{id}/{f}")).to_vec())
                };
                (id.clone(), run().map_err(|e| e.to_string()))
            })
            .collect()
    });
    write_manifest(&root.join("manifest.json"), "meta", &entries)?;
    Ok(outcome(&entries))
}

/// Baseline traffic for `meta`, the ego's benign replay through it, and the
/// evolved scenario.
pub fn evolve_one(cfg: &RunConfig, id: &str, meta: &MetaScenario) -> Result<Evolution, HarnessError> {
    let seed = cfg.substream(&format!("{id}/flow"));
    let backgrounds = generate_meta_flow(meta, cfg.n_backgrounds, seed, &cfg.flow)?;
    let benign = AdvScenario::with_backgrounds(meta.clone(), backgrounds.clone());
    let log = simulate_with(&benign, &cfg.ego, &SimOptions { include_adversary: false, t_max: cfg.t_max });
    let ego = ego_trajectory(&log, meta.frames());
    Ok(evolve_scenario(meta, backgrounds, &ego, &cfg.evolve)?)
}

/// Input files of a stage: explicit paths, or everything under `<out>/<sub>`
/// named `file`.
fn discover(cfg: &RunConfig, inputs: &[PathBuf], sub: &str, file: &str) -> Result<Vec<PathBuf>, HarnessError> {
    if !inputs.is_empty() {
        return Ok(inputs.to_vec());
    }
    let dir = cfg.out.join(sub);
    let mut found = Vec::new();
    let entries = fs::read_dir(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    for entry in entries {
        let p = entry.map_err(|e| HarnessError::io(&dir, e))?.path().join(file);
        if p.is_file() {
            found.push(p);
        }
    }
    found.sort();
    Ok(found)
}

/// Scenario id of an input file: its directory name, or the file stem for
/// files outside a per-scenario directory.
fn id_of(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    if matches!(stem, "meta" | "scenario") {
        if let Some(dir) = path.parent().and_then(|d| d.file_name()).and_then(|d| d.to_str()) {
            return dir.to_owned();
        }
    }
    stem.to_owned()
}

/// Evolves every meta file (default `<out>/meta/*/meta.json`) into
/// `adv/<id>/{scenario.json,traces.csv[,graph.json]}`.
pub fn cmd_evolve(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<Outcome, HarnessError> {
    let pool = prepare(cfg)?;
    let files = discover(cfg, inputs, "meta", "meta.json")?;
    let root = cfg.out.join("adv");
    let entries: Vec<(String, Result<Vec<String>, String>)> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let id = id_of(path);
                let run = || -> Result<Vec<String>, HarnessError> {
                    let meta = load_meta(path)?;
                    let evo = evolve_one(cfg, &id, &meta)?;
                    let dir = root.join(&id);
                    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
                    save_scenario(&evo.scenario, dir.join("scenario.json"))?;
                    let mut traces = String::from("agent,iter,total,l_ego,l_occ,l_smooth\n");
                    for (c, trace) in evo.collaborators.iter().zip(&evo.traces) {
                        for line in trace_csv(trace).lines().skip(1) {
                            traces.push_str(&format!("{},{line}\n", c.index));
                        }
                    }
                    write(&dir.join("traces.csv"), &traces)?;
                    let mut files = vec![format!("{id}/scenario.json"), format!("{id}/traces.csv")];
                    if cfg.dump_graph {
                        let dump = GraphDump::new(&evo.relevance, evo.collaborators.clone());
                        write(&dir.join("graph.json"), &(serde_json::to_string(&dump).expect("serializes") + "\n"))?;
                        files.push(format!("{id}/graph.json"));
                    }
                    Ok(files)
                };
                (id.clone(), run().map_err(|e| e.to_string()))
            })
            .collect()
    });
    let mut entries = entries;
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    write_manifest(&root.join("manifest.json"), "adversarial", &entries)?;
    Ok(outcome(&entries))
}

/// The scenario as replayed in `stage`, and the matching simulator options.
pub fn stage_scenario(s: &AdvScenario, stage: Stage, t_max: usize) -> (AdvScenario, SimOptions) {
    match stage {
        Stage::Benign => (s.baseline(), SimOptions { include_adversary: false, t_max }),
        Stage::Meta => (AdvScenario::from_meta(s.meta.clone()), SimOptions { include_adversary: true, t_max }),
        Stage::Adversarial => (s.clone(), SimOptions { include_adversary: true, t_max }),
    }
}

pub fn evaluate_one(cfg: &RunConfig, s: &AdvScenario, stage: Stage) -> Result<(RolloutLog, RolloutMetrics), HarnessError> {
    let (scenario, opts) = stage_scenario(s, stage, cfg.t_max);
    let log = simulate_with(&scenario, &cfg.ego, &opts);
    let ctx = &scenario.meta.context;
    let m = compute_rollout_metrics(&log, &ctx.route, ctx)?;
    Ok((log, m))
}

fn load_any(path: &Path) -> Result<AdvScenario, HarnessError> {
    if path.file_name().is_some_and(|n| n == "meta.json") {
        Ok(AdvScenario::from_meta(load_meta(path)?))
    } else {
        Ok(load_scenario(path)?)
    }
}

fn stage_inputs(cfg: &RunConfig, stage: Stage, inputs: &[PathBuf]) -> Result<Vec<PathBuf>, HarnessError> {
    if inputs.is_empty() && stage == Stage::Meta && !cfg.out.join("adv").is_dir() {
        return discover(cfg, inputs, "meta", "meta.json");
    }
    discover(cfg, inputs, "adv", "scenario.json")
}

/// Replays every scenario (default `<out>/adv/*/scenario.json`) in `stage`
/// and writes `eval/<stage>/<id>/{rollout.json,rollout.csv,metrics.json}`.
pub fn cmd_simulate(cfg: &RunConfig, stage: Stage, inputs: &[PathBuf]) -> Result<StageReport, HarnessError> {
    let pool = prepare(cfg)?;
    let files = stage_inputs(cfg, stage, inputs)?;
    let root = cfg.out.join("eval").join(stage.as_str());
    let results: Vec<(String, Result<RolloutMetrics, String>)> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let id = id_of(path);
                let run = || -> Result<RolloutMetrics, HarnessError> {
                    let s = load_any(path)?;
                    let (log, m) = evaluate_one(cfg, &s, stage)?;
                    let dir = root.join(&id);
                    write(&dir.join("rollout.json"), &log.to_json())?;
                    write(&dir.join("rollout.csv"), &log.to_csv())?;
                    write(&dir.join("metrics.json"), &(serde_json::to_string_pretty(&m).expect("serializes") + "\n"))?;
                    Ok(m)
                };
                (id.clone(), run().map_err(|e| e.to_string()))
            })
            .collect()
    });
    let mut results = results;
    results.sort_by(|a, b| a.0.cmp(&b.0));
    let entries: Vec<(String, Result<Vec<String>, String>)> = results
        .iter()
        .map(|(id, r)| {
            let files = ["rollout.json", "rollout.csv", "metrics.json"].map(|f| format!("{id}/{f}")).to_vec();
            (id.clone(), r.clone().map(|_| files))
        })
        .collect();
    write_manifest(&root.join("manifest.json"), stage.as_str(), &entries)?;
    let rollouts = results.into_iter().filter_map(|(id, r)| r.ok().map(|m| (id, m))).collect();
    Ok(StageReport { stage, outcome: outcome(&entries), rollouts, report: None })
}

#[derive(Serialize, Deserialize)]
struct StageFile {
    stage: Stage,
    report: MetricsReport,
    scenarios: Vec<(String, RolloutMetrics)>,
}

/// `cmd_simulate` followed by aggregation into `eval/<stage>/report.{json,csv}`.
pub fn cmd_evaluate(cfg: &RunConfig, stage: Stage, inputs: &[PathBuf]) -> Result<StageReport, HarnessError> {
    let mut sr = cmd_simulate(cfg, stage, inputs)?;
    if sr.rollouts.is_empty() {
        return Ok(sr);
    }
    let metrics: Vec<RolloutMetrics> = sr.rollouts.iter().map(|(_, m)| *m).collect();
    let report = aggregate_suite_with(&metrics, &cfg.score)?;
    let root = cfg.out.join("eval").join(stage.as_str());
    let file = StageFile { stage, report, scenarios: sr.rollouts.clone() };
    write(&root.join("report.json"), &(serde_json::to_string_pretty(&file).expect("serializes") + "\n"))?;
    write(&root.join("report.csv"), &report_csv(&[(stage.to_string(), report)]))?;
    sr.report = Some(report);
    Ok(sr)
}

/// Collects every `eval/<stage>/report.json` under `out` into `report.csv`,
/// `report.txt` and `bars.csv` (per-stage safety / completion / comfort), and
/// returns the text table.
pub fn cmd_report(cfg: &RunConfig) -> Result<String, HarnessError> {
    let mut rows = Vec::new();
    for stage in Stage::ALL {
        let path = cfg.out.join("eval").join(stage.as_str()).join("report.json");
        if !path.is_file() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let file: StageFile = serde_json::from_str(&text).map_err(|e| HarnessError::io(&path, e))?;
        rows.push((stage.to_string(), file.report));
    }
    if rows.is_empty() {
        return Err(HarnessError::Config(format!("no stage reports under {}", cfg.out.join("eval").display())));
    }
    let table = report_table(&rows);
    write(&cfg.out.join("report.csv"), &report_csv(&rows))?;
    write(&cfg.out.join("report.txt"), &table)?;
    write(&cfg.out.join("bars.csv"), &bar_csv(&rows, cfg.score.a_ref))?;
    Ok(table)
}

/// Hex SHA-256 over every file below `dir` (sorted relative path, then
/// contents).
pub fn tree_digest(dir: &Path) -> Result<String, HarnessError> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
        for entry in fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))? {
            let p = entry.map_err(|e| HarnessError::io(dir, e))?.path();
            if p.is_dir() {
                walk(base, &p, out)?;
            } else {
                out.push(p.strip_prefix(base).expect("below base").to_path_buf());
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.to_string_lossy().as_bytes());
        h.update([0]);
        let bytes = fs::read(dir.join(&f)).map_err(|e| HarnessError::io(dir.join(&f), e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
