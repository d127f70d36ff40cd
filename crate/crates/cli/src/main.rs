use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use scenevo::harness::{self, BackendMode, RunConfig, Stage};
use scenevo::knowledge::RemoteConfig;
use scenevo::perturb::LossWeights;

#[derive(Parser)]
#[command(name = "scenevo", version, about = "Generate, evolve and replay safety-critical driving scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Meta-scenarios for every base prompt and seed.
    Generate(Common),
    /// Background traffic and collaborator perturbation for each meta-scenario.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Meta files; defaults to <out>/meta/*/meta.json.
        inputs: Vec<PathBuf>,
    },
    /// Replay scenarios and write per-rollout logs.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = StageArg::Adversarial)]
        stage: StageArg,
        /// Scenario files; defaults to <out>/adv/*/scenario.json.
        inputs: Vec<PathBuf>,
    },
    /// Replay scenarios and aggregate a suite report.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = StageArg::Adversarial)]
        stage: StageArg,
        inputs: Vec<PathBuf>,
    },
    /// Metric table over every evaluated stage.
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Benign,
    Meta,
    Adversarial,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Benign => Stage::Benign,
            StageArg::Meta => Stage::Meta,
            StageArg::Adversarial => Stage::Adversarial,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Template,
    Remote,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Chat-completions endpoint for the remote backend.
    #[arg(long)]
    backend_url: Option<String>,
    #[arg(long)]
    backend_model: Option<String>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    backgrounds: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    /// Same as --lambda2 0.
    #[arg(long)]
    no_occlusion_loss: bool,
    /// Write the relevance tensor and collaborator set per scenario.
    #[arg(long)]
    dump_graph: bool,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.jobs {
            c.jobs = v;
        }
        match self.backend {
            Some(BackendArg::Template) => c.backend = BackendMode::Template,
            Some(BackendArg::Remote) if !matches!(c.backend, BackendMode::Remote(_)) => {
                c.backend = BackendMode::Remote(RemoteConfig::default())
            }
            _ => {}
        }
        if let BackendMode::Remote(r) = &mut c.backend {
            if let Some(u) = &self.backend_url {
                r.url = u.clone();
            }
            if let Some(m) = &self.backend_model {
                r.model = m.clone();
            }
        }
        if let Some(v) = self.seeds {
            c.seeds_per_prompt = v;
        }
        if let Some(v) = self.backgrounds {
            c.n_backgrounds = v;
        }
        if let Some(v) = self.gamma {
            c.evolve.gamma = v;
        }
        if let Some(v) = self.k {
            c.evolve.k = v;
        }
        if let Some(v) = self.ratio {
            c.evolve.ratio = v;
        }
        let w = c.evolve.weights;
        let l2 = if self.no_occlusion_loss { Some(0.0) } else { self.lambda2 };
        c.evolve.weights = LossWeights::new(
            self.lambda1.unwrap_or(w.lambda1),
            l2.unwrap_or(w.lambda2),
            self.lambda3.unwrap_or(w.lambda3),
        )?;
        c.dump_graph |= self.dump_graph;
        Ok(c)
    }
}

fn summarize(what: &str, o: &harness::Outcome) -> i32 {
    println!("{what}: {} ok, {} failed", o.ok.len(), o.failed.len());
    for (id, e) in &o.failed {
        println!("  FAILED {id}: {e}");
    }
    o.exit_code()
}

fn run(cli: Cli) -> Result<i32> {
    Ok(match cli.command {
        Command::Generate(c) => {
            let cfg = c.config()?;
            let o = harness::cmd_generate(&cfg).context("generate")?;
            println!("manifest: {}", cfg.out.join("meta/manifest.json").display());
            summarize("generate", &o)
        }
        Command::Evolve { common, inputs } => {
            let cfg = common.config()?;
            summarize("evolve", &harness::cmd_evolve(&cfg, &inputs).context("evolve")?)
        }
        Command::Simulate { common, stage, inputs } => {
            let cfg = common.config()?;
            let sr = harness::cmd_simulate(&cfg, stage.into(), &inputs).context("simulate")?;
            summarize(&format!("simulate {}", sr.stage), &sr.outcome)
        }
        Command::Evaluate { common, stage, inputs } => {
            let cfg = common.config()?;
            let sr = harness::cmd_evaluate(&cfg, stage.into(), &inputs).context("evaluate")?;
            if let Some(r) = &sr.report {
                print!("{}", scenevo::metrics::report_table(&[(sr.stage.to_string(), *r)]));
            }
            summarize(&format!("evaluate {}", sr.stage), &sr.outcome)
        }
        Command::Report(c) => {
            let cfg = c.config()?;
            print!("{}", harness::cmd_report(&cfg).context("report")?);
            0
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors are fatal (1); 2 is reserved for partial failure.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
