//! `facets`: phase diagrams, simulations and snapshot analysis.
//!
//! Exit codes: 0 success, 1 config error, 2 runtime error.

mod commands;
mod config;
mod provenance;
mod stats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{config_error, ConfigError, ExperimentConfig};
use crate::provenance::RunDir;

#[derive(Parser)]
#[command(name = "facets", version, about = "Layered facets of an SOS interface: phase diagrams and Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical slopes, bulk-excess thresholds and optimal stacks along a sweep.
    Phase(Common),
    /// Run chains for every excess value and replica.
    Simulate(Common),
    /// Level-line statistics of saved height fields.
    Analyze(AnalyzeArgs),
    /// Dump a norm's Wulff polygon and tension profile.
    Norm(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, env = "FACETS_OUT")]
    out: Option<PathBuf>,
    /// Worker threads for simulations.
    #[arg(long, env = "FACETS_WORKERS")]
    workers: Option<usize>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Directory of height-field CSV files.
    #[arg(long)]
    snapshots: PathBuf,
    /// Predicted layers as JSON `{"layers": [polygon, ...]}`.
    #[arg(long, conflicts_with = "excess")]
    prediction: Option<PathBuf>,
    /// Predict the optimal stack at this bulk excess (needs a config with a model).
    #[arg(long)]
    excess: Option<f64>,
    /// Large-contour threshold; defaults to the config model's, else 0.25.
    #[arg(long)]
    eps: Option<f64>,
}

impl Common {
    fn load(&self) -> anyhow::Result<Option<ExperimentConfig>> {
        let Some(path) = &self.config else { return Ok(None) };
        let mut c = ExperimentConfig::load(path)?;
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        Ok(Some(c))
    }

    fn require(&self) -> anyhow::Result<ExperimentConfig> {
        self.load()?.ok_or_else(|| config_error("--config is required"))
    }

    fn out_dir(&self, config: Option<&ExperimentConfig>) -> PathBuf {
        self.out.clone().or_else(|| config.and_then(|c| c.out.clone())).unwrap_or_else(|| PathBuf::from("facets-out"))
    }

    fn workers(&self) -> anyhow::Result<usize> {
        match self.workers {
            Some(0) => Err(config_error("--workers must be positive")),
            Some(k) => Ok(k),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Phase(args) => {
            let config = args.require()?;
            let c = config.continuum()?;
            let dir = RunDir::create(&args.out_dir(Some(&config)), "phase", Some(&config), &[], json!(null))?;
            commands::phase::run(&config, &dir, &c)
        }
        Command::Norm(args) => {
            let config = args.require()?;
            let c = config.continuum()?;
            let dir = RunDir::create(&args.out_dir(Some(&config)), "norm", Some(&config), &[], json!(null))?;
            commands::norm::run(&dir, &c)
        }
        Command::Simulate(args) => {
            let config = args.require()?;
            let c = config.continuum()?;
            config.validate_simulation()?;
            let workers = args.workers()?;
            let streams: Vec<u64> = commands::simulate::jobs(&config).into_iter().map(|j| j.2).collect();
            let dir = RunDir::create(&args.out_dir(Some(&config)), "simulate", Some(&config), &streams, json!(null))?;
            commands::simulate::run(&config, &dir, &c, workers)
        }
        Command::Analyze(args) => {
            let config = args.common.load()?;
            let eps = args.eps.or_else(|| config.as_ref().and_then(|c| c.model.as_ref().map(|m| m.eps))).unwrap_or(0.25);
            if !(eps > 0.0) {
                return Err(config_error(format!("eps = {eps}")));
            }
            let prediction = match (&args.prediction, args.excess) {
                (Some(path), _) => Some(commands::analyze::load_prediction(path)?),
                (None, Some(a)) => {
                    let cfg = config.as_ref().ok_or_else(|| config_error("--excess needs --config"))?;
                    let c = cfg.continuum()?;
                    let m = c.model.ok_or_else(|| config_error("--excess needs a config with a model"))?;
                    if !(a.is_finite() && a >= 0.0) {
                        return Err(config_error(format!("excess = {a}")));
                    }
                    let s = facets::phase::solve_vp_delta(a / m.delta_p, m.diffusivity, m.tau_e, c.wulff.w, cfg.phase.l_max)?;
                    log::info!("predicted stack at A = {a}: {}", s.stack.to_json());
                    Some(facets::metrics::StackPrediction::from_stack(&s.stack, &c.wulff))
                }
                (None, None) => None,
            };
            let inputs = json!({
                "snapshots": args.snapshots,
                "prediction": args.prediction,
                "excess": args.excess,
                "eps": eps,
            });
            let dir = RunDir::create(&args.common.out_dir(config.as_ref()), "analyze", config.as_ref(), &[], inputs)?;
            commands::analyze::run(&dir, &args.snapshots, eps, prediction.as_ref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("{e:#}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
