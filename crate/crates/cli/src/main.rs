//! `levyflat`: invariance and flatness checks for jump-driven SPDEs on
//! finite-dimensional manifolds.

mod config;
mod plots;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levyflat::models::{build_model, ModelParams, MODEL_NAMES};

use crate::config::{resolve_seed, RunConfig, SEED_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<levyflat::Error> for CliError {
    fn from(e: levyflat::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "levyflat", version, about = "Invariance and flatness checks for jump-driven SPDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the selected tests on a model and write report.json.
    Run(RunArgs),
    /// Turn a report into two-column gnuplot data files.
    EmitPlots {
        /// Path to a report.json written by `run`.
        report: PathBuf,
        /// Output directory; defaults to the report's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in models.
    ListModels,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file (JSON when the extension is .json).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in model name (see list-models).
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated: tangency, jump-closure, path-invariance, flatness, decompose, all.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    tests: Option<Vec<String>>,
    /// Overrides the config file and the LEVYFLAT_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Time step of the path-invariance simulation.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulation horizon T.
    #[arg(long)]
    horizon: Option<f64>,
    /// Monte Carlo paths for path invariance.
    #[arg(long)]
    n_paths: Option<usize>,
    /// Chart-coordinate radius of the flatness neighbourhoods.
    #[arg(long)]
    radius: Option<f64>,
    /// Tangent spaces sampled per flatness neighbourhood.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Singular-value tolerance of the subspace intersection.
    #[arg(long)]
    tol: Option<f64>,
    /// Jump size below which a coordinate counts as small-jump.
    #[arg(long)]
    eps_min: Option<f64>,
    /// Pass threshold of the tangency residual.
    #[arg(long)]
    tangency_threshold: Option<f64>,
    /// Pass threshold of the jump-closure residual.
    #[arg(long)]
    jump_closure_threshold: Option<f64>,
    /// Pass threshold of the path-invariance residual.
    #[arg(long)]
    path_threshold: Option<f64>,
    /// Pass threshold of the decomposition residual.
    #[arg(long)]
    decompose_threshold: Option<f64>,
}

impl RunArgs {
    fn apply(self, cfg: &mut RunConfig) -> Option<u64> {
        fn set<T>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if self.model.is_some() {
            cfg.model = self.model;
        }
        set(&mut cfg.tests, self.tests);
        set(&mut cfg.output, self.output);
        let n = &mut cfg.numerics;
        set(&mut n.dt, self.dt);
        set(&mut n.horizon, self.horizon);
        set(&mut n.n_paths, self.n_paths);
        set(&mut n.radius, self.radius);
        set(&mut n.n_samples, self.n_samples);
        set(&mut n.tol, self.tol);
        set(&mut n.eps_min, self.eps_min);
        let t = &mut cfg.thresholds;
        set(&mut t.tangency, self.tangency_threshold);
        set(&mut t.jump_closure, self.jump_closure_threshold);
        set(&mut t.path, self.path_threshold);
        set(&mut t.decompose, self.decompose_threshold);
        self.seed
    }
}

fn run_command(mut args: RunArgs) -> Result<i32, CliError> {
    let mut cfg = match args.config.take() {
        Some(path) => config::load(&path)?,
        None => RunConfig::default(),
    };
    let file_seed = cfg.seed;
    let flag_seed = args.apply(&mut cfg);
    let seed = resolve_seed(flag_seed, file_seed, std::env::var(SEED_ENV).ok())?;
    run::run(cfg, seed)
}

fn list_models() -> Result<i32, CliError> {
    let params = ModelParams::default();
    for name in MODEL_NAMES {
        let m = build_model(name, &params)?;
        let flatness = m.expected.flatness.map_or("-".into(), |d| d.to_string());
        let class = m.expected.classification.map_or("-".into(), |c| format!("{c:?}"));
        println!(
            "{name:28} ambient {:3}  dim {}  invariant {:5}  flatness {flatness}  {class}",
            m.manifold.space().dim(),
            m.manifold.dim(),
            m.expected.invariant
        );
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run_command(args),
        Command::EmitPlots { report, out } => {
            let dir = out.unwrap_or_else(|| report.parent().map(PathBuf::from).unwrap_or_default());
            plots::emit_plots(&report, &dir).map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
                0
            })
        }
        Command::ListModels => list_models(),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("levyflat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
