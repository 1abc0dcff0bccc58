use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rsma::harness::{run_experiment, ExperimentConfig, ExperimentKind};
use rsma::optimizer::Method;

#[derive(Parser)]
#[command(name = "rsma-sim", version, about = "Energy-efficiency experiments for rate-splitting precoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SE-EE tradeoff over the weight grid.
    Tradeoff(Common),
    /// EE and SE against transmit SNR.
    EeVsSnr(Common),
    /// Per-iteration traces and iteration counts of every method.
    Convergence(Common),
    /// Monte Carlo sweep over random channels.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated method names, e.g. RS-GCP,NoRS-GCP.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
}

fn resolve(kind: ExperimentKind, args: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => kind.default_config(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(methods) = &args.methods {
        cfg.methods = methods.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<usize> {
    let (kind, args) = match &cli.command {
        Command::Tradeoff(a) => (ExperimentKind::Tradeoff, a),
        Command::EeVsSnr(a) => (ExperimentKind::EeVsSnr, a),
        Command::Convergence(a) => (ExperimentKind::Convergence, a),
        Command::Sweep(a) => (ExperimentKind::Sweep, a),
    };
    let cfg = resolve(kind, args)?;
    let summary = run_experiment(&cfg, kind, &args.out)?;
    for f in &summary.files {
        println!("{}", f.display());
    }
    eprintln!("{}: {} rows, {} solver failures", kind.name(), summary.rows, summary.failures);
    Ok(summary.failures)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
