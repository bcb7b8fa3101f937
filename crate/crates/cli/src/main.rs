//! `fairwash`: train unfair black-box classifiers, fit fairwashed surrogate
//! explainers under unfairness constraints, sweep fidelity-unfairness
//! trade-offs, and quantify how manipulable the explanations are.

mod commands;
mod config;
mod error;
mod manifest;
mod svg;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use error::{CliError, CliResult};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "fairwash",
    version,
    about = "Fairwashing attack analysis: constrained surrogate explainers and their trade-offs"
)]
struct Cli {
    /// Experiment config (JSON). Required by every command except `report`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker pool size for sweeps and matrices (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the train / suing / test partitions for every resample index.
    Split,
    /// Train the black-box families and report accuracy + unfairness per
    /// partition.
    TrainBlackbox,
    /// Sweep fairwashed explainers over the ε grid and extract the Pareto
    /// front.
    Attack,
    /// Re-evaluate the sweep's explainers on the held-out test set.
    Generalize,
    /// Fairwash against each teacher model and evaluate against every
    /// student model.
    Transfer,
    /// Compute the disparity range of near-optimal surrogates per fidelity
    /// level.
    Rashomon,
    /// Render SVG plots and a text summary from a run directory.
    Report,
}

fn build_pool(jobs: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = jobs {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    if jobs.is_some() {
        eprintln!("warning: built without the `parallel` feature; --jobs has no effect");
    }
}

fn run(cli: Cli) -> CliResult<()> {
    build_pool(cli.jobs);
    if let Command::Report = cli.command {
        let out = cli
            .out
            .ok_or_else(|| CliError::Usage("report requires --out RUN_DIR".into()))?;
        return commands::cmd_report(&out);
    }

    let config_path = cli
        .config
        .ok_or_else(|| CliError::Usage("missing --config PATH".into()))?;
    let mut config = ExperimentConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set `out`".into()))?;
    std::fs::create_dir_all(&out)?;
    let ctx = commands::Ctx { config, out };

    match cli.command {
        Command::Split => commands::cmd_split(&ctx),
        Command::TrainBlackbox => commands::cmd_train_blackbox(&ctx),
        Command::Attack => commands::cmd_attack(&ctx),
        Command::Generalize => commands::cmd_generalize(&ctx),
        Command::Transfer => commands::cmd_transfer(&ctx),
        Command::Rashomon => commands::cmd_rashomon(&ctx),
        Command::Report => unreachable!("handled above"),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
