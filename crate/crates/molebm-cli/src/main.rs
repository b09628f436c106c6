//! `molebm`: train, sample, and evaluate molecular graph energy models.
//!
//! Settings resolve in a fixed order: built-in defaults, then the `--config`
//! file, then `--set key=value` overrides, then dedicated flags such as
//! `--seed` and `--count`. Exit codes: 0 success, 1 usage error, 2 data
//! error, 3 numerical abort.

mod commands;
mod error;
mod scorer;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use molebm::io::RunConfig;

use crate::commands::Ctx;

#[derive(Parser)]
#[command(
    name = "molebm",
    version,
    about = "Train, sample, and evaluate molecular graph energy models",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort."
)]
struct Cli {
    /// RNG seed for model init, training, and sampling
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Flat `key = value` configuration file
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output directory, created if missing [default: .]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// One configuration override, e.g. --set epochs=5 (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an energy model; writes model.gebm and epochs.csv
    Train(TrainArgs),
    /// Train with goal-directed property weighting (dataset needs y values)
    GoalTrain(TrainArgs),
    /// Sample molecules from a checkpoint; writes generated.jsonl and metrics
    Generate(GenerateArgs),
    /// Sample from the sum of two or more checkpoints
    ComposeGenerate(ComposeGenerateArgs),
    /// Rewrite seed molecules under a similarity constraint; writes constrained.csv
    Optimize(OptimizeArgs),
    /// Recompute metrics for a generated.jsonl file
    EvalMetrics(EvalMetricsArgs),
    /// Read SMILES lines from stdin, print one canonical key per line
    Canonicalize,
}

#[derive(Args)]
struct TrainArgs {
    /// Training set: JSONL records or a .smi file
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Molecules to sample (overrides config `count`)
    #[arg(long, value_name = "N")]
    count: Option<usize>,

    /// Canonical keys of the training set; novelty is 1 when omitted
    #[arg(long, value_name = "FILE")]
    training_keys: Option<PathBuf>,

    /// Also write per-chain energy traces to traces.csv
    #[arg(long)]
    traces: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Trained model checkpoint
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,

    #[command(flatten)]
    sample: SampleArgs,
}

#[derive(Args)]
struct ComposeGenerateArgs {
    /// Model checkpoint to include; give the flag at least twice
    #[arg(long = "checkpoint", value_name = "FILE", required = true)]
    checkpoints: Vec<PathBuf>,

    #[command(flatten)]
    sample: SampleArgs,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Trained model checkpoint
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,

    /// Seed molecules: JSONL records or a .smi file
    #[arg(long, value_name = "FILE")]
    seeds: PathBuf,

    /// Similarity thresholds, e.g. --delta 0.0,0.2,0.4,0.6
    #[arg(long = "delta", value_delimiter = ',', value_name = "LIST")]
    delta: Option<Vec<f64>>,

    /// Property scorer, e.g. atom-fraction:C (see also config `property`)
    #[arg(long, value_name = "NAME")]
    property: Option<String>,

    /// Langevin chains started per seed molecule
    #[arg(long, value_name = "N")]
    chains_per_seed: Option<usize>,
}

#[derive(Args)]
struct EvalMetricsArgs {
    /// Generated molecules (JSONL, as written by generate)
    #[arg(long, value_name = "FILE")]
    generated: PathBuf,

    /// Canonical keys of the training set; novelty is 1 when omitted
    #[arg(long, value_name = "FILE")]
    training_keys: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is a
            // usage error, which this tool reports as exit 1.
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), error::CliError> {
    // Canonical keys never depend on padding, so canonicalize defaults to
    // the widest built-in vocabulary instead of the QM9 one.
    let base = match cli.command {
        Command::Canonicalize => {
            let mut cfg = RunConfig::default();
            cfg.apply("preset", "zinc").expect("zinc is a known preset");
            cfg
        }
        _ => RunConfig::default(),
    };
    let ctx = Ctx::new(cli.seed, cli.config.as_deref(), cli.out, &cli.set, base)?;
    match &cli.command {
        Command::Train(args) => commands::train::run(&ctx, &args.data, false),
        Command::GoalTrain(args) => commands::train::run(&ctx, &args.data, true),
        Command::Generate(args) => commands::generate::run(&ctx, args),
        Command::ComposeGenerate(args) => commands::generate::run_compose(&ctx, args),
        Command::Optimize(args) => commands::optimize::run(&ctx, args),
        Command::EvalMetrics(args) => commands::eval_metrics::run(&ctx, args),
        Command::Canonicalize => commands::canonicalize::run(&ctx),
    }
}
