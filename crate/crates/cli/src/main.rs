//! `mfgcrn`: synthetic data, training, evaluation, baselines, gradient
//! checks, graph inspection and feature ablations from one config file.

mod commands;
mod config;
mod logging;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfgcrn::Result;
use toml::Value;

use crate::config::{parse_override, RunConfig};

#[derive(Parser)]
#[command(
    name = "mfgcrn",
    version,
    about = "Short-term transit demand forecasting"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of synthetic data and of the first model.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for seeds and ablation variants.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Floating-point width; only 64 is supported.
    #[arg(long, global = true, value_parser = ["32", "64"])]
    precision: Option<String>,
    /// Override a config leaf, e.g. `--set train.patience=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Suppress progress logging on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic city and write its data files.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per seed and score it on the test split.
    Train,
    /// Score a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Score the heuristic baselines on the test split.
    Baseline,
    /// Compare reverse-mode gradients with finite differences.
    Gradcheck,
    /// Train every feature-subset variant for every seed.
    Ablate,
    /// Inspect adjacency matrices.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
}

#[derive(Subcommand)]
enum GraphAction {
    /// Write the proximity graph and, given a checkpoint, the attention graphs.
    Dump {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn effective_config(g: &Global) -> Result<RunConfig> {
    let mut overrides = g
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(seed) = g.seed {
        overrides.push(("seed".into(), Value::Integer(seed as i64)));
    }
    if let Some(jobs) = g.jobs {
        overrides.push(("jobs".into(), Value::Integer(jobs as i64)));
    }
    if let Some(p) = &g.precision {
        overrides.push((
            "precision".into(),
            Value::Integer(p.parse().expect("validated by clap")),
        ));
    }
    let config = RunConfig::load(g.config.as_deref(), &overrides)?;
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let config = effective_config(&cli.global)?;
    let quiet = cli.global.quiet;
    match cli.command {
        Command::Synth { out } => commands::synth(&config, &out),
        Command::Train => commands::train(&config, quiet),
        Command::Eval { checkpoint } => commands::eval(&config, &checkpoint, quiet),
        Command::Baseline => commands::baseline(&config, quiet),
        Command::Gradcheck => commands::gradcheck(&config),
        Command::Ablate => commands::ablate(&config, quiet),
        Command::Graph {
            action: GraphAction::Dump { checkpoint },
        } => commands::graph_dump(&config, checkpoint.as_deref(), quiet),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    logging::init(cli.global.quiet);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            log::logger().flush();
            ExitCode::from(2)
        }
    }
}
