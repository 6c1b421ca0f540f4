//! Command-line runner for civitas experiments.

pub mod commands;
pub mod plan;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "civitas", version, about = "Run, evolve and analyse constitutional society simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every (environment, method, profile, multiplier, seed) cell of a plan.
    Run(RunArgs),
    /// Run a multiplier sweep; defaults to the 1.5 / 1.0 / 0.75 ablation.
    Sweep(RunArgs),
    /// Search for a constitution with island MAP-Elites.
    Evolve(EvolveArgs),
    /// Pairwise Welch tests over run records or the bundled per-seed tables.
    Stats(StatsArgs),
    /// Rule-category profile of one or more constitutions.
    Classify(ClassifyArgs),
    /// Re-run a saved record and check that it reproduces byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Chat-completions URL; agents and deliberation go through the model when set.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value = "openai/gpt-oss-120b")]
    pub model: String,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML or JSON plan file; flags override its values.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Comma-separated environments: gridworld, public_goods, trading.
    #[arg(long)]
    pub env: Option<String>,
    /// Comma-separated methods: control, deliberation, evolution.
    #[arg(long)]
    pub method: Option<String>,
    /// Seeds such as `42-51` or `42,43`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Comma-separated pool multipliers.
    #[arg(long)]
    pub multiplier: Option<String>,
    /// Constitution file or bundled name installed under the evolution method.
    #[arg(long)]
    pub constitution: Option<String>,
    /// Comma-separated scripted profiles.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvolveArgs {
    #[arg(long, default_value = "public_goods")]
    pub env: String,
    #[arg(long, default_value_t = 1.5)]
    pub multiplier: f64,
    #[arg(long, default_value_t = 30)]
    pub iterations: u32,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "evolution")]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Directory of run records; the bundled per-seed tables are used when absent.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// An external copy of the per-seed table, checked against the pinned hash.
    #[arg(long, conflicts_with = "records")]
    pub fixture: Option<PathBuf>,
    /// Also write report.txt and comparisons.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    /// Constitution files or bundled names; every bundled constitution when empty.
    #[arg(long = "constitution")]
    pub constitutions: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub record: PathBuf,
    /// Write the regenerated record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> anyhow::Result<String> {
    match cli.command {
        Command::Run(a) => commands::cmd_run(&a, false),
        Command::Sweep(a) => commands::cmd_run(&a, true),
        Command::Evolve(a) => commands::cmd_evolve(&a),
        Command::Stats(a) => commands::cmd_stats(&a),
        Command::Classify(a) => commands::cmd_classify(&a),
        Command::Replay(a) => commands::cmd_replay(&a),
    }
}
