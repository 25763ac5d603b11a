//! The `shortdesc` pipeline: each subcommand reads its predecessors' files
//! from the output directory, writes its own, and records a manifest of
//! input and output digests.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::Context;
pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("missing input {}; run `shortdesc {command}` first", path.display())]
    MissingInput { path: PathBuf, command: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// 2 for problems with the invocation, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::MissingInput { .. } => 2,
            CliError::Io { .. } | CliError::Runtime(_) => 1,
        }
    }
}

impl From<shortdesc::Error> for CliError {
    fn from(e: shortdesc::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<shortdesc_eval::ServiceError> for CliError {
    fn from(e: shortdesc_eval::ServiceError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "shortdesc", version, about = "Multilingual short-description experiments")]
pub struct Cli {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory shared by all subcommands.
    #[arg(long, global = true, default_value = "run")]
    pub out: PathBuf,
    /// Model systems to act on, e.g. `full,no-types`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub systems: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with dictionaries and type embeddings.
    Synth,
    /// Per-language corpus statistics and coverage.
    Stats,
    /// Entity-disjoint train/valid/test split.
    Split,
    /// Train every configured model system.
    Train,
    /// Decode the test split with models and baselines.
    Generate,
    /// Similarity scores of every generation against the reference.
    Score,
    /// Results table, pairwise comparison, sign tests and exact match.
    Aggregate,
    /// Propensity-weighted score of one system.
    Propensity,
    /// Select the human-evaluation sample and campaign inputs.
    SampleEval,
    /// Run the rating service over HTTP until interrupted.
    Serve,
    /// Collect every result into a Markdown report.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Stats => "stats",
            Command::Split => "split",
            Command::Train => "train",
            Command::Generate => "generate",
            Command::Score => "score",
            Command::Aggregate => "aggregate",
            Command::Propensity => "propensity",
            Command::SampleEval => "sample-eval",
            Command::Serve => "serve",
            Command::Report => "report",
        }
    }
}

pub fn context(cli: &Cli) -> Result<Context, CliError> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = cfg.resolve(cli.seed, &cli.systems)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    Ok(Context::new(cfg, cli.out.clone()))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut ctx = context(cli)?;
    run_command(&mut ctx, cli.command)
}

pub fn run_command(ctx: &mut Context, command: Command) -> Result<(), CliError> {
    use commands::*;
    match command {
        Command::Synth => synth(ctx)?,
        Command::Stats => stats(ctx)?,
        Command::Split => split(ctx)?,
        Command::Train => train(ctx)?,
        Command::Generate => generate(ctx)?,
        Command::Score => score(ctx)?,
        Command::Aggregate => aggregate(ctx)?,
        Command::Propensity => propensity(ctx)?,
        Command::SampleEval => sample_eval(ctx)?,
        // writes its manifest before blocking
        Command::Serve => return serve(ctx),
        Command::Report => report(ctx)?,
    }
    finish(ctx, command.name())
}
