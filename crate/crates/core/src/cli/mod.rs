//! Command-line entry point: `score`, `random-baseline`, `eval`, `sweep`,
//! and `report`.
//!
//! Configuration precedence is flags > `DATKIT_*` environment variables >
//! JSON config file. Credentials are only ever read from the environment
//! variable named by `--credential-env`. Exit codes: 0 success, 1
//! config/data error, 2 validation failure, 3 endpoint failure.

mod commands;
mod config;

pub use config::{AppConfig, FileConfig};

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "datkit", version, about = "Divergent-association scoring for text generators")]
pub struct Cli {
    /// JSON config file (lowest-precedence settings source).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a word list and print its score as JSON.
    Score(ScoreArgs),
    /// Score seeded random-noun draws and print the aggregate as JSON.
    RandomBaseline(RandomBaselineArgs),
    /// Query a chat endpoint, log scored samples, and write a run report.
    Eval(EvalArgs),
    /// Run one eval per temperature grid point and emit the curve.
    Sweep(SweepArgs),
    /// Aggregate sample logs (and human data) into report files.
    Report(ReportArgs),
}

/// Data files shared by every scoring command.
#[derive(Debug, Clone, Args, Default)]
pub struct DataArgs {
    /// Embedding text file (word followed by components, one per line).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Keep only the first N embedding entries.
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Noun lexicon file.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Lexicon file format.
    #[arg(long)]
    pub lexicon_format: Option<crate::lexicon::LexiconFormat>,
    /// Word-frequency file (word<TAB>count per line).
    #[arg(long)]
    pub freq: Option<PathBuf>,
    /// Words needed for a headline score.
    #[arg(long)]
    pub scoring_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Read the word list from this file instead of standard input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Keep duplicate words during validation (sensitivity checks only).
    #[arg(long)]
    pub allow_duplicates: bool,
}

#[derive(Debug, Args)]
pub struct RandomBaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of seeded draws.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Master seed (random when omitted; always echoed in the output).
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Endpoint and decoding flags shared by eval and sweep.
#[derive(Debug, Clone, Args, Default)]
pub struct EndpointArgs {
    /// Base URL of the OpenAI-compatible API (without /chat/completions).
    #[arg(long)]
    pub base_url: Option<String>,
    /// Model identifier sent in the request body.
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the bearer token; "none" disables auth.
    #[arg(long)]
    pub credential_env: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Extra attempts on transport errors and 429s.
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Initial retry backoff in milliseconds (doubles per retry).
    #[arg(long)]
    pub backoff_ms: Option<u64>,
    /// Maximum in-flight requests.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
    /// Prompt condition.
    #[arg(long, default_value = "dat")]
    pub condition: crate::harness::PromptCondition,
    /// Decoding strategy.
    #[arg(long)]
    pub strategy: Option<crate::harness::Strategy>,
    /// Nucleus mass for top-p.
    #[arg(long)]
    pub p: Option<f64>,
    /// Sampling temperature for top-p.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Number of samples to collect.
    #[arg(long, conflicts_with = "auto_n")]
    pub n: Option<usize>,
    /// Size the run from a pilot: N = converged_sample_size(pilot σ̂).
    #[arg(long)]
    pub auto_n: bool,
    /// Pilot size used by --auto-n.
    #[arg(long)]
    pub pilot: Option<usize>,
    /// Confidence parameter α for --auto-n.
    #[arg(long, default_value_t = crate::harness::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Target mean half-width ε for --auto-n.
    #[arg(long, default_value_t = crate::harness::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Replace the shipped divergent-nouns prompt with this file.
    #[arg(long)]
    pub prompt_file: Option<PathBuf>,
    /// Output directory for samples.jsonl and report files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
    /// Prompt condition.
    #[arg(long, default_value = "dat")]
    pub condition: crate::harness::PromptCondition,
    /// Comma-separated temperature grid; defaults to 0.1..=1.0 step 0.1.
    #[arg(long)]
    pub grid: Option<String>,
    /// Nucleus mass held fixed across the sweep.
    #[arg(long)]
    pub p: Option<f64>,
    /// Samples per grid point.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Replace the shipped divergent-nouns prompt with this file.
    #[arg(long)]
    pub prompt_file: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Sample log (JSON Lines); repeatable.
    #[arg(long = "log", required = true)]
    pub logs: Vec<PathBuf>,
    /// Human baseline CSV.
    #[arg(long)]
    pub human: Option<PathBuf>,
    /// Name of the human CSV score column.
    #[arg(long)]
    pub human_score_col: Option<String>,
    /// Name of the human CSV surprisal column, when present.
    #[arg(long)]
    pub human_surprisal_col: Option<String>,
    /// Surprisal-control bin count.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Use sample (n−1) instead of population standard deviation.
    #[arg(long)]
    pub sample_std: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn endpoint(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

/// Parse argv and dispatch; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version; usage errors are config errors
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let file_config = match config::FileConfig::load(cli.config.as_deref()) {
        Ok(fc) => fc,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return e.code;
        }
    };
    let result = match cli.command {
        Command::Score(args) => commands::cmd_score(&args, &file_config),
        Command::RandomBaseline(args) => commands::cmd_random_baseline(&args, &file_config),
        Command::Eval(args) => commands::cmd_eval(&args, &file_config),
        Command::Sweep(args) => commands::cmd_sweep(&args, &file_config),
        Command::Report(args) => commands::cmd_report(&args, &file_config),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
