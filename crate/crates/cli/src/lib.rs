//! `vigil` command line.

pub mod config;
mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad input: arguments, config, files that do not parse.
    Validation(String),
    /// Input was fine but something failed while running.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

pub(crate) fn invalid(m: impl std::fmt::Display) -> CliError {
    CliError::Validation(m.to_string())
}

pub(crate) fn failed(m: impl std::fmt::Display) -> CliError {
    CliError::Runtime(m.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "vigil", version, about = "Video action monitoring: fixtures, simulation, serving and evaluation")]
pub struct Cli {
    /// TOML run configuration; `VIGIL_*` environment variables override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic SVF streams and their ground-truth manifest.
    GenFixtures(GenFixturesArgs),
    /// Stratified train/val/test split into annotation files.
    PrepareDataset(PrepareDatasetArgs),
    /// Run fixture streams through the whole system.
    Simulate(SimulateArgs),
    /// Serve the REST API (or a model server).
    Serve(ServeArgs),
    /// Metrics of an inference log against a ground-truth manifest.
    Evaluate(EvaluateArgs),
    /// Inference throughput over fixture chunks.
    BenchThroughput(BenchArgs),
    /// Clients one inference server can monitor, and what it costs.
    CapacityPlan(CapacityArgs),
    /// Accuracy/efficiency comparison tables from model cards.
    ReportTradeoffs(TradeoffArgs),
    /// Train the linear motion-feature classifier on fixture chunks.
    TrainToy(TrainToyArgs),
}

#[derive(Debug, Args)]
pub struct GenFixturesArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON or TOML fixture spec; the flags below are ignored when given.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub streams: usize,
    #[arg(long, default_value_t = 60.0)]
    pub duration_s: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `STREAM:START_S:DURATION_S:CODE[:SUBTYPE]`, repeatable.
    #[arg(long = "event", value_name = "EVENT")]
    pub events: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PrepareDatasetArgs {
    /// Output directory for train.txt, val.txt and test.txt.
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset manifest as JSON (`{"entries": [...]}`).
    #[arg(long, value_name = "FILE", conflicts_with_all = ["annotations", "class_sizes"])]
    pub manifest: Option<PathBuf>,
    /// Existing annotation file.
    #[arg(long, value_name = "FILE", conflicts_with = "class_sizes")]
    pub annotations: Option<PathBuf>,
    /// Synthetic manifest with these per-class sizes, in label order.
    #[arg(long, value_name = "N,N,N,N", value_delimiter = ',')]
    pub class_sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.75)]
    pub train: f64,
    #[arg(long, default_value_t = 0.125)]
    pub val: f64,
    #[arg(long, default_value_t = 0.125)]
    pub test: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory written by gen-fixtures.
    #[arg(long)]
    pub fixtures: PathBuf,
    /// In-memory store and database instead of the configured paths.
    #[arg(long)]
    pub ephemeral: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Overrides the configured bind address.
    #[arg(long)]
    pub bind: Option<String>,
    /// Serve the remote classifier protocol with the configured local classifier.
    #[arg(long)]
    pub model_server: bool,
    /// Notification poll interval.
    #[arg(long, default_value_t = 1.0)]
    pub poll_s: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSONL inference records, or a `simulate --json` run report.
    #[arg(long, value_name = "FILE")]
    pub predictions: PathBuf,
    /// ground_truth.json, or a fixture directory containing it.
    #[arg(long, value_name = "PATH")]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub fixtures: PathBuf,
    /// Use at most this many chunks.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    /// Samples per second.
    #[arg(long)]
    pub throughput: f64,
    /// Defaults to the configured window.
    #[arg(long)]
    pub chunk_s: Option<f64>,
    /// Dollars per server-hour.
    #[arg(long)]
    pub hourly_price: f64,
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    /// JSON list of model cards; the bundled reference cards otherwise.
    #[arg(long, value_name = "FILE")]
    pub cards: Option<PathBuf>,
    /// JSON object of model_id -> {macro_recall, macro_precision, macro_f1} (fractions).
    #[arg(long, value_name = "FILE")]
    pub macros: Option<PathBuf>,
    /// Write tradeoffs.csv, tradeoffs.md and the two series files here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    #[arg(long)]
    pub fixtures: PathBuf,
    /// Where to write the model JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses `args`, loads the config with overrides from `env` and runs the
/// subcommand. Returns the process exit code.
pub fn run<I, T, E>(args: I, env: E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    E: IntoIterator<Item = (String, String)>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let result = RunConfig::load(cli.config.as_deref(), env)
        .map_err(CliError::Validation)
        .and_then(|cfg| commands::dispatch(&cli, &cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
