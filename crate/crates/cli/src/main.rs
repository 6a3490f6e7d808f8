//! `mlgeo`: train, predict, evaluate, unify, baseline, and cells
//! workflows over the multi-level geocoder.

mod cells;
mod config;
mod evaluate;
mod fileio;
mod predict;
mod train;
mod unify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "mlgeo", version, about = "Multi-level geocoding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a JSONL corpus.
    Train(TrainArgs),
    /// Predict cells and points for an evaluation set.
    Predict(PredictArgs),
    /// Compute accuracy@161, mean error, and AUC from predictions.
    Evaluate(EvaluateArgs),
    /// Apply coordinate-unification patches to an evaluation set.
    Unify(UnifyArgs),
    /// Population baseline: most populous gazetteer candidate per mention.
    Baseline(BaselineArgs),
    /// Encode a point into cell tokens at the given levels.
    Cells(CellsArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training JSONL file.
    #[arg(long)]
    train: PathBuf,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    /// Config file (JSON object or key=value lines); flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optimizer steps to run.
    #[arg(long)]
    steps: Option<u64>,
    /// Comma-separated cell levels, e.g. 5,6,7.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u8>>,
    /// Fraction of records used for training; the rest is the dev split.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    decay_rate: Option<f64>,
    #[arg(long)]
    decay_steps: Option<u64>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    len_context: Option<usize>,
    #[arg(long)]
    len_toponyms: Option<usize>,
    #[arg(long)]
    len_target: Option<usize>,
    /// Pretrained embedding text file (token v1 ... vD per line).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    freeze_embeddings: bool,
    /// Longest admissible training context.
    #[arg(long)]
    max_context: Option<usize>,
    /// Save `<model>.step<N>` checkpoints every N steps (0 = none).
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Per-step CSV training log.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Print a progress line every N steps.
    #[arg(long, default_value_t = 10)]
    log_every: u64,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Evaluation JSONL file.
    #[arg(long)]
    eval: PathBuf,
    /// Output predictions JSONL.
    #[arg(long)]
    out: PathBuf,
    /// Config file (JSON object or key=value lines); flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inference mode: `combined` or `only-<level>`.
    #[arg(long)]
    mode: Option<String>,
    /// Gazetteer file enabling constrained selection.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Population bias c in [0, 1] for constrained selection.
    #[arg(long)]
    pop_bias: Option<f64>,
    /// Input ablation applied before inference.
    #[arg(long, value_enum)]
    ablate: Option<Ablation>,
    /// Finest-level candidates scored before the argmax guard widens.
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Evaluation JSONL with gold coordinates.
    #[arg(long)]
    eval: PathBuf,
    /// Predictions JSONL from `predict` or `baseline`.
    #[arg(long)]
    predictions: PathBuf,
    /// Write the report JSON here (also printed to stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the sorted error curve CSV here.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct UnifyArgs {
    /// Evaluation JSONL to patch.
    #[arg(long)]
    eval: PathBuf,
    /// Patch JSONL (entity_key, lat, lng, optional old_lat/old_lng).
    #[arg(long)]
    patches: PathBuf,
    /// Patched evaluation JSONL output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    /// Evaluation JSONL file.
    #[arg(long)]
    eval: PathBuf,
    /// Gazetteer file (JSONL or TSV).
    #[arg(long)]
    gazetteer: PathBuf,
    /// Output predictions JSONL.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CellsArgs {
    #[arg(long)]
    lat: f64,
    #[arg(long)]
    lng: f64,
    /// Comma-separated cell levels, e.g. 5,6,7.
    #[arg(long, value_delimiter = ',', default_value = "5,6,7")]
    levels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Ablation {
    None,
    Target,
    AllToponyms,
}

fn parse_levels(s: &str) -> Result<Vec<u8>, String> {
    let levels: Result<Vec<u8>, _> = s.split(',').map(|part| part.trim().parse()).collect();
    levels.map_err(|e| format!("bad level list {s:?}: {e}"))
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train(args) => train::run(args),
        Command::Predict(args) => predict::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Unify(args) => unify::run(args),
        Command::Baseline(args) => predict::run_baseline(args),
        Command::Cells(args) => cells::run(args),
    }
}
