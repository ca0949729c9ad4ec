//! `rs-synthgen`: one entry point for every pipeline stage.
//!
//! Exit codes: 0 success, 1 stage failure, 2 configuration error,
//! 3 missing prerequisite artifact.

mod config;
mod failure;
mod report;
mod stages;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;
use failure::{CmdResult, Failure};
use workspace::Workspace;

#[derive(Parser, Debug)]
#[command(name = "rs-synthgen", version, about = "Remote-sensing synthetic dataset pipeline")]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Workspace directory holding every stage's artifacts.
    #[arg(long, global = true, env = "RS_SYNTHGEN_WORKSPACE")]
    workspace: Option<PathBuf>,

    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest an image-caption Parquet file into a fine-tuning layout plus holdout.
    Prepare(PrepareArgs),
    /// Per-channel statistics of the prepared layout.
    Stats,
    /// Fine-tune the diffusion backend on the layout.
    Finetune(FinetuneArgs),
    /// Build, chunk and split the text corpus.
    Corpus(CorpusArgs),
    /// Build the retrieval index over the training corpus.
    Index(IndexArgs),
    /// Assemble the class prompt bank.
    Prompts(PromptsArgs),
    /// Generate the labeled synthetic dataset.
    Generate(GenerateArgs),
    /// Sampled FID between real and generated images.
    Fid(FidArgs),
    /// Train and evaluate the downstream classifier.
    TrainDownstream(DownstreamArgs),
    /// Render the static review report.
    Report,
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub holdout: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub no_augment: bool,
    /// `first` or `random`.
    #[arg(long)]
    pub caption_policy: Option<String>,
}

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub checkpoint_interval_steps: Option<u64>,
    /// Trailing-window length for best-checkpoint selection.
    #[arg(long, default_value_t = 1)]
    pub smooth_window: usize,
}

#[derive(Args, Debug)]
pub struct CorpusArgs {
    /// Text files, directories of .txt/.md files, or Parquet files with a `text` column.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub min_chars: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[arg(long)]
    pub chunk_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PromptsArgs {
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Skip retrieval even when an index exists.
    #[arg(long)]
    pub no_index: bool,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// `Class Name=N` pairs separated by commas.
    #[arg(long)]
    pub counts: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub backend: Option<String>,
}

#[derive(Args, Debug)]
pub struct FidArgs {
    /// Directory of images or a Parquet dataset; defaults to the holdout.
    #[arg(long)]
    pub real: Option<PathBuf>,
    /// Defaults to the workspace synthetic dataset.
    #[arg(long)]
    pub gen: Option<PathBuf>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub extractor: Option<String>,
}

#[derive(Args, Debug)]
pub struct DownstreamArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub crop_side: Option<usize>,
}

fn run(cli: Cli) -> CmdResult {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let root = cli
        .workspace
        .or_else(|| config.workspace.clone())
        .ok_or_else(|| Failure::config("no workspace: pass --workspace or set RS_SYNTHGEN_WORKSPACE"))?;
    let ws = Workspace::open(root)?;
    let _lock = ws.lock()?;
    match cli.command {
        Command::Prepare(a) => stages::prepare(&ws, &config, a),
        Command::Stats => stages::stats(&ws, &config),
        Command::Finetune(a) => stages::finetune(&ws, &config, a),
        Command::Corpus(a) => stages::corpus(&ws, &config, a),
        Command::Index(a) => stages::index(&ws, &config, a),
        Command::Prompts(a) => stages::prompts(&ws, &config, a),
        Command::Generate(a) => stages::generate(&ws, &config, a),
        Command::Fid(a) => stages::fid(&ws, &config, a),
        Command::TrainDownstream(a) => stages::train_downstream(&ws, &config, a),
        Command::Report => report::report(&ws),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rs-synthgen: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
