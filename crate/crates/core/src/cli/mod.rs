//! Command-line pipeline. Each subcommand reads upstream artifacts, writes
//! its data files under `--out`, a deterministic `<run>.report.json` and a
//! `<run>.manifest.json` listing every file it wrote.

mod commands;
mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::alignment::{DEFAULT_SLICE_FLOOR, Method};
use crate::comparatives::{DEFAULT_K, DEFAULT_MASK_TOKEN, DEFAULT_PROMPT_COUNT, DEFAULT_TEMPLATE};
use crate::error::{Error, Result};
use crate::ingest::DEFAULT_MAX_WORDS;

pub use run::{InputDigest, Manifest, RunConfig, RunReport, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "chromalign", version, about = "Color/language alignment pipeline")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drop long and spam descriptions; report corpus statistics.
    Ingest(IngestArgs),
    /// Concreteness, subjectivity and color-word flags per description.
    Score(ScoreArgs),
    /// Slice the corpus by a score.
    Segment(SegmentArgs),
    /// Alignment between embeddings and Lab per slice.
    Align(AlignArgs),
    /// Ground comparatives for sampled description pairs.
    Match(MatchArgs),
    /// Build K-shot masked comparative prompts.
    Prompts(PromptsArgs),
    /// Mean reciprocal rank of model predictions.
    Eval(EvalArgs),
    /// k-means slices in color or embedding space.
    Cluster(ClusterArgs),
    /// DOT graph of correctly predicted comparatives.
    Graph(GraphArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Score(_) => "score",
            Command::Segment(_) => "segment",
            Command::Align(_) => "align",
            Command::Match(_) => "match",
            Command::Prompts(_) => "prompts",
            Command::Eval(_) => "eval",
            Command::Cluster(_) => "cluster",
            Command::Graph(_) => "graph",
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Regex drop rules, `name<TAB>pattern` per line.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_WORDS)]
    pub max_words: usize,
    /// One color word per line; a built-in basic list otherwise.
    #[arg(long)]
    pub colorwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub concreteness: PathBuf,
    #[arg(long)]
    pub subjectivity: PathBuf,
    #[arg(long)]
    pub colorwords: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SegmentBy {
    Subjectivity,
    Concreteness,
    ColorWord,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_enum)]
    pub by: SegmentBy,
    #[arg(long, default_value_t = 5)]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lmap,
    Rsa,
    Gw,
    All,
}

impl MethodArg {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Lmap => vec![Method::Lmap],
            MethodArg::Rsa => vec![Method::Rsa],
            MethodArg::Gw => vec![Method::Gw],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MethodArg::Lmap => "lmap",
            MethodArg::Rsa => "rsa",
            MethodArg::Gw => "gw",
            MethodArg::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Fixed,
    Geometric,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Slice files or directories of them; the whole corpus otherwise.
    #[arg(long, num_args = 1..)]
    pub slices: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-2)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 5e-3)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Fixed)]
    pub eps_schedule: ScheduleArg,
    #[arg(long, default_value_t = 500)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_SLICE_FLOOR)]
    pub floor: usize,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Comparative tuples, JSONL.
    #[arg(long)]
    pub tuples: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct PromptsArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub matched: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Prompt sets per slice.
    #[arg(long, default_value_t = DEFAULT_PROMPT_COUNT)]
    pub count: usize,
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    pub template: String,
    #[arg(long, default_value = DEFAULT_MASK_TOKEN)]
    pub mask_token: String,
    /// Build prompts within each slice; over all matched pairs otherwise.
    #[arg(long, num_args = 1..)]
    pub slices: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Color,
    Embedding,
}

impl SpaceArg {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceArg::Color => "color",
            SpaceArg::Embedding => "embedding",
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, value_enum)]
    pub space: SpaceArg,
    #[arg(long)]
    pub k: usize,
    /// Cluster only the members of this slice file.
    #[arg(long)]
    pub within: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub matched: PathBuf,
    /// Report written by `eval`.
    #[arg(long)]
    pub eval: PathBuf,
}

/// Runs one subcommand, on a dedicated thread pool when `--jobs` is set.
pub fn run(cli: &Cli) -> Result<RunSummary> {
    let exec = || commands::dispatch(cli);
    match cli.jobs {
        Some(0) => Err(Error::Argument("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?
            .install(exec),
        None => exec(),
    }
}
