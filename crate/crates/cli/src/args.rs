use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "rgsel", version, about = "Confidence scores, risk-coverage curves and risk-controlled selection for fingerprint retrieval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-instance confidence scores and losses.
    Score(ScoreArgs),
    /// Risk-coverage curves and AURC for every (score, loss) pair.
    Curve(CurveArgs),
    /// Threshold selection with guaranteed risk on a calibration split.
    Sgr(SgrArgs),
    /// Pairwise Spearman correlations between scores.
    Correlate(CorrelateArgs),
    /// Synthetic dataset and predictions with planted ground truth.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Dataset file (JSON lines).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Prediction file (binary).
    #[arg(long)]
    pub predictions: PathBuf,
    /// Training-set embeddings; enables the knn and mah scores.
    #[arg(long)]
    pub train_embeddings: Option<PathBuf>,
    /// fingerprint-mean, score-mean or prob-mean.
    #[arg(long, default_value = "score-mean")]
    pub aggregation: String,
    #[arg(long, default_value_t = 0.003)]
    pub temperature: f64,
    /// Hit@K values, also used for the default rank_var@K scores.
    #[arg(long, value_delimiter = ',', default_value = "1,5,20")]
    pub k: Vec<usize>,
    /// Scores to compute (default: all available).
    #[arg(long, value_delimiter = ',')]
    pub scores: Option<Vec<String>>,
    #[arg(long, default_value_t = 100)]
    pub knn_k: usize,
    /// Keep only instances with at least this many candidates.
    #[arg(long)]
    pub min_candidates: Option<usize>,
    /// Keep only instances with at most this many candidates.
    #[arg(long)]
    pub max_candidates: Option<usize>,
    /// Accept candidate sets larger than the dataset's cap.
    #[arg(long)]
    pub allow_uncapped: bool,
    /// Worker threads (default: all cores).
    #[arg(long, env = "RGSEL_THREADS")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Losses to tabulate (default: hit@K for every K).
    #[arg(long, value_delimiter = ',')]
    pub losses: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Losses (default: hit@K for every K).
    #[arg(long, value_delimiter = ',')]
    pub losses: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SgrArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Hit@K losses only (default: hit@K for every K).
    #[arg(long, value_delimiter = ',')]
    pub losses: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.001)]
    pub delta: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub target_risks: Vec<f64>,
    /// Seed of the calibration/evaluation split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 4096)]
    pub dim: usize,
    #[arg(long, default_value_t = 1)]
    pub min_candidates: usize,
    #[arg(long, default_value_t = 256)]
    pub max_candidates: usize,
    #[arg(long, default_value_t = 256)]
    pub cap: usize,
    /// Posterior samples per instance.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// planted-confidence or similar-candidates.
    #[arg(long, default_value = "planted-confidence")]
    pub difficulty: String,
    /// Attach embeddings of this length and write training embeddings.
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Number of training embeddings.
    #[arg(long, default_value_t = 1000)]
    pub train_size: usize,
    /// Monte-Carlo check of the risk guarantee, e.g. `trials=1000`.
    #[arg(long)]
    pub validate_sgr: Option<String>,
    #[arg(long, default_value_t = 0.001)]
    pub delta: f64,
    /// Target risks for the Monte-Carlo check.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4")]
    pub target_risks: Vec<f64>,
    #[arg(long, env = "RGSEL_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}
