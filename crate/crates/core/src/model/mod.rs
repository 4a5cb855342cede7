//! Domain types and the deterministic retrieval mathematics.

mod fingerprint;
mod retrieval;
mod types;

pub use fingerprint::Fingerprint;
pub(crate) use retrieval::aggregate_from_scores;
pub use retrieval::{
    aggregate_prediction, candidate_distribution, cosine_similarity, descending_order, hit_at_k,
    per_sample_scores, rank_candidates, ranking_loss, similarity_scores,
};
pub use types::{
    exact_mean, AggregationStrategy, CandidateRanking, Instance, PredictionBundle, ProbabilityVector,
};

/// Fingerprint length of the benchmark's Morgan fingerprints.
pub const DEFAULT_DIM: usize = 4096;

/// Maximum candidate-set size of the benchmark.
pub const DEFAULT_CANDIDATE_CAP: usize = 256;

/// Softmax temperature used when training the retrieval model.
pub const DEFAULT_TEMPERATURE: f64 = 0.003;
