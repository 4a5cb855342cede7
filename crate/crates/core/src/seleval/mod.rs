//! Selective-risk evaluation: per-instance losses, risk-coverage curves and
//! their areas, coverage at a threshold, and rank correlations between scores.

mod curve;
mod loss;
mod spearman;

pub use curve::{
    acceptance_order, aurc_for_order, area, coverage_at_threshold, curve_points, oracle_order, relative_aurc,
    risk_coverage_curve, selective_risk, CurvePoint, RiskCoverageCurve,
};
pub use loss::{
    binarize, cosine, hamming, instance_loss, similarity_loss, tanimoto, LossSpec, PredictionMode,
    SimilarityMeasure,
};
pub use spearman::{average_ranks, spearman, spearman_matrix};
