use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{hit_at_k, CandidateRanking, Fingerprint, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimilarityMeasure {
    Tanimoto,
    Cosine,
    Hamming,
}

/// Which predicted fingerprint a similarity loss is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictionMode {
    /// The posterior-mean probabilities `θ̄`.
    Continuous,
    /// The binarized prediction `1[θ̄ > 0.5]`.
    Discrete,
}

/// Per-instance loss used for risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossSpec {
    /// `1 - Hit@K`.
    Hit(usize),
    Similarity {
        measure: SimilarityMeasure,
        mode: PredictionMode,
    },
}

impl LossSpec {
    pub fn hit(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("Hit@K loss needs K >= 1"));
        }
        Ok(LossSpec::Hit(k))
    }

    pub fn similarity(measure: SimilarityMeasure, mode: PredictionMode) -> Result<Self> {
        if measure == SimilarityMeasure::Hamming && mode == PredictionMode::Continuous {
            return Err(Error::domain("Hamming loss requires the discrete prediction"));
        }
        Ok(LossSpec::Similarity { measure, mode })
    }

    /// True for losses valued in {0, 1}.
    pub fn is_binary(&self) -> bool {
        matches!(self, LossSpec::Hit(_))
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::Hit(k) => write!(f, "hit@{k}"),
            LossSpec::Similarity { measure, mode } => {
                let m = match measure {
                    SimilarityMeasure::Tanimoto => "tanimoto",
                    SimilarityMeasure::Cosine => "cosine",
                    SimilarityMeasure::Hamming => "hamming",
                };
                let mode = match mode {
                    PredictionMode::Continuous => "cont",
                    PredictionMode::Discrete => "disc",
                };
                write!(f, "{m}-{mode}")
            }
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(k) = s.strip_prefix("hit@") {
            let k = k
                .parse::<usize>()
                .map_err(|_| Error::domain(format!("invalid K in loss {s:?}")))?;
            return LossSpec::hit(k);
        }
        let (measure, mode) = s
            .split_once('-')
            .ok_or_else(|| Error::domain(format!("unknown loss {s:?}")))?;
        let measure = match measure {
            "tanimoto" => SimilarityMeasure::Tanimoto,
            "cosine" => SimilarityMeasure::Cosine,
            "hamming" => SimilarityMeasure::Hamming,
            _ => return Err(Error::domain(format!("unknown similarity measure in {s:?}"))),
        };
        let mode = match mode {
            "cont" | "continuous" => PredictionMode::Continuous,
            "disc" | "discrete" => PredictionMode::Discrete,
            _ => return Err(Error::domain(format!("unknown prediction mode in {s:?}"))),
        };
        LossSpec::similarity(measure, mode)
    }
}

/// Tanimoto similarity `Σ a·y / (Σ a + Σ y - Σ a·y)`.
pub fn tanimoto(a: &[f64], y: &Fingerprint) -> f64 {
    let inter = y.dot(a);
    let denom = a.iter().sum::<f64>() + y.count_ones() as f64 - inter;
    if denom > 0.0 {
        inter / denom
    } else {
        // both empty
        1.0
    }
}

/// Cosine similarity; 0 when the prediction is the zero vector.
pub fn cosine(a: &[f64], y: &Fingerprint) -> f64 {
    let a_sq: f64 = a.iter().map(|v| v * v).sum();
    let y_sq = y.count_ones() as f64;
    if a_sq == 0.0 || y_sq == 0.0 {
        return 0.0;
    }
    (y.dot(a) / (a_sq * y_sq).sqrt()).min(1.0)
}

/// `1 - (fraction of disagreeing bits)` for a binary prediction.
pub fn hamming(a: &[f64], y: &Fingerprint) -> f64 {
    let mismatches = a.iter().enumerate().filter(|&(d, &v)| (v != 0.0) != y.get(d)).count();
    1.0 - mismatches as f64 / a.len() as f64
}

/// `1[θ̄ > 0.5]` as a 0/1 vector.
pub fn binarize(theta: &[f64]) -> Vec<f64> {
    theta.iter().map(|&t| if t > 0.5 { 1.0 } else { 0.0 }).collect()
}

/// Loss of one instance. `mean_theta` is the posterior-mean prediction and is
/// only used by similarity losses.
pub fn instance_loss(
    spec: LossSpec,
    instance: &Instance,
    ranking: &CandidateRanking,
    mean_theta: &[f64],
) -> Result<f64> {
    match spec {
        LossSpec::Hit(k) => Ok(if hit_at_k(ranking, instance.true_index, k)? { 0.0 } else { 1.0 }),
        LossSpec::Similarity { measure, mode } => {
            if mean_theta.len() != instance.dim() {
                return Err(Error::domain(format!(
                    "prediction has D={}, instance has D={}",
                    mean_theta.len(),
                    instance.dim()
                )));
            }
            similarity_loss(measure, mode, mean_theta, instance.truth())
        }
    }
}

pub fn similarity_loss(
    measure: SimilarityMeasure,
    mode: PredictionMode,
    mean_theta: &[f64],
    truth: &Fingerprint,
) -> Result<f64> {
    let binarized;
    let a = match mode {
        PredictionMode::Continuous => mean_theta,
        PredictionMode::Discrete => {
            binarized = binarize(mean_theta);
            &binarized
        }
    };
    let sim = match (measure, mode) {
        (SimilarityMeasure::Hamming, PredictionMode::Continuous) => {
            return Err(Error::domain("Hamming loss requires the discrete prediction"))
        }
        (SimilarityMeasure::Hamming, _) => hamming(a, truth),
        (SimilarityMeasure::Tanimoto, _) => tanimoto(a, truth),
        (SimilarityMeasure::Cosine, _) => cosine(a, truth),
    };
    Ok((1.0 - sim).clamp(0.0, 1.0))
}
