//! Entropy-based total / aleatoric / epistemic decompositions, at the level of
//! individual fingerprint bits and at the level of the candidate distribution.
//!
//! All values are returned as confidence scores (negated uncertainties, in
//! nats). The epistemic part is clamped to be nonpositive and the total is
//! reported as `aleatoric + epistemic`, so the identity holds exactly.

use crate::error::{Error, Result};
use crate::model::{candidate_distribution, exact_mean, per_sample_scores, Instance, PredictionBundle};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub total: f64,
    pub aleatoric: f64,
    pub epistemic: f64,
    /// `total - aleatoric` before clamping, as a confidence score. Should be
    /// nonpositive up to rounding.
    pub epistemic_raw: f64,
}

impl Decomposition {
    fn from_confidences(total: f64, aleatoric: f64) -> Self {
        let epistemic_raw = total - aleatoric;
        let epistemic = epistemic_raw.min(0.0);
        Self {
            total: aleatoric + epistemic,
            aleatoric,
            epistemic,
            epistemic_raw,
        }
    }
}

/// `-p ln p` with `0 ln 0 = 0`.
#[inline]
fn plogp_neg(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Binary entropy in nats.
#[inline]
pub fn binary_entropy(p: f64) -> f64 {
    plogp_neg(p) + plogp_neg(1.0 - p)
}

/// Shannon entropy of a categorical distribution in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| plogp_neg(p)).sum()
}

/// Per-bit decomposition summed over bits.
pub fn bitwise_decomposition(bundle: &PredictionBundle) -> Result<Decomposition> {
    let s = bundle.n_samples();
    let d = bundle.dim();
    if s == 0 || d == 0 {
        return Err(Error::domain("bitwise decomposition needs S >= 1 and D >= 1"));
    }
    let raw = bundle.raw();
    let mut column = vec![0.0; s];
    let mut u_tot = 0.0;
    let mut u_al = 0.0;
    for bit in 0..d {
        let mut al = 0.0;
        for (k, slot) in column.iter_mut().enumerate() {
            let theta = raw[k * d + bit];
            *slot = theta;
            al += binary_entropy(theta);
        }
        u_tot += binary_entropy(exact_mean(&column));
        u_al += al / s as f64;
    }
    Ok(Decomposition::from_confidences(-u_tot, -u_al))
}

/// Decomposition of the candidate-level predictive entropy.
pub fn retrieval_decomposition(
    bundle: &PredictionBundle,
    instance: &Instance,
    temperature: f64,
) -> Result<Decomposition> {
    let per_sample = per_sample_scores(bundle, instance)?;
    retrieval_decomposition_from_scores(&per_sample, temperature)
}

pub(crate) fn retrieval_decomposition_from_scores(
    per_sample: &[Vec<f64>],
    temperature: f64,
) -> Result<Decomposition> {
    if per_sample.is_empty() {
        return Err(Error::domain("retrieval decomposition needs S >= 1"));
    }
    let probs = per_sample
        .iter()
        .map(|s| candidate_distribution(s, temperature))
        .collect::<Result<Vec<_>>>()?;
    Ok(decompose_distributions(&probs))
}

/// Decomposition for explicit per-sample categorical distributions.
pub fn decompose_distributions(probs: &[Vec<f64>]) -> Decomposition {
    let m = probs[0].len();
    let mut column = Vec::with_capacity(probs.len());
    let mean: Vec<f64> = (0..m)
        .map(|j| {
            column.clear();
            column.extend(probs.iter().map(|p| p[j]));
            exact_mean(&column)
        })
        .collect();
    let total = -entropy(&mean);
    let aleatoric = -probs.iter().map(|p| entropy(p)).sum::<f64>() / probs.len() as f64;
    Decomposition::from_confidences(total, aleatoric)
}
