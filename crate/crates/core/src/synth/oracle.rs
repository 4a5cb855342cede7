//! Naive reference implementations used to cross-check the main code paths.
//!
//! Everything here is written directly from the definitions, with
//! compensated (Neumaier) summation and no shared helpers from the scoring
//! code, and is only intended for small problems.

use crate::error::{Error, Result};
use crate::model::{Instance, PredictionBundle};

pub const ORACLE_MAX_CANDIDATES: usize = 64;
pub const ORACLE_MAX_SAMPLES: usize = 16;

/// Compensated sum (Neumaier's variant of Kahan summation).
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Raw (unclamped) decomposition as confidence scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleDecomposition {
    pub total: f64,
    pub aleatoric: f64,
    pub epistemic: f64,
}

fn check_size(bundle: &PredictionBundle, instance: &Instance) -> Result<()> {
    if instance.num_candidates() > ORACLE_MAX_CANDIDATES || bundle.n_samples() > ORACLE_MAX_SAMPLES {
        return Err(Error::domain(format!(
            "oracle limited to M <= {ORACLE_MAX_CANDIDATES} and S <= {ORACLE_MAX_SAMPLES}"
        )));
    }
    if bundle.dim() != instance.dim() {
        return Err(Error::domain("bundle and instance dimensions differ"));
    }
    Ok(())
}

/// Cosine similarity between `theta` and every candidate, bit by bit.
pub fn oracle_scores(theta: &[f64], instance: &Instance) -> Vec<f64> {
    let norm_theta = neumaier_sum(theta.iter().map(|t| t * t)).sqrt();
    instance
        .candidates
        .iter()
        .map(|c| {
            let dot = neumaier_sum((0..theta.len()).map(|d| if c.get(d) { theta[d] } else { 0.0 }));
            let norm_c = ((0..theta.len()).filter(|&d| c.get(d)).count() as f64).sqrt();
            if norm_theta == 0.0 {
                0.0
            } else {
                dot / (norm_theta * norm_c)
            }
        })
        .collect()
}

/// Softmax computed as `exp(s_j/T) / Σ exp(s_l/T)` without shifting.
pub fn oracle_softmax(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if scores.iter().any(|s| (s / temperature).abs() > 700.0) {
        return Err(Error::domain("oracle softmax would overflow"));
    }
    let e: Vec<f64> = scores.iter().map(|s| (s / temperature).exp()).collect();
    let z = neumaier_sum(e.iter().copied());
    Ok(e.iter().map(|v| v / z).collect())
}

fn oracle_entropy(p: &[f64]) -> f64 {
    neumaier_sum(p.iter().map(|&v| if v > 0.0 { -v * v.ln() } else { 0.0 }))
}

/// Candidate-level decomposition by direct double loops.
pub fn oracle_decomposition(
    bundle: &PredictionBundle,
    instance: &Instance,
    temperature: f64,
) -> Result<OracleDecomposition> {
    check_size(bundle, instance)?;
    let s_count = bundle.n_samples();
    let mut dists = Vec::with_capacity(s_count);
    for s in 0..s_count {
        dists.push(oracle_softmax(&oracle_scores(bundle.sample(s), instance), temperature)?);
    }
    let m = instance.num_candidates();
    let mean: Vec<f64> = (0..m)
        .map(|j| neumaier_sum(dists.iter().map(|p| p[j])) / s_count as f64)
        .collect();
    let total = -oracle_entropy(&mean);
    let aleatoric = -neumaier_sum(dists.iter().map(|p| oracle_entropy(p))) / s_count as f64;
    Ok(OracleDecomposition {
        total,
        aleatoric,
        epistemic: total - aleatoric,
    })
}

/// Bit-level decomposition by direct double loops.
pub fn oracle_bitwise_decomposition(bundle: &PredictionBundle) -> OracleDecomposition {
    let s_count = bundle.n_samples();
    let h = |p: f64| {
        let a = if p > 0.0 { -p * p.ln() } else { 0.0 };
        let q = 1.0 - p;
        let b = if q > 0.0 { -q * q.ln() } else { 0.0 };
        a + b
    };
    let mut tot_terms = Vec::with_capacity(bundle.dim());
    let mut al_terms = Vec::with_capacity(bundle.dim() * s_count);
    for d in 0..bundle.dim() {
        let mean = neumaier_sum((0..s_count).map(|s| bundle.sample(s)[d])) / s_count as f64;
        tot_terms.push(h(mean));
        for s in 0..s_count {
            al_terms.push(h(bundle.sample(s)[d]));
        }
    }
    let total = -neumaier_sum(tot_terms);
    let aleatoric = -neumaier_sum(al_terms) / s_count as f64;
    OracleDecomposition {
        total,
        aleatoric,
        epistemic: total - aleatoric,
    }
}

/// Ranking by repeated selection of the best remaining candidate, lowest
/// index first among equals.
pub fn oracle_ranking(scores: &[f64]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut order = Vec::with_capacity(scores.len());
    while !remaining.is_empty() {
        let mut best = 0;
        for (pos, &j) in remaining.iter().enumerate() {
            if scores[j] > scores[remaining[best]] {
                best = pos;
            }
        }
        order.push(remaining.remove(best));
    }
    order
}

/// Rank variance straight from the definition: the top-`k` candidates of the
/// mean-fingerprint ranking, each with the population variance of its
/// per-sample 0-based ranks, averaged.
pub fn oracle_rank_variance(bundle: &PredictionBundle, instance: &Instance, k: usize) -> Result<f64> {
    check_size(bundle, instance)?;
    let s_count = bundle.n_samples();
    let theta_bar: Vec<f64> = (0..bundle.dim())
        .map(|d| neumaier_sum((0..s_count).map(|s| bundle.sample(s)[d])) / s_count as f64)
        .collect();
    let top = oracle_ranking(&oracle_scores(&theta_bar, instance));
    let k = k.min(top.len());
    let orders: Vec<Vec<usize>> = (0..s_count)
        .map(|s| oracle_ranking(&oracle_scores(bundle.sample(s), instance)))
        .collect();
    let mut vars = Vec::with_capacity(k);
    for &j in &top[..k] {
        let ranks: Vec<f64> = orders
            .iter()
            .map(|o| o.iter().position(|&c| c == j).unwrap() as f64)
            .collect();
        let mean = neumaier_sum(ranks.iter().copied()) / s_count as f64;
        vars.push(neumaier_sum(ranks.iter().map(|r| (r - mean) * (r - mean))) / s_count as f64);
    }
    Ok(-neumaier_sum(vars) / k as f64)
}
