use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::Fingerprint;

/// Bitwise probabilities predicted for one spectrum.
///
/// Every component lies in `[0, 1]` and at least one is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        validate_probabilities(&theta)?;
        if theta.iter().all(|&t| t == 0.0) {
            return Err(Error::domain("probability vector is all zeros"));
        }
        Ok(Self(theta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ProbabilityVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn validate_probabilities(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(d) => Err(Error::domain(format!(
            "probability {} at position {d} outside [0, 1]",
            values[d]
        ))),
        None => Ok(()),
    }
}

/// One spectrum's candidate set with the position of the true molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub candidates: Vec<Fingerprint>,
    pub true_index: usize,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl Instance {
    /// Validates candidate count, dimensions, nonzero fingerprints and the true index.
    pub fn new(id: impl Into<String>, candidates: Vec<Fingerprint>, true_index: usize) -> Result<Self> {
        let id = id.into();
        let Some(first) = candidates.first() else {
            return Err(Error::domain(format!("instance {id}: empty candidate set")));
        };
        let dim = first.dim();
        for (j, c) in candidates.iter().enumerate() {
            if c.dim() != dim {
                return Err(Error::domain(format!(
                    "instance {id}: candidate {j} has D={} but candidate 0 has D={dim}",
                    c.dim()
                )));
            }
            if c.is_zero() {
                return Err(Error::domain(format!("instance {id}: candidate {j} has no bits set")));
            }
        }
        if true_index >= candidates.len() {
            return Err(Error::domain(format!(
                "instance {id}: true_index {true_index} out of range for {} candidates",
                candidates.len()
            )));
        }
        Ok(Self {
            id,
            candidates,
            true_index,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, meta: BTreeMap<String, serde_json::Value>) -> Self {
        self.meta = meta;
        self
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn dim(&self) -> usize {
        self.candidates[0].dim()
    }

    pub fn truth(&self) -> &Fingerprint {
        &self.candidates[self.true_index]
    }
}

/// Posterior samples of the bitwise probabilities for one instance, stored
/// row-major as `n_samples x dim`, plus an optional penultimate-layer embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    pub instance_id: String,
    n_samples: usize,
    dim: usize,
    samples: Vec<f64>,
    pub embedding: Option<Vec<f64>>,
}

impl PredictionBundle {
    pub fn new(
        instance_id: impl Into<String>,
        n_samples: usize,
        dim: usize,
        samples: Vec<f64>,
        embedding: Option<Vec<f64>>,
    ) -> Result<Self> {
        let instance_id = instance_id.into();
        if n_samples == 0 {
            return Err(Error::domain(format!("bundle {instance_id}: empty sample set")));
        }
        if samples.len() != n_samples * dim {
            return Err(Error::domain(format!(
                "bundle {instance_id}: {} values for {n_samples} samples of D={dim}",
                samples.len()
            )));
        }
        validate_probabilities(&samples)
            .map_err(|e| Error::domain(format!("bundle {instance_id}: {e}")))?;
        if let Some(h) = &embedding {
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("bundle {instance_id}: non-finite embedding")));
            }
        }
        Ok(Self {
            instance_id,
            n_samples,
            dim,
            samples,
            embedding,
        })
    }

    /// Convenience constructor from one vector per sample.
    pub fn from_rows(instance_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::domain("ragged sample rows"));
        }
        Self::new(instance_id, rows.len(), dim, rows.concat(), None)
    }

    pub fn with_embedding(mut self, embedding: Vec<f64>) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, s: usize) -> &[f64] {
        &self.samples[s * self.dim..(s + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim.max(1)).take(self.n_samples)
    }

    pub fn raw(&self) -> &[f64] {
        &self.samples
    }

    /// Posterior mean `θ̄`, computed per bit with [`exact_mean`].
    pub fn mean(&self) -> Vec<f64> {
        let mut column = Vec::with_capacity(self.n_samples);
        (0..self.dim)
            .map(|d| {
                column.clear();
                column.extend((0..self.n_samples).map(|s| self.samples[s * self.dim + d]));
                exact_mean(&column)
            })
            .collect()
    }
}

/// Arithmetic mean that returns the common value exactly when all inputs are
/// equal, so degenerate posteriors aggregate without rounding drift.
pub fn exact_mean(values: &[f64]) -> f64 {
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        first
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Similarity scores, candidate probabilities and the induced ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRanking {
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
    /// Candidate indices, best first.
    pub order: Vec<usize>,
}

impl CandidateRanking {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// 0-based position of candidate `j` in the ranking.
    pub fn position(&self, j: usize) -> Option<usize> {
        self.order.iter().position(|&o| o == j)
    }
}

/// How posterior samples are combined into a single retrieval prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AggregationStrategy {
    /// Rank by similarity to the mean fingerprint prediction.
    FingerprintMean,
    /// Rank by the mean of per-sample similarity scores.
    #[default]
    ScoreMean,
    /// Rank by the mean of per-sample candidate probabilities.
    ProbMean,
}

impl AggregationStrategy {
    pub const ALL: [AggregationStrategy; 3] = [
        AggregationStrategy::FingerprintMean,
        AggregationStrategy::ScoreMean,
        AggregationStrategy::ProbMean,
    ];
}

impl fmt::Display for AggregationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationStrategy::FingerprintMean => "fingerprint-mean",
            AggregationStrategy::ScoreMean => "score-mean",
            AggregationStrategy::ProbMean => "prob-mean",
        })
    }
}

impl FromStr for AggregationStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fingerprint-mean" | "fingerprint" => Ok(AggregationStrategy::FingerprintMean),
            "score-mean" | "score" => Ok(AggregationStrategy::ScoreMean),
            "prob-mean" | "prob" => Ok(AggregationStrategy::ProbMean),
            other => Err(Error::domain(format!("unknown aggregation strategy {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(bits: &[u8]) -> Fingerprint {
        Fingerprint::from_bits(&bits.iter().map(|&b| b == 1).collect::<Vec<_>>())
    }

    #[test]
    fn instance_validation() {
        assert!(Instance::new("a", vec![], 0).is_err());
        assert!(Instance::new("a", vec![fp(&[1, 0])], 1).is_err());
        assert!(Instance::new("a", vec![fp(&[0, 0])], 0).is_err());
        assert!(Instance::new("a", vec![fp(&[1, 0]), fp(&[1, 0, 0])], 0).is_err());
        let inst = Instance::new("a", vec![fp(&[1, 0]), fp(&[0, 1])], 1).unwrap();
        assert_eq!(inst.truth(), &fp(&[0, 1]));
    }

    #[test]
    fn bundle_validation() {
        assert!(PredictionBundle::new("x", 0, 2, vec![], None).is_err());
        assert!(PredictionBundle::new("x", 1, 2, vec![0.5], None).is_err());
        assert!(PredictionBundle::new("x", 1, 2, vec![0.5, 1.5], None).is_err());
        assert!(PredictionBundle::new("x", 1, 2, vec![0.5, f64::NAN], None).is_err());
        let b = PredictionBundle::from_rows("x", &[vec![0.2, 0.4], vec![0.4, 0.8]]).unwrap();
        assert_eq!(b.sample(1), &[0.4, 0.8]);
        let m = b.mean();
        assert!((m[0] - 0.3).abs() < 1e-15 && (m[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn probability_vector_rejects_zero_and_out_of_range() {
        assert!(ProbabilityVector::new(vec![0.0, 0.0]).is_err());
        assert!(ProbabilityVector::new(vec![-0.1, 0.5]).is_err());
        assert!(ProbabilityVector::new(vec![0.0, 0.5]).is_ok());
    }

    #[test]
    fn aggregation_names_round_trip() {
        for s in AggregationStrategy::ALL {
            assert_eq!(s.to_string().parse::<AggregationStrategy>().unwrap(), s);
        }
    }
}
