use crate::error::{Error, Result};
use crate::model::{descending_order, per_sample_scores, similarity_scores, Instance, PredictionBundle};

/// Negated mean variance, across posterior samples, of the rank positions of
/// the top-`k` candidates under the mean fingerprint prediction.
///
/// Ranks are 0-based positions in each sample's descending order (ties by
/// index). The variance is the population variance over the `S` samples.
/// When `k > M` all `M` candidates are used.
pub fn rank_variance(bundle: &PredictionBundle, instance: &Instance, k: usize) -> Result<f64> {
    let per_sample = per_sample_scores(bundle, instance)?;
    let mean_scores = similarity_scores(&bundle.mean(), &instance.candidates)?;
    rank_variance_from_scores(&per_sample, &mean_scores, k)
}

pub(crate) fn rank_variance_from_scores(per_sample: &[Vec<f64>], mean_scores: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("rank variance needs K >= 1"));
    }
    if per_sample.is_empty() {
        return Err(Error::domain("rank variance needs S >= 1"));
    }
    let m = mean_scores.len();
    let members: Vec<usize> = descending_order(mean_scores).into_iter().take(k.min(m)).collect();

    // positions[s][j] = rank of candidate j under sample s
    let positions: Vec<Vec<usize>> = per_sample
        .iter()
        .map(|scores| {
            let mut pos = vec![0; m];
            for (rank, j) in descending_order(scores).into_iter().enumerate() {
                pos[j] = rank;
            }
            pos
        })
        .collect();

    let n = per_sample.len() as f64;
    let total: f64 = members
        .iter()
        .map(|&j| {
            let mean = positions.iter().map(|p| p[j] as f64).sum::<f64>() / n;
            positions.iter().map(|p| (p[j] as f64 - mean).powi(2)).sum::<f64>() / n
        })
        .sum();
    Ok(-total / members.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Fingerprint;

    #[test]
    fn identical_samples_give_zero() {
        let fp = |b: &[usize]| Fingerprint::from_indices(3, b.iter().copied()).unwrap();
        let inst = Instance::new("i", vec![fp(&[0]), fp(&[1]), fp(&[2])], 0).unwrap();
        let row = vec![0.5, 0.2, 0.9];
        let b = PredictionBundle::from_rows("i", &[row.clone(), row.clone(), row]).unwrap();
        assert_eq!(rank_variance(&b, &inst, 2).unwrap(), 0.0);
    }

    #[test]
    fn swapped_top_candidate() {
        // sample 0 ranks candidate 0 first, sample 1 second
        let per_sample = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
        let mean = vec![0.6, 0.4];
        assert_eq!(rank_variance_from_scores(&per_sample, &mean, 1).unwrap(), -0.25);
    }

    #[test]
    fn single_sample_and_large_k() {
        let per_sample = vec![vec![0.3, 0.6, 0.1]];
        assert_eq!(rank_variance_from_scores(&per_sample, &[0.3, 0.6, 0.1], 20).unwrap(), 0.0);
        // k > M averages over all M candidates
        let per_sample = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
        assert_eq!(rank_variance_from_scores(&per_sample, &[0.6, 0.4], 5).unwrap(), -0.25);
        assert!(rank_variance_from_scores(&per_sample, &[0.6, 0.4], 0).is_err());
    }
}
