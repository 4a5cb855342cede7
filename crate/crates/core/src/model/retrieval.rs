//! Similarity scoring, candidate probabilities, ranking and Hit@K.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{exact_mean, AggregationStrategy, CandidateRanking, Fingerprint, Instance, PredictionBundle};

/// Cosine similarity between a probability vector and a binary fingerprint.
pub fn cosine_similarity(theta: &[f64], c: &Fingerprint) -> Result<f64> {
    if theta.len() != c.dim() {
        return Err(Error::domain(format!(
            "dimension mismatch: theta has D={}, fingerprint has D={}",
            theta.len(),
            c.dim()
        )));
    }
    let theta_sq: f64 = theta.iter().map(|t| t * t).sum();
    cosine_with_norm(theta, theta_sq, c)
}

fn cosine_with_norm(theta: &[f64], theta_sq: f64, c: &Fingerprint) -> Result<f64> {
    let c_sq = c.count_ones() as f64;
    if theta_sq == 0.0 || c_sq == 0.0 {
        return Err(Error::domain("cosine similarity of a zero-norm vector"));
    }
    // sqrt of the product keeps exact results for parallel inputs
    Ok((c.dot(theta) / (theta_sq * c_sq).sqrt()).min(1.0))
}

/// Cosine similarity of `theta` against every candidate, computing `‖θ‖` once.
pub fn similarity_scores(theta: &[f64], candidates: &[Fingerprint]) -> Result<Vec<f64>> {
    let theta_sq: f64 = theta.iter().map(|t| t * t).sum();
    candidates
        .iter()
        .map(|c| {
            if c.dim() != theta.len() {
                return Err(Error::domain(format!(
                    "dimension mismatch: theta has D={}, fingerprint has D={}",
                    theta.len(),
                    c.dim()
                )));
            }
            cosine_with_norm(theta, theta_sq, c)
        })
        .collect()
}

/// Temperature-scaled softmax over similarity scores.
pub fn candidate_distribution(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::domain(format!("temperature must be positive, got {temperature}")));
    }
    if scores.is_empty() {
        return Err(Error::domain("softmax over an empty score vector"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = scores.iter().map(|s| ((s - max) / temperature).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

/// Indices sorted by descending value; ties keep ascending index order.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(Ordering::Equal));
    order
}

pub fn rank_candidates(instance: &Instance, theta: &[f64], temperature: f64) -> Result<CandidateRanking> {
    let scores = similarity_scores(theta, &instance.candidates)?;
    ranking_from_scores(scores, temperature)
}

fn ranking_from_scores(scores: Vec<f64>, temperature: f64) -> Result<CandidateRanking> {
    let probs = candidate_distribution(&scores, temperature)?;
    let order = descending_order(&scores);
    Ok(CandidateRanking { scores, probs, order })
}

/// 1 iff the true candidate is among the first `min(k, M)` ranked candidates.
pub fn hit_at_k(ranking: &CandidateRanking, true_index: usize, k: usize) -> Result<bool> {
    if k == 0 {
        return Err(Error::domain("K must be at least 1"));
    }
    if true_index >= ranking.len() {
        return Err(Error::domain(format!(
            "true_index {true_index} out of range for {} candidates",
            ranking.len()
        )));
    }
    Ok(ranking.order.iter().take(k).any(|&j| j == true_index))
}

/// Per-sample similarity scores, one row per posterior sample.
pub fn per_sample_scores(bundle: &PredictionBundle, instance: &Instance) -> Result<Vec<Vec<f64>>> {
    check_dims(bundle, instance)?;
    bundle
        .samples()
        .map(|theta| similarity_scores(theta, &instance.candidates))
        .collect()
}

fn check_dims(bundle: &PredictionBundle, instance: &Instance) -> Result<()> {
    if bundle.dim() != instance.dim() {
        return Err(Error::domain(format!(
            "bundle {} has D={} but instance {} has D={}",
            bundle.instance_id,
            bundle.dim(),
            instance.id,
            instance.dim()
        )));
    }
    Ok(())
}

pub(crate) fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows[0].len();
    let mut column = Vec::with_capacity(rows.len());
    (0..m)
        .map(|j| {
            column.clear();
            column.extend(rows.iter().map(|r| r[j]));
            exact_mean(&column)
        })
        .collect()
}

/// Combines posterior samples into one ranking.
///
/// For `ProbMean` both `scores` and `probs` hold the averaged candidate
/// distribution, so `scores[order]` stays non-increasing; ties in the averaged
/// probabilities fall back to the mean similarity score and then the index.
pub fn aggregate_prediction(
    bundle: &PredictionBundle,
    instance: &Instance,
    strategy: AggregationStrategy,
    temperature: f64,
) -> Result<CandidateRanking> {
    if bundle.n_samples() == 0 {
        return Err(Error::domain("empty sample set"));
    }
    check_dims(bundle, instance)?;
    match strategy {
        AggregationStrategy::FingerprintMean => rank_candidates(instance, &bundle.mean(), temperature),
        _ => {
            let per_sample = per_sample_scores(bundle, instance)?;
            aggregate_from_scores(&per_sample, None, instance, strategy, temperature)
        }
    }
}

/// [`aggregate_prediction`] on precomputed per-sample scores. `mean_theta` is
/// required for `FingerprintMean`.
pub(crate) fn aggregate_from_scores(
    per_sample: &[Vec<f64>],
    mean_theta: Option<&[f64]>,
    instance: &Instance,
    strategy: AggregationStrategy,
    temperature: f64,
) -> Result<CandidateRanking> {
    if per_sample.is_empty() {
        return Err(Error::domain("empty sample set"));
    }
    match strategy {
        AggregationStrategy::FingerprintMean => {
            let theta = mean_theta.ok_or_else(|| Error::domain("mean prediction required"))?;
            rank_candidates(instance, theta, temperature)
        }
        AggregationStrategy::ScoreMean => ranking_from_scores(column_means(per_sample), temperature),
        AggregationStrategy::ProbMean => {
            let per_sample_probs = per_sample
                .iter()
                .map(|s| candidate_distribution(s, temperature))
                .collect::<Result<Vec<_>>>()?;
            let mean_scores = column_means(per_sample);
            let probs = column_means(&per_sample_probs);
            let mut order: Vec<usize> = (0..probs.len()).collect();
            order.sort_by(|&a, &b| {
                probs[b]
                    .partial_cmp(&probs[a])
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| mean_scores[b].partial_cmp(&mean_scores[a]).unwrap_or(Ordering::Equal))
            });
            Ok(CandidateRanking {
                scores: probs.clone(),
                probs,
                order,
            })
        }
    }
}

/// Negative log-likelihood of the true candidate. Returns `+inf` when the
/// true candidate carries zero probability.
pub fn ranking_loss(ranking: &CandidateRanking, true_index: usize) -> Result<f64> {
    let p = *ranking.probs.get(true_index).ok_or_else(|| {
        Error::domain(format!(
            "true_index {true_index} out of range for {} candidates",
            ranking.probs.len()
        ))
    })?;
    Ok(if p > 0.0 { -p.ln() } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(bits: &[u8]) -> Fingerprint {
        Fingerprint::from_bits(&bits.iter().map(|&b| b == 1).collect::<Vec<_>>())
    }

    fn ranking(scores: &[f64]) -> CandidateRanking {
        ranking_from_scores(scores.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0, 0.0], &fp(&[1, 0, 0])).unwrap(), 1.0);
        let s = cosine_similarity(&[0.5, 0.5], &fp(&[1, 0])).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[0.0, 1.0], &fp(&[1, 0])).unwrap(), 0.0);
    }

    #[test]
    fn cosine_errors() {
        assert!(cosine_similarity(&[0.0, 0.0], &fp(&[1, 0])).is_err());
        assert!(cosine_similarity(&[1.0, 0.0], &Fingerprint::zeros(2)).is_err());
        assert!(cosine_similarity(&[1.0], &fp(&[1, 0])).is_err());
    }

    #[test]
    fn softmax_examples() {
        let p = candidate_distribution(&[0.3, 0.3, 0.3], 0.7).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        let p = candidate_distribution(&[1.0, 0.0], 1.0).unwrap();
        assert!((p[0] - 0.731_058_58).abs() < 1e-8);
        assert!((p[1] - 0.268_941_42).abs() < 1e-8);
        let p = candidate_distribution(&[0.9, 0.1], 1e-6).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9 && p[1] < 1e-9);
    }

    #[test]
    fn softmax_errors() {
        assert!(candidate_distribution(&[1.0], 0.0).is_err());
        assert!(candidate_distribution(&[1.0], -1.0).is_err());
        assert!(candidate_distribution(&[], 1.0).is_err());
    }

    #[test]
    fn ranking_examples() {
        let single = Instance::new("s", vec![fp(&[1, 1])], 0).unwrap();
        let r = rank_candidates(&single, &[0.2, 0.9], 0.003).unwrap();
        assert_eq!(r.order, vec![0]);
        assert_eq!(r.probs, vec![1.0]);

        assert_eq!(ranking(&[0.2, 0.8, 0.5]).order, vec![1, 2, 0]);
        assert_eq!(ranking(&[0.5, 0.5]).order, vec![0, 1]);
    }

    #[test]
    fn tie_break_matches_stable_sort() {
        let scores = [0.4, 0.7, 0.4, 0.7, 0.1, 0.4];
        let mut pairs: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
        // stable sort on the negated score keeps index order among ties
        pairs.sort_by(|a, b| (-a.1).partial_cmp(&-b.1).unwrap());
        let expected: Vec<usize> = pairs.into_iter().map(|p| p.0).collect();
        assert_eq!(descending_order(&scores), expected);
        assert_eq!(expected, vec![1, 3, 0, 2, 5, 4]);
    }

    #[test]
    fn hit_at_k_examples() {
        let r = ranking(&[0.9, 0.8, 0.7, 0.6, 0.5, 0.4]);
        assert!(hit_at_k(&r, 0, 1).unwrap());
        assert!(!hit_at_k(&r, 5, 5).unwrap());
        let r3 = ranking(&[0.9, 0.8, 0.7]);
        assert!(hit_at_k(&r3, 2, 20).unwrap());
        assert!(hit_at_k(&r3, 3, 1).is_err());
        assert!(hit_at_k(&r3, 0, 0).is_err());
    }

    #[test]
    fn score_mean_tie_breaks_by_index() {
        let per_sample = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
        let means = column_means(&per_sample);
        assert_eq!(means, vec![0.5, 0.5]);
        let r = ranking_from_scores(means, 1.0).unwrap();
        assert_eq!(r.order, vec![0, 1]);

        // same shape through the bundle path: mirrored samples average to a tie
        let inst = Instance::new("t", vec![fp(&[1, 0]), fp(&[0, 1])], 0).unwrap();
        let sym = PredictionBundle::from_rows("t", &[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let r = aggregate_prediction(&sym, &inst, AggregationStrategy::ScoreMean, 1.0).unwrap();
        assert!((r.scores[0] - r.scores[1]).abs() < 1e-15);
        assert_eq!(r.order, vec![0, 1]);
    }

    #[test]
    fn single_sample_strategies_agree() {
        let inst = Instance::new(
            "t",
            vec![fp(&[1, 0, 1]), fp(&[0, 1, 1]), fp(&[1, 1, 0]), fp(&[0, 0, 1])],
            2,
        )
        .unwrap();
        let bundle = PredictionBundle::from_rows("t", &[vec![0.3, 0.6, 0.2]]).unwrap();
        let orders: Vec<_> = AggregationStrategy::ALL
            .iter()
            .map(|&s| aggregate_prediction(&bundle, &inst, s, 0.003).unwrap().order)
            .collect();
        assert_eq!(orders[0], orders[1]);
        assert_eq!(orders[1], orders[2]);
    }

    #[test]
    fn constant_samples_equal_single_ranking() {
        let inst = Instance::new("t", vec![fp(&[1, 0, 1]), fp(&[0, 1, 1]), fp(&[1, 1, 0])], 0).unwrap();
        let theta = vec![0.7, 0.2, 0.4];
        let bundle = PredictionBundle::from_rows("t", &[theta.clone(), theta.clone(), theta.clone()]).unwrap();
        let direct = rank_candidates(&inst, &theta, 0.5).unwrap();
        for s in AggregationStrategy::ALL {
            let r = aggregate_prediction(&bundle, &inst, s, 0.5).unwrap();
            assert_eq!(r.order, direct.order, "{s}");
        }
        let fm = aggregate_prediction(&bundle, &inst, AggregationStrategy::FingerprintMean, 0.5).unwrap();
        assert_eq!(fm, direct);
    }

    #[test]
    fn prob_mean_is_renormalized() {
        let inst = Instance::new("t", vec![fp(&[1, 0]), fp(&[0, 1]), fp(&[1, 1])], 0).unwrap();
        let bundle = PredictionBundle::from_rows("t", &[vec![0.9, 0.2], vec![0.3, 0.8]]).unwrap();
        let r = aggregate_prediction(&bundle, &inst, AggregationStrategy::ProbMean, 0.1).unwrap();
        assert!((r.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for w in r.order.windows(2) {
            assert!(r.scores[w[0]] >= r.scores[w[1]]);
        }
    }

    #[test]
    fn ranking_loss_examples() {
        let uniform = CandidateRanking {
            scores: vec![0.5; 4],
            probs: vec![0.25; 4],
            order: vec![0, 1, 2, 3],
        };
        assert!((ranking_loss(&uniform, 3).unwrap() - 1.386_294_36).abs() < 1e-8);
        let certain = CandidateRanking {
            scores: vec![1.0, 0.0],
            probs: vec![1.0, 0.0],
            order: vec![0, 1],
        };
        assert_eq!(ranking_loss(&certain, 0).unwrap(), 0.0);
        assert_eq!(ranking_loss(&certain, 1).unwrap(), f64::INFINITY);
        let two = CandidateRanking {
            scores: vec![1.0, 0.0],
            probs: vec![0.7311, 0.2689],
            order: vec![0, 1],
        };
        // the listed probabilities are rounded to 4 digits
        assert!((ranking_loss(&two, 1).unwrap() - 1.313_261_69).abs() < 5e-4);
        let exact = ranking_from_scores(vec![1.0, 0.0], 1.0).unwrap();
        assert!((ranking_loss(&exact, 1).unwrap() - 1.313_261_69).abs() < 1e-8);
        assert!(ranking_loss(&exact, 2).is_err());
    }
}
