//! Scoring functions κ, all oriented so that higher means more confident.
//!
//! Scores come in three families: first-order retrieval scores (`conf`,
//! `gap`), second-order decompositions at bit and candidate level plus rank
//! variance, and distance scores computed from an embedding against a
//! [`TrainEmbeddingIndex`].

mod decomposition;
mod distance;
mod rank_variance;

use std::fmt;
use std::str::FromStr;

pub use decomposition::{
    binary_entropy, bitwise_decomposition, decompose_distributions, entropy, retrieval_decomposition,
    Decomposition,
};
pub use distance::{
    knn_score, mahalanobis_score, normalize, TrainEmbeddingIndex, DEFAULT_COVARIANCE_EPSILON, DEFAULT_KNN_K,
};
pub use rank_variance::rank_variance;

use crate::error::{Error, Result};
use crate::model::{
    aggregate_from_scores, per_sample_scores, similarity_scores, AggregationStrategy, CandidateRanking, Instance,
    PredictionBundle, DEFAULT_TEMPERATURE,
};

/// Maximum candidate probability.
pub fn score_confidence(ranking: &CandidateRanking) -> f64 {
    ranking.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Difference between the two highest similarity scores. A singleton
/// candidate set is treated as having a runner-up at score 0.
pub fn score_gap(ranking: &CandidateRanking) -> f64 {
    let first = ranking.scores[ranking.order[0]];
    let second = ranking.order.get(1).map_or(0.0, |&j| ranking.scores[j]);
    first - second
}

/// Identifies one scoring function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScoreKind {
    Conf,
    Gap,
    BitTot,
    BitAl,
    BitEp,
    RetTot,
    RetAl,
    RetEp,
    RankVar(usize),
    Knn,
    Mah,
    /// Candidate-set size baseline; as a score it is `-M`.
    NumCandidates,
}

/// Grouping used when displaying correlations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScoreLevel {
    Retrieval,
    Fingerprint,
    Other,
}

impl ScoreKind {
    /// Every score except the distance scores, with rank variance for each `ks`.
    pub fn prediction_scores(ks: &[usize]) -> Vec<ScoreKind> {
        let mut v = vec![
            ScoreKind::Conf,
            ScoreKind::Gap,
            ScoreKind::BitTot,
            ScoreKind::BitAl,
            ScoreKind::BitEp,
            ScoreKind::RetTot,
            ScoreKind::RetAl,
            ScoreKind::RetEp,
        ];
        v.extend(ks.iter().map(|&k| ScoreKind::RankVar(k)));
        v.push(ScoreKind::NumCandidates);
        v
    }

    pub fn needs_embedding(self) -> bool {
        matches!(self, ScoreKind::Knn | ScoreKind::Mah)
    }

    pub fn level(self) -> ScoreLevel {
        match self {
            ScoreKind::Conf
            | ScoreKind::Gap
            | ScoreKind::RetTot
            | ScoreKind::RetAl
            | ScoreKind::RetEp
            | ScoreKind::RankVar(_) => ScoreLevel::Retrieval,
            ScoreKind::BitTot | ScoreKind::BitAl | ScoreKind::BitEp => ScoreLevel::Fingerprint,
            ScoreKind::Knn | ScoreKind::Mah | ScoreKind::NumCandidates => ScoreLevel::Other,
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreKind::Conf => f.write_str("conf"),
            ScoreKind::Gap => f.write_str("gap"),
            ScoreKind::BitTot => f.write_str("bit_tot"),
            ScoreKind::BitAl => f.write_str("bit_al"),
            ScoreKind::BitEp => f.write_str("bit_ep"),
            ScoreKind::RetTot => f.write_str("ret_tot"),
            ScoreKind::RetAl => f.write_str("ret_al"),
            ScoreKind::RetEp => f.write_str("ret_ep"),
            ScoreKind::RankVar(k) => write!(f, "rank_var@{k}"),
            ScoreKind::Knn => f.write_str("knn"),
            ScoreKind::Mah => f.write_str("mah"),
            ScoreKind::NumCandidates => f.write_str("num_candidates"),
        }
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "conf" => ScoreKind::Conf,
            "gap" => ScoreKind::Gap,
            "bit_tot" => ScoreKind::BitTot,
            "bit_al" => ScoreKind::BitAl,
            "bit_ep" => ScoreKind::BitEp,
            "ret_tot" => ScoreKind::RetTot,
            "ret_al" => ScoreKind::RetAl,
            "ret_ep" => ScoreKind::RetEp,
            "knn" => ScoreKind::Knn,
            "mah" => ScoreKind::Mah,
            "num_candidates" => ScoreKind::NumCandidates,
            other => match other.strip_prefix("rank_var@").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => ScoreKind::RankVar(k),
                _ => return Err(Error::domain(format!("unknown score {other:?}"))),
            },
        })
    }
}

/// Parameters for computing a score table.
#[derive(Debug, Clone)]
pub struct ScoreConfig {
    /// Requested scores. `NumCandidates` needs no computation and is always
    /// available from the table.
    pub scores: Vec<ScoreKind>,
    pub temperature: f64,
    pub aggregation: AggregationStrategy,
    pub knn_k: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            scores: ScoreKind::prediction_scores(&[1, 5, 20]),
            temperature: DEFAULT_TEMPERATURE,
            aggregation: AggregationStrategy::default(),
            knn_k: DEFAULT_KNN_K,
        }
    }
}

impl ScoreConfig {
    /// Computed columns, in request order, without `NumCandidates` and duplicates.
    pub fn columns(&self) -> Vec<ScoreKind> {
        let mut cols: Vec<ScoreKind> = Vec::new();
        for &k in &self.scores {
            if k != ScoreKind::NumCandidates && !cols.contains(&k) {
                cols.push(k);
            }
        }
        cols
    }

    pub fn needs_embeddings(&self) -> bool {
        self.scores.iter().any(|k| k.needs_embedding())
    }
}

/// Everything computed for one instance: the score row plus the aggregated
/// ranking and mean prediction that losses are evaluated on.
#[derive(Debug, Clone)]
pub struct InstanceEvaluation {
    pub values: Vec<f64>,
    pub ranking: CandidateRanking,
    pub mean_theta: Vec<f64>,
}

/// Scores one instance. `columns` is typically [`ScoreConfig::columns`].
pub fn evaluate_instance(
    instance: &Instance,
    bundle: &PredictionBundle,
    config: &ScoreConfig,
    columns: &[ScoreKind],
    index: Option<&TrainEmbeddingIndex>,
) -> Result<InstanceEvaluation> {
    let per_sample = per_sample_scores(bundle, instance)?;
    let mean_theta = bundle.mean();
    let ranking = aggregate_from_scores(
        &per_sample,
        Some(&mean_theta),
        instance,
        config.aggregation,
        config.temperature,
    )?;

    let mut bit: Option<Decomposition> = None;
    let mut ret: Option<Decomposition> = None;
    let mut mean_scores: Option<Vec<f64>> = None;
    let mut query: Option<Vec<f64>> = None;

    let mut values = Vec::with_capacity(columns.len());
    for &kind in columns {
        let v = match kind {
            ScoreKind::Conf => score_confidence(&ranking),
            ScoreKind::Gap => score_gap(&ranking),
            ScoreKind::BitTot | ScoreKind::BitAl | ScoreKind::BitEp => {
                let d = match bit {
                    Some(d) => d,
                    None => *bit.insert(bitwise_decomposition(bundle)?),
                };
                match kind {
                    ScoreKind::BitTot => d.total,
                    ScoreKind::BitAl => d.aleatoric,
                    _ => d.epistemic,
                }
            }
            ScoreKind::RetTot | ScoreKind::RetAl | ScoreKind::RetEp => {
                let d = match ret {
                    Some(d) => d,
                    None => *ret.insert(decomposition::retrieval_decomposition_from_scores(
                        &per_sample,
                        config.temperature,
                    )?),
                };
                match kind {
                    ScoreKind::RetTot => d.total,
                    ScoreKind::RetAl => d.aleatoric,
                    _ => d.epistemic,
                }
            }
            ScoreKind::RankVar(k) => {
                if mean_scores.is_none() {
                    mean_scores = Some(similarity_scores(&mean_theta, &instance.candidates)?);
                }
                rank_variance::rank_variance_from_scores(&per_sample, mean_scores.as_deref().unwrap(), k)?
            }
            ScoreKind::Knn | ScoreKind::Mah => {
                let index = index.ok_or_else(|| Error::domain("distance scores need training embeddings"))?;
                if query.is_none() {
                    let h = bundle
                        .embedding
                        .as_deref()
                        .ok_or_else(|| Error::MissingEmbeddings {
                            ids: vec![instance.id.clone()],
                        })?;
                    query = Some(normalize(h).ok_or_else(|| {
                        Error::domain(format!("instance {}: embedding has zero norm", instance.id))
                    })?);
                }
                let h = query.as_deref().unwrap();
                if kind == ScoreKind::Knn {
                    knn_score(h, index, config.knn_k.min(index.len()))?
                } else {
                    mahalanobis_score(h, index)?
                }
            }
            ScoreKind::NumCandidates => -(instance.num_candidates() as f64),
        };
        values.push(v);
    }
    Ok(InstanceEvaluation {
        values,
        ranking,
        mean_theta,
    })
}

/// One row of a [`ScoreTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub id: String,
    pub num_candidates: usize,
    pub values: Vec<f64>,
}

/// Per-instance score values, one column per [`ScoreKind`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    columns: Vec<ScoreKind>,
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(columns: Vec<ScoreKind>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ScoreRow) {
        assert_eq!(row.values.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[ScoreKind] {
        &self.columns
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Confidence-oriented values of one score across all rows.
    pub fn kappa(&self, kind: ScoreKind) -> Option<Vec<f64>> {
        if kind == ScoreKind::NumCandidates {
            return Some(self.rows.iter().map(|r| -(r.num_candidates as f64)).collect());
        }
        let c = self.columns.iter().position(|&k| k == kind)?;
        Some(self.rows.iter().map(|r| r.values[c]).collect())
    }

    /// Rows kept by `keep`, in order.
    pub fn filter(&self, mut keep: impl FnMut(&ScoreRow) -> bool) -> ScoreTable {
        ScoreTable {
            columns: self.columns.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }
}

/// Result of [`compute_score_table`]: the table, instances that could not be
/// scored, and non-fatal warnings.
#[derive(Debug, Clone, Default)]
pub struct ScoreReport {
    pub table: ScoreTable,
    pub excluded: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

/// Scores every instance against its matching bundle (matched by id).
///
/// Instances without a bundle, or whose scoring fails, are excluded and listed
/// in the report. Requesting a distance score when any bundle lacks an
/// embedding is an error naming those instances.
pub fn compute_score_table(
    instances: &[Instance],
    bundles: &[PredictionBundle],
    config: &ScoreConfig,
    index: Option<&TrainEmbeddingIndex>,
) -> Result<ScoreReport> {
    use std::collections::HashMap;

    let by_id: HashMap<&str, &PredictionBundle> = bundles.iter().map(|b| (b.instance_id.as_str(), b)).collect();
    let mut report = ScoreReport::default();
    let config = effective_config(config, index, &mut report.warnings)?;

    if config.needs_embeddings() {
        let missing: Vec<String> = instances
            .iter()
            .filter(|i| by_id.get(i.id.as_str()).is_some_and(|b| b.embedding.is_none()))
            .map(|i| i.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingEmbeddings { ids: missing });
        }
    }

    let columns = config.columns();
    report.table = ScoreTable::new(columns.clone());
    for inst in instances {
        let Some(bundle) = by_id.get(inst.id.as_str()) else {
            report.excluded.push((inst.id.clone(), "no matching prediction bundle".into()));
            continue;
        };
        match evaluate_instance(inst, bundle, &config, &columns, index) {
            Ok(ev) => report.table.push(ScoreRow {
                id: inst.id.clone(),
                num_candidates: inst.num_candidates(),
                values: ev.values,
            }),
            Err(e) => report.excluded.push((inst.id.clone(), e.to_string())),
        }
    }
    Ok(report)
}

/// Validates the distance-score setup and clamps `knn_k` to the index size.
pub fn effective_config(
    config: &ScoreConfig,
    index: Option<&TrainEmbeddingIndex>,
    warnings: &mut Vec<String>,
) -> Result<ScoreConfig> {
    let mut config = config.clone();
    if config.needs_embeddings() {
        let index = index.ok_or_else(|| Error::domain("distance scores requested without training embeddings"))?;
        if config.knn_k == 0 {
            return Err(Error::domain("kNN needs k >= 1"));
        }
        if config.knn_k > index.len() {
            warnings.push(format!(
                "knn k={} exceeds the {} training embeddings; using k={}",
                config.knn_k,
                index.len(),
                index.len()
            ));
            config.knn_k = index.len();
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{candidate_distribution, descending_order, Fingerprint};

    fn ranking(scores: Vec<f64>, temperature: f64) -> CandidateRanking {
        let probs = candidate_distribution(&scores, temperature).unwrap();
        let order = descending_order(&scores);
        CandidateRanking { scores, probs, order }
    }

    #[test]
    fn confidence_examples() {
        assert!((score_confidence(&ranking(vec![0.4; 5], 1.0)) - 0.2).abs() < 1e-15);
        assert!((score_confidence(&ranking(vec![1.0, 0.0], 1.0)) - 0.731_058_58).abs() < 1e-8);
        assert_eq!(score_confidence(&ranking(vec![0.3], 0.003)), 1.0);
    }

    #[test]
    fn gap_examples() {
        assert!((score_gap(&ranking(vec![0.9, 0.7, 0.3], 1.0)) - 0.2).abs() < 1e-15);
        assert_eq!(score_gap(&ranking(vec![0.6, 0.6, 0.1], 1.0)), 0.0);
        assert_eq!(score_gap(&ranking(vec![0.8], 1.0)), 0.8);
    }

    #[test]
    fn score_names_round_trip() {
        let mut all = ScoreKind::prediction_scores(&[1, 5, 20]);
        all.extend([ScoreKind::Knn, ScoreKind::Mah]);
        for k in all {
            assert_eq!(k.to_string().parse::<ScoreKind>().unwrap(), k);
        }
        assert!("rank_var@0".parse::<ScoreKind>().is_err());
        assert!("entropy".parse::<ScoreKind>().is_err());
    }

    fn tiny_dataset() -> (Vec<Instance>, Vec<PredictionBundle>) {
        let fp = |b: &[usize]| Fingerprint::from_indices(4, b.iter().copied()).unwrap();
        let instances = vec![
            Instance::new("a", vec![fp(&[0, 1]), fp(&[2, 3]), fp(&[1, 2])], 0).unwrap(),
            Instance::new("b", vec![fp(&[0]), fp(&[3])], 1).unwrap(),
            Instance::new("c", vec![fp(&[1, 3])], 0).unwrap(),
        ];
        let bundles = vec![
            PredictionBundle::from_rows("a", &[vec![0.9, 0.8, 0.1, 0.2], vec![0.7, 0.2, 0.6, 0.1]])
                .unwrap()
                .with_embedding(vec![1.0, 0.1]),
            PredictionBundle::from_rows("b", &[vec![0.3, 0.2, 0.1, 0.9], vec![0.5, 0.1, 0.1, 0.4]])
                .unwrap()
                .with_embedding(vec![0.2, 1.0]),
            PredictionBundle::from_rows("c", &[vec![0.1, 0.9, 0.2, 0.8], vec![0.2, 0.7, 0.1, 0.9]])
                .unwrap()
                .with_embedding(vec![-0.5, 0.5]),
        ];
        (instances, bundles)
    }

    #[test]
    fn single_instance_single_column() {
        let (instances, bundles) = tiny_dataset();
        let config = ScoreConfig {
            scores: vec![ScoreKind::Conf],
            ..ScoreConfig::default()
        };
        let report = compute_score_table(&instances[..1], &bundles, &config, None).unwrap();
        assert_eq!(report.table.len(), 1);
        assert_eq!(report.table.columns(), &[ScoreKind::Conf]);
    }

    #[test]
    fn knn_without_embeddings_names_instances() {
        let (instances, mut bundles) = tiny_dataset();
        bundles[0].embedding = None;
        bundles[2].embedding = None;
        let index = TrainEmbeddingIndex::new(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let config = ScoreConfig {
            scores: vec![ScoreKind::Conf, ScoreKind::Knn],
            knn_k: 1,
            ..ScoreConfig::default()
        };
        match compute_score_table(&instances, &bundles, &config, Some(&index)) {
            Err(Error::MissingEmbeddings { ids }) => assert_eq!(ids, vec!["a".to_string(), "c".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_bundle_is_excluded() {
        let (instances, bundles) = tiny_dataset();
        let report = compute_score_table(&instances, &bundles[..2], &ScoreConfig::default(), None).unwrap();
        assert_eq!(report.table.len(), 2);
        assert_eq!(report.excluded.len(), 1);
        assert_eq!(report.excluded[0].0, "c");
    }

    #[test]
    fn all_columns_match_per_op_results() {
        let (instances, bundles) = tiny_dataset();
        let index = TrainEmbeddingIndex::new(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.7, 0.7]]).unwrap();
        let mut scores = ScoreKind::prediction_scores(&[1, 2]);
        scores.extend([ScoreKind::Knn, ScoreKind::Mah]);
        let config = ScoreConfig {
            scores,
            temperature: 0.1,
            knn_k: 100,
            ..ScoreConfig::default()
        };
        let report = compute_score_table(&instances, &bundles, &config, Some(&index)).unwrap();
        assert_eq!(report.warnings.len(), 1, "k is clamped to N");
        let t = &report.table;
        assert_eq!(t.len(), 3);
        for (i, (inst, b)) in instances.iter().zip(&bundles).enumerate() {
            let agg = crate::model::aggregate_prediction(b, inst, config.aggregation, 0.1).unwrap();
            let bit = bitwise_decomposition(b).unwrap();
            let ret = retrieval_decomposition(b, inst, 0.1).unwrap();
            let h = normalize(b.embedding.as_ref().unwrap()).unwrap();
            let expect = [
                (ScoreKind::Conf, score_confidence(&agg)),
                (ScoreKind::Gap, score_gap(&agg)),
                (ScoreKind::BitTot, bit.total),
                (ScoreKind::BitAl, bit.aleatoric),
                (ScoreKind::BitEp, bit.epistemic),
                (ScoreKind::RetTot, ret.total),
                (ScoreKind::RetAl, ret.aleatoric),
                (ScoreKind::RetEp, ret.epistemic),
                (ScoreKind::RankVar(1), rank_variance(b, inst, 1).unwrap()),
                (ScoreKind::RankVar(2), rank_variance(b, inst, 2).unwrap()),
                (ScoreKind::Knn, knn_score(&h, &index, 3).unwrap()),
                (ScoreKind::Mah, mahalanobis_score(&h, &index).unwrap()),
                (ScoreKind::NumCandidates, -(inst.num_candidates() as f64)),
            ];
            for (kind, want) in expect {
                assert_eq!(t.kappa(kind).unwrap()[i], want, "{kind} row {i}");
            }
        }
    }
}
