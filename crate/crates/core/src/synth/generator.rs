use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{
    aggregate_prediction, AggregationStrategy, Fingerprint, Instance, PredictionBundle, DEFAULT_CANDIDATE_CAP,
    DEFAULT_DIM, DEFAULT_TEMPERATURE,
};
use crate::rng::CounterRng;

/// Smallest fingerprint length the generator supports.
pub const MIN_SYNTH_DIM: usize = 32;

const EMBEDDING_STREAM: u64 = u64::MAX;
const TRAIN_STREAM: u64 = u64::MAX - 1;
const MEAN_CHECK_RETRIES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DifficultyModel {
    /// The decoy is an unrelated candidate.
    #[default]
    PlantedConfidence,
    /// The decoy is a near-duplicate of the true candidate (one bit moved).
    SimilarCandidates,
}

impl fmt::Display for DifficultyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DifficultyModel::PlantedConfidence => "planted-confidence",
            DifficultyModel::SimilarCandidates => "similar-candidates",
        })
    }
}

impl FromStr for DifficultyModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planted-confidence" => Ok(DifficultyModel::PlantedConfidence),
            "similar-candidates" => Ok(DifficultyModel::SimilarCandidates),
            _ => Err(Error::domain(format!("unknown difficulty model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_instances: usize,
    pub dim: usize,
    pub m_min: usize,
    pub m_max: usize,
    pub n_samples: usize,
    pub noise_level: f64,
    pub seed: u64,
    pub difficulty: DifficultyModel,
    /// Emit embeddings of this length with every bundle.
    pub embedding_dim: Option<usize>,
    pub cap: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_instances: 100,
            dim: DEFAULT_DIM,
            m_min: 1,
            m_max: DEFAULT_CANDIDATE_CAP,
            n_samples: 5,
            noise_level: 1.0,
            seed: 0,
            difficulty: DifficultyModel::default(),
            embedding_dim: None,
            cap: DEFAULT_CANDIDATE_CAP,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_instances == 0 || self.n_samples == 0 || self.m_min == 0 {
            return Err(Error::domain("instance, sample and candidate counts must be >= 1"));
        }
        if self.m_min > self.m_max {
            return Err(Error::domain(format!(
                "candidate range [{}, {}] is empty",
                self.m_min, self.m_max
            )));
        }
        if self.m_max > self.cap {
            return Err(Error::domain(format!(
                "candidate range [{}, {}] exceeds the cap of {}",
                self.m_min, self.m_max, self.cap
            )));
        }
        if self.dim < MIN_SYNTH_DIM {
            return Err(Error::domain(format!(
                "synthetic fingerprints need D >= {MIN_SYNTH_DIM}, got {}",
                self.dim
            )));
        }
        if !(self.noise_level >= 0.0) || self.noise_level.is_infinite() {
            return Err(Error::domain(format!("noise level {} must be finite and >= 0", self.noise_level)));
        }
        if self.embedding_dim == Some(0) {
            return Err(Error::domain("embedding dimension must be >= 1"));
        }
        Ok(())
    }

    /// Bits set in every synthetic candidate.
    pub fn bits_per_candidate(&self) -> usize {
        (self.dim / 8).clamp(4, 32)
    }

    /// Probability that an instance has a single candidate.
    pub fn singleton_mass(&self) -> f64 {
        if self.m_min == 1 {
            1.0 / (self.m_max - self.m_min + 1) as f64
        } else {
            0.0
        }
    }

    pub fn instance_id(&self, i: usize) -> String {
        format!("syn{i:06}")
    }
}

/// Ground truth planted in one synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTruth {
    pub id: String,
    /// Uniform latent difficulty in `[0, 1)`.
    pub latent: f64,
    /// Probability that the top-1 candidate is wrong.
    pub error_prob: f64,
    /// The Bernoulli draw deciding whether the decoy is ranked first.
    pub intended_error: bool,
    /// Whether the top-1 candidate under score-mean aggregation is wrong.
    pub realized_error: bool,
}

impl PlantedTruth {
    /// The ideal confidence score `1 - error_prob`.
    pub fn ideal_kappa(&self) -> f64 {
        1.0 - self.error_prob
    }
}

#[derive(Debug, Clone)]
pub struct SynthSample {
    pub instance: Instance,
    pub bundle: PredictionBundle,
    pub truth: PlantedTruth,
}

fn random_candidate(rng: &mut CounterRng, dim: usize, bits: usize) -> Fingerprint {
    Fingerprint::from_indices(dim, rng.sample_distinct(dim, bits)).expect("indices below dim")
}

/// `truth` with one set bit moved to an unset position.
fn near_duplicate(rng: &mut CounterRng, truth: &Fingerprint) -> Fingerprint {
    let ones: Vec<usize> = truth.ones().collect();
    let drop = ones[rng.below(ones.len() as u64) as usize];
    let mut add;
    loop {
        add = rng.below(truth.dim() as u64) as usize;
        if !truth.get(add) {
            break;
        }
    }
    let mut fp = truth.clone();
    fp.clear(drop);
    fp.set(add);
    fp
}

/// Zero-mean offsets scaled so the largest magnitude equals `amplitude`.
fn centred_offsets(rng: &mut CounterRng, n: usize, amplitude: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = raw.iter().map(|r| r - mean).collect();
    let scale = centred.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 || amplitude == 0.0 {
        return vec![0.0; n];
    }
    centred.iter().map(|c| amplitude * c / scale).collect()
}

fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

fn random_direction(rng: &mut CounterRng, dim: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    g.iter().map(|v| v / norm).collect()
}

/// `normalize(centre + scale * g / sqrt(d))`, rounded to single precision.
fn perturbed_embedding(rng: &mut CounterRng, centre: &[f64], scale: f64) -> Vec<f64> {
    let d = centre.len() as f64;
    let v: Vec<f64> = centre.iter().map(|c| c + scale * rng.normal() / d.sqrt()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| round_f32(x / norm)).collect()
}

fn embedding_centre(config: &SynthConfig, dim: usize) -> Vec<f64> {
    random_direction(&mut CounterRng::new(config.seed).split(EMBEDDING_STREAM), dim)
}

/// Training-set embeddings matching the distribution of low-difficulty
/// instances. Empty when the config has no embedding dimension.
pub fn training_embeddings(config: &SynthConfig, n: usize) -> Vec<Vec<f64>> {
    let Some(dh) = config.embedding_dim else {
        return Vec::new();
    };
    let centre = embedding_centre(config, dh);
    let root = CounterRng::new(config.seed).split(TRAIN_STREAM);
    (0..n)
        .map(|j| perturbed_embedding(&mut root.split(j as u64), &centre, 0.1))
        .collect()
}

/// Generates instance `i`; depends only on `(config, i)`.
///
/// A Bernoulli(`p`) draw decides whether the ranking puts a decoy (`z = 1`)
/// or the true candidate first; the top candidate `A` gets most of the
/// prediction mass and the runner-up `B` a share growing with `p`, so that
/// confidence scores degrade with the planted error probability. Posterior
/// samples perturb the split between `A` and `B` and a background level
/// around zero-mean offsets.
pub fn generate_instance(config: &SynthConfig, i: usize) -> SynthSample {
    let mut rng = CounterRng::new(config.seed).split(i as u64);
    let dim = config.dim;
    let bits = config.bits_per_candidate();
    let noise = config.noise_level;

    let m = rng.range_inclusive(config.m_min, config.m_max);
    let true_index = rng.below(m as u64) as usize;
    let u = rng.next_f64();
    let p = if m == 1 { 0.0 } else { (noise * u).min(1.0) };
    let z = rng.bernoulli(p);
    let decoy = if m == 1 {
        None
    } else {
        let d = rng.below(m as u64 - 1) as usize;
        Some(if d >= true_index { d + 1 } else { d })
    };

    let mut candidates: Vec<Fingerprint> = Vec::with_capacity(m);
    while candidates.len() < m {
        let c = random_candidate(&mut rng, dim, bits);
        if !candidates.contains(&c) {
            candidates.push(c);
        }
    }
    if let (DifficultyModel::SimilarCandidates, Some(d)) = (config.difficulty, decoy) {
        loop {
            let c = near_duplicate(&mut rng, &candidates[true_index]);
            if !candidates.contains(&c) {
                candidates[d] = c;
                break;
            }
        }
    }

    let (a, b) = match decoy {
        Some(d) if z => (d, Some(true_index)),
        Some(d) => (true_index, Some(d)),
        None => (true_index, None),
    };
    let background = (0.05 * noise * (0.5 + u)).min(0.2);
    let mass = 1.0 - 1.5 * background;
    let w_b = mass * 0.49 * p;
    let w_a = mass - w_b;

    // No other candidate may match A's noiseless score.
    if let Some(b) = b {
        let o_ab = candidates[a].overlap(&candidates[b]) as f64;
        let top = w_a * bits as f64 + w_b * o_ab;
        for j in 0..m {
            if j == a || j == b {
                continue;
            }
            loop {
                let c = &candidates[j];
                let s = w_a * candidates[a].overlap(c) as f64 + w_b * candidates[b].overlap(c) as f64;
                let duplicate = candidates.iter().enumerate().any(|(l, o)| l != j && o == c);
                if s < top && !duplicate {
                    break;
                }
                candidates[j] = random_candidate(&mut rng, dim, bits);
            }
        }
    }

    let s_count = config.n_samples;
    let mut amplitude = w_b * noise.min(1.0);
    let raw_delta = centred_offsets(&mut rng, s_count, 1.0);
    let raw_eta = centred_offsets(&mut rng, s_count, 0.5);
    let id = config.instance_id(i);
    let instance = Instance::new(id.clone(), candidates, true_index).expect("generator builds valid instances");

    let build = |amplitude: f64| -> PredictionBundle {
        let mut samples = Vec::with_capacity(s_count * dim);
        for s in 0..s_count {
            let wa = w_a + amplitude * raw_delta[s];
            let wb = w_b - amplitude * raw_delta[s];
            let bg = background * (1.0 + raw_eta[s]);
            let start = samples.len();
            samples.resize(start + dim, round_f32(bg));
            let row = &mut samples[start..];
            let fa = &instance.candidates[a];
            let fb = b.map(|b| &instance.candidates[b]);
            for d in fa.ones() {
                let shared = fb.is_some_and(|f| f.get(d));
                row[d] = round_f32((bg + wa + if shared { wb } else { 0.0 }).min(1.0));
            }
            if let Some(fb) = fb {
                for d in fb.ones().filter(|&d| !fa.get(d)) {
                    row[d] = round_f32((bg + wb).min(1.0));
                }
            }
        }
        PredictionBundle::new(id.clone(), s_count, dim, samples, None).expect("probabilities in range")
    };

    let mut bundle = build(amplitude);
    let top_is_a = |bundle: &PredictionBundle| {
        aggregate_prediction(bundle, &instance, AggregationStrategy::ScoreMean, DEFAULT_TEMPERATURE)
            .map(|r| r.order[0] == a)
            .unwrap_or(false)
    };
    let mut tries = 0;
    while !top_is_a(&bundle) && amplitude > 0.0 {
        tries += 1;
        amplitude = if tries >= MEAN_CHECK_RETRIES { 0.0 } else { amplitude / 2.0 };
        bundle = build(amplitude);
    }

    if let Some(dh) = config.embedding_dim {
        let centre = embedding_centre(config, dh);
        bundle.embedding = Some(perturbed_embedding(&mut rng, &centre, 0.1 + noise * u));
    }

    let realized_error = aggregate_prediction(&bundle, &instance, AggregationStrategy::ScoreMean, DEFAULT_TEMPERATURE)
        .map(|r| r.order[0] != true_index)
        .unwrap_or(true);

    let mut meta = BTreeMap::new();
    meta.insert("latent".to_string(), serde_json::json!(u));
    meta.insert("error_prob".to_string(), serde_json::json!(p));
    let instance = instance.with_meta(meta);

    SynthSample {
        instance,
        bundle,
        truth: PlantedTruth {
            id,
            latent: u,
            error_prob: p,
            intended_error: z,
            realized_error,
        },
    }
}

/// Lazily generated instances `0..n_instances`.
pub fn generate_iter(config: &SynthConfig) -> Result<impl Iterator<Item = SynthSample> + '_> {
    config.validate()?;
    Ok((0..config.n_instances).map(move |i| generate_instance(config, i)))
}

/// Generates the whole dataset in memory.
pub fn generate(config: &SynthConfig) -> Result<(Vec<Instance>, Vec<PredictionBundle>, Vec<PlantedTruth>)> {
    let mut instances = Vec::with_capacity(config.n_instances);
    let mut bundles = Vec::with_capacity(config.n_instances);
    let mut truths = Vec::with_capacity(config.n_instances);
    for s in generate_iter(config)? {
        instances.push(s.instance);
        bundles.push(s.bundle);
        truths.push(s.truth);
    }
    Ok((instances, bundles, truths))
}
