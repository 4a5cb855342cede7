//! Distance-based scores in the model's representation space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Diagonal regularizer added to the training covariance.
pub const DEFAULT_COVARIANCE_EPSILON: f64 = 1e-6;

/// Default neighbourhood size for the kNN score.
pub const DEFAULT_KNN_K: usize = 100;

/// Immutable index over ℓ2-normalized training embeddings, with the mean and
/// the Cholesky factor of the regularized covariance.
#[derive(Debug, Clone)]
pub struct TrainEmbeddingIndex {
    dim: usize,
    rows: Vec<f64>,
    mean: Vec<f64>,
    /// Lower-triangular factor of `Σ + εI`, row-major.
    chol: Vec<f64>,
}

impl TrainEmbeddingIndex {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        Self::with_epsilon(rows, DEFAULT_COVARIANCE_EPSILON)
    }

    pub fn with_epsilon(rows: &[Vec<f64>], epsilon: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::domain("empty training embedding set"));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::domain("zero-dimensional embeddings"));
        }
        let mut flat = Vec::with_capacity(n * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::domain(format!(
                    "training embedding {i} has length {}, expected {dim}",
                    r.len()
                )));
            }
            let unit = normalize(r)
                .ok_or_else(|| Error::domain(format!("training embedding {i} has zero or non-finite norm")))?;
            flat.extend(unit);
        }

        let mut mean = vec![0.0; dim];
        for row in flat.chunks_exact(dim) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        // accumulate the scatter matrix chunk by chunk through gemm
        const CHUNK: usize = 2048;
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for chunk in flat.chunks(CHUNK * dim) {
            let rows_in_chunk = chunk.len() / dim;
            let centered = DMatrix::from_fn(rows_in_chunk, dim, |r, c| chunk[r * dim + c] - mean[c]);
            cov.gemm_tr(1.0, &centered, &centered, 1.0);
        }
        cov /= n as f64;
        for a in 0..dim {
            cov[(a, a)] += epsilon;
        }
        let factor = cov.cholesky().ok_or_else(|| {
            Error::Numeric(format!(
                "covariance of {n} training embeddings (d_h={dim}) is not positive definite after adding {epsilon:e} to the diagonal"
            ))
        })?;
        let l = factor.l();
        let chol = (0..dim).flat_map(|a| (0..dim).map(move |b| (a, b))).map(|(a, b)| l[(a, b)]).collect();

        Ok(Self {
            dim,
            rows: flat,
            mean,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn check_query(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::domain(format!(
                "query embedding has length {}, index has d_h={}",
                query.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Scales `v` to unit ℓ2 norm; `None` for zero or non-finite norms.
pub fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|x| x / norm).collect())
}

/// Negated mean Euclidean distance to the `k` nearest training embeddings
/// (exact search). The query is expected to be unit-normalized already.
pub fn knn_score(query: &[f64], index: &TrainEmbeddingIndex, k: usize) -> Result<f64> {
    index.check_query(query)?;
    let n = index.len();
    if k == 0 || k > n {
        return Err(Error::domain(format!("kNN needs 1 <= k <= N, got k={k}, N={n}")));
    }
    let mut dist: Vec<f64> = index
        .rows
        .chunks_exact(index.dim)
        .map(|row| row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect();
    if k < n {
        dist.select_nth_unstable_by(k - 1, f64::total_cmp);
    }
    let mut nearest = dist[..k].to_vec();
    nearest.sort_by(f64::total_cmp);
    Ok(-nearest.iter().sum::<f64>() / k as f64)
}

/// Negated Mahalanobis distance to the training mean under the regularized
/// training covariance.
pub fn mahalanobis_score(query: &[f64], index: &TrainEmbeddingIndex) -> Result<f64> {
    index.check_query(query)?;
    let d = index.dim;
    // forward substitution L y = h - μ; the squared distance is |y|^2
    let mut y = vec![0.0; d];
    for a in 0..d {
        let row = &index.chol[a * d..a * d + a + 1];
        let acc: f64 = row[..a].iter().zip(&y[..a]).map(|(l, v)| l * v).sum();
        y[a] = (query[a] - index.mean[a] - acc) / row[a];
    }
    let sq: f64 = y.iter().map(|v| v * v).sum();
    if !sq.is_finite() {
        return Err(Error::Numeric("non-finite Mahalanobis distance".into()));
    }
    Ok(-sq.sqrt())
}
