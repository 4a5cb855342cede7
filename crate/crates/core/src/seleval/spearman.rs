use std::cmp::Ordering;

use crate::error::{Error, Result};

/// 1-based ranks with ties assigned their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start..end share the mean of ranks start+1..=end
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation; NaN when either input has zero variance.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::domain("spearman inputs differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::domain("spearman correlation needs at least 2 instances"));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Symmetric matrix of pairwise Spearman correlations between columns.
/// Entries involving a zero-variance column (including its diagonal) are NaN.
pub fn spearman_matrix(columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::domain("columns differ in length"));
    }
    if n < 2 {
        return Err(Error::domain("spearman correlation needs at least 2 instances"));
    }
    let ranks: Vec<Vec<f64>> = columns.iter().map(|c| average_ranks(c)).collect();
    let constant: Vec<bool> = ranks.iter().map(|r| r.iter().all(|&v| v == r[0])).collect();
    let p = columns.len();
    let mut m = vec![vec![f64::NAN; p]; p];
    for a in 0..p {
        if constant[a] {
            continue;
        }
        m[a][a] = 1.0;
        for b in 0..a {
            if constant[b] {
                continue;
            }
            let r = pearson(&ranks[a], &ranks[b]);
            m[a][b] = r;
            m[b][a] = r;
        }
    }
    Ok(m)
}
