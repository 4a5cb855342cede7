use std::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub coverage: f64,
    pub risk: f64,
}

/// Empirical risk-coverage curve with its area and the oracle/random
/// reference areas.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskCoverageCurve {
    /// One point per accepted-prefix length `m = 1..n`, coverage `m / n`.
    pub points: Vec<CurvePoint>,
    pub aurc: f64,
    pub aurc_oracle: f64,
    pub aurc_random: f64,
    pub rel_aurc: f64,
    /// Set when the oracle and random areas coincide (all losses equal); the
    /// relative area is then reported as 0.
    pub degenerate: bool,
}

/// Mean loss over the accepted instances.
pub fn selective_risk(losses: &[f64], accepted: &[bool]) -> Result<f64> {
    if losses.len() != accepted.len() {
        return Err(Error::domain("losses and acceptance mask differ in length"));
    }
    let (sum, count) = losses
        .iter()
        .zip(accepted)
        .filter(|(_, &a)| a)
        .fold((0.0, 0usize), |(s, c), (l, _)| (s + l, c + 1));
    if count == 0 {
        return Err(Error::domain("selective risk at coverage 0 is undefined"));
    }
    Ok(sum / count as f64)
}

/// Fraction of instances with `κ ≥ τ`.
pub fn coverage_at_threshold(kappa: &[f64], tau: f64) -> f64 {
    if kappa.is_empty() {
        return 0.0;
    }
    kappa.iter().filter(|&&k| k >= tau).count() as f64 / kappa.len() as f64
}

/// Acceptance order: descending κ, ties by ascending index.
pub fn acceptance_order(kappa: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..kappa.len()).collect();
    order.sort_by(|&a, &b| kappa[b].partial_cmp(&kappa[a]).unwrap_or(Ordering::Equal));
    order
}

/// Best possible acceptance order: ascending loss, ties by ascending index.
pub fn oracle_order(losses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].partial_cmp(&losses[b]).unwrap_or(Ordering::Equal));
    order
}

/// Prefix-mean risks when instances are accepted in `order`.
pub fn curve_points(losses: &[f64], order: &[usize]) -> Vec<CurvePoint> {
    let n = order.len() as f64;
    let mut sum = 0.0;
    order
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            sum += losses[j];
            let m = (i + 1) as f64;
            CurvePoint {
                coverage: m / n,
                risk: sum / m,
            }
        })
        .collect()
}

/// Trapezoidal area under the curve. The risk on `[0, 1/n]` is held at the
/// first point's value, so a constant curve integrates to that constant.
pub fn area(points: &[CurvePoint]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let head = first.coverage * first.risk;
    head + points
        .windows(2)
        .map(|w| (w[1].coverage - w[0].coverage) * (w[0].risk + w[1].risk) / 2.0)
        .sum::<f64>()
}

pub fn aurc_for_order(losses: &[f64], order: &[usize]) -> f64 {
    area(&curve_points(losses, order))
}

/// `(AURC - oracle) / (random - oracle)`, or `(0, true)` when the
/// denominator vanishes.
pub fn relative_aurc(aurc: f64, oracle: f64, random: f64) -> (f64, bool) {
    let denom = random - oracle;
    if denom <= 1e-12 * random.abs().max(1.0) {
        (0.0, true)
    } else {
        ((aurc - oracle) / denom, false)
    }
}

pub fn risk_coverage_curve(losses: &[f64], kappa: &[f64]) -> Result<RiskCoverageCurve> {
    if losses.len() != kappa.len() {
        return Err(Error::domain(format!(
            "{} losses but {} score values",
            losses.len(),
            kappa.len()
        )));
    }
    if losses.is_empty() {
        return Err(Error::domain("risk-coverage curve of an empty set"));
    }
    let points = curve_points(losses, &acceptance_order(kappa));
    let aurc = area(&points);
    let aurc_oracle = aurc_for_order(losses, &oracle_order(losses));
    let aurc_random = losses.iter().sum::<f64>() / losses.len() as f64;
    let (rel_aurc, degenerate) = relative_aurc(aurc, aurc_oracle, aurc_random);
    Ok(RiskCoverageCurve {
        points,
        aurc,
        aurc_oracle,
        aurc_random,
        rel_aurc,
        degenerate,
    })
}
