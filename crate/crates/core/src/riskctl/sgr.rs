use std::cmp::Ordering;

use super::binomial::clopper_pearson_upper;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// One threshold examined by the binary search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgrProbe {
    /// 1-based position in the ascending κ order.
    pub z: usize,
    pub tau: f64,
    pub accepted: usize,
    pub errors: usize,
    pub bound: f64,
    pub feasible: bool,
}

/// Outcome of selection with guaranteed risk.
#[derive(Debug, Clone, PartialEq)]
pub struct SgrResult {
    /// Accept instances with `κ ≥ tau_star`. `+∞` when infeasible, `-∞` when
    /// the whole calibration set is accepted.
    pub tau_star: f64,
    pub bound_b_star: f64,
    pub target_risk: f64,
    pub delta: f64,
    pub coverage_cal: f64,
    /// NaN when infeasible.
    pub empirical_risk_cal: f64,
    /// Probe budget `k`; the per-probe level is `delta / k`.
    pub iterations: usize,
    pub feasible: bool,
    pub probes: Vec<SgrProbe>,
}

impl SgrResult {
    pub fn accepts(&self, kappa: f64) -> bool {
        self.feasible && kappa >= self.tau_star
    }

    pub fn delta_prime(&self) -> f64 {
        self.delta / self.iterations as f64
    }
}

/// Probe budget `ceil(log2 n)`, at least 1.
pub fn probe_budget(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Calibration data sorted by ascending κ, with suffix error counts so the
/// errors among `κ ≥ τ` are available in O(log n).
struct SortedCalibration {
    kappa: Vec<f64>,
    suffix_errors: Vec<usize>,
}

impl SortedCalibration {
    fn new(kappa: &[f64], losses: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..kappa.len()).collect();
        idx.sort_by(|&a, &b| kappa[a].partial_cmp(&kappa[b]).unwrap_or(Ordering::Equal));
        let n = idx.len();
        let mut suffix_errors = vec![0usize; n + 1];
        for i in (0..n).rev() {
            suffix_errors[i] = suffix_errors[i + 1] + usize::from(losses[idx[i]] == 1.0);
        }
        Self {
            kappa: idx.iter().map(|&i| kappa[i]).collect(),
            suffix_errors,
        }
    }

    /// `(accepted, errors)` for the rule `κ ≥ tau`.
    fn accepted(&self, tau: f64) -> (usize, usize) {
        let first = self.kappa.partition_point(|&k| k < tau);
        (self.kappa.len() - first, self.suffix_errors[first])
    }
}

fn validate(kappa: &[f64], losses: &[f64], target_risk: f64, delta: f64) -> Result<()> {
    if kappa.len() != losses.len() {
        return Err(Error::domain("kappa and losses differ in length"));
    }
    if kappa.is_empty() {
        return Err(Error::domain("empty calibration set"));
    }
    if let Some(l) = losses.iter().find(|&&l| l != 0.0 && l != 1.0) {
        return Err(Error::domain(format!(
            "selection with guaranteed risk needs 0/1 losses, found {l}"
        )));
    }
    if kappa.iter().any(|k| k.is_nan()) {
        return Err(Error::domain("score values contain NaN"));
    }
    if !(target_risk > 0.0) || target_risk.is_infinite() {
        return Err(Error::domain(format!("target risk {target_risk} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("δ={delta} is not in (0, 1)")));
    }
    Ok(())
}

/// Selection with guaranteed risk.
///
/// Binary search over positions `z` of the ascending κ order with a budget of
/// `k = ceil(log2 n)` probes. Each probe sets `τ = κ_(z)`, accepts `κ ≥ τ`
/// (ties included) and bounds the accepted error rate by Clopper-Pearson at
/// level `δ / k`. A feasible probe (`b* < r*`) moves the search towards lower
/// `z`, i.e. more coverage. The result is the feasible probe of highest
/// coverage; among the examined thresholds only, as the search visits
/// `O(log n)` of them.
pub fn sgr_select(kappa: &[f64], losses: &[f64], target_risk: f64, delta: f64) -> Result<SgrResult> {
    validate(kappa, losses, target_risk, delta)?;
    let n = kappa.len();
    let cal = SortedCalibration::new(kappa, losses);
    let budget = probe_budget(n);
    let delta_prime = delta / budget as f64;

    let mut probes = Vec::with_capacity(budget);
    let mut best: Option<SgrProbe> = None;
    let (mut lo, mut hi) = (1usize, n);
    while probes.len() < budget && lo <= hi {
        let z = (lo + hi) / 2;
        let tau = cal.kappa[z - 1];
        let (accepted, errors) = cal.accepted(tau);
        let bound = if accepted == 0 {
            1.0
        } else {
            clopper_pearson_upper(errors as u64, accepted as u64, delta_prime)?
        };
        let probe = SgrProbe {
            z,
            tau,
            accepted,
            errors,
            bound,
            feasible: bound < target_risk,
        };
        probes.push(probe);
        if probe.feasible {
            if best.map_or(true, |b| probe.accepted >= b.accepted) {
                best = Some(probe);
            }
            hi = z - 1;
        } else {
            lo = z + 1;
        }
    }

    Ok(match best {
        Some(b) => SgrResult {
            // Nothing in the calibration set is rejected, so nothing is
            // rejected anywhere.
            tau_star: if b.accepted == n { f64::NEG_INFINITY } else { b.tau },
            bound_b_star: b.bound,
            target_risk,
            delta,
            coverage_cal: b.accepted as f64 / n as f64,
            empirical_risk_cal: b.errors as f64 / b.accepted as f64,
            iterations: budget,
            feasible: true,
            probes,
        },
        None => SgrResult {
            tau_star: f64::INFINITY,
            bound_b_star: 1.0,
            target_risk,
            delta,
            coverage_cal: 0.0,
            empirical_risk_cal: f64::NAN,
            iterations: budget,
            feasible: false,
            probes,
        },
    })
}

/// Deterministic random partition of `0..n` into a calibration part of
/// `ceil(n/2)` and an evaluation part of `floor(n/2)` indices, each ascending.
pub fn split_indices(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::domain("calibration split needs at least 2 instances"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    CounterRng::new(seed).split(0x5eed_ca1b).shuffle(&mut idx);
    let (cal, eval) = idx.split_at(n - n / 2);
    let (mut cal, mut eval) = (cal.to_vec(), eval.to_vec());
    cal.sort_unstable();
    eval.sort_unstable();
    Ok((cal, eval))
}

/// 50/50 calibration/evaluation split of `ids`.
pub fn calibration_split<T: Clone>(ids: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (cal, eval) = split_indices(ids.len(), seed)?;
    Ok((
        cal.into_iter().map(|i| ids[i].clone()).collect(),
        eval.into_iter().map(|i| ids[i].clone()).collect(),
    ))
}
