//! Monte-Carlo check of the selective-risk guarantee on the planted model.

use super::generator::SynthConfig;
use crate::error::{Error, Result};
use crate::riskctl::sgr_select;
use crate::rng::CounterRng;

const TRIAL_STREAM: u64 = 0x7121_a15e;

/// Population selective risk of the planted model when accepting instances
/// with error probability at most `t` (equivalently ideal κ ≥ `1 - t`).
///
/// Error probabilities are 0 with the singleton mass `q1`, otherwise
/// `min(1, c·u)` with `u ~ U(0, 1)` and `c` the noise level.
pub fn planted_selective_risk(noise_level: f64, singleton_mass: f64, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let c = noise_level;
    let (p_accept, e_loss) = if c == 0.0 {
        (1.0, 0.0)
    } else if t < 1.0 {
        let frac = (t / c).min(1.0);
        (frac, c * frac * frac / 2.0)
    } else if c <= 1.0 {
        (1.0, c / 2.0)
    } else {
        (1.0, 1.0 - 1.0 / (2.0 * c))
    };
    let q1 = singleton_mass;
    let p_total = q1 + (1.0 - q1) * p_accept;
    if p_total == 0.0 {
        return 0.0;
    }
    (1.0 - q1) * e_loss / p_total
}

/// Summary of [`mc_validate_sgr`].
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub trials: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub infeasible: usize,
    pub mean_coverage: f64,
    pub max_true_risk: f64,
}

/// One calibration draw of `(ideal κ, loss)` pairs from the planted model.
pub fn planted_calibration_draw(config: &SynthConfig, rng: &mut CounterRng) -> (Vec<f64>, Vec<f64>) {
    let n = config.n_instances;
    let q1 = config.singleton_mass();
    let mut kappa = Vec::with_capacity(n);
    let mut losses = Vec::with_capacity(n);
    for _ in 0..n {
        let singleton = rng.bernoulli(q1);
        let u = rng.next_f64();
        let p = if singleton { 0.0 } else { (config.noise_level * u).min(1.0) };
        kappa.push(1.0 - p);
        losses.push(if rng.bernoulli(p) { 1.0 } else { 0.0 });
    }
    (kappa, losses)
}

/// Runs selection with guaranteed risk on `trials` fresh calibration sets of
/// `config.n_instances` planted draws scored by the ideal κ, and reports how
/// often the population selective risk at the chosen threshold exceeds
/// `target_risk`. Trials are spread over `threads` worker threads; the
/// result does not depend on the thread count.
pub fn mc_validate_sgr(
    config: &SynthConfig,
    target_risk: f64,
    delta: f64,
    trials: usize,
    threads: usize,
) -> Result<McReport> {
    config.validate()?;
    if trials == 0 {
        return Err(Error::domain("Monte-Carlo validation needs at least one trial"));
    }
    let root = CounterRng::new(config.seed).split(TRIAL_STREAM);
    let q1 = config.singleton_mass();
    let run = |t: usize| -> Result<(bool, f64, f64)> {
        let mut rng = root.split(t as u64);
        let (kappa, losses) = planted_calibration_draw(config, &mut rng);
        let r = sgr_select(&kappa, &losses, target_risk, delta)?;
        if !r.feasible {
            return Ok((false, 0.0, f64::NAN));
        }
        let risk = planted_selective_risk(config.noise_level, q1, 1.0 - r.tau_star);
        Ok((true, r.coverage_cal, risk))
    };

    let threads = threads.clamp(1, trials);
    let outcomes: Vec<Result<(bool, f64, f64)>> = if threads == 1 {
        (0..trials).map(run).collect()
    } else {
        let mut slots: Vec<Option<Result<(bool, f64, f64)>>> = (0..trials).map(|_| None).collect();
        let chunk = trials.div_ceil(threads);
        std::thread::scope(|scope| {
            for (c, part) in slots.chunks_mut(chunk).enumerate() {
                let run = &run;
                scope.spawn(move || {
                    for (o, slot) in part.iter_mut().enumerate() {
                        *slot = Some(run(c * chunk + o));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every trial ran")).collect()
    };

    let mut violations = 0;
    let mut infeasible = 0;
    let mut coverage = 0.0;
    let mut max_true_risk = 0.0f64;
    for o in outcomes {
        let (feasible, cov, risk) = o?;
        if !feasible {
            infeasible += 1;
            continue;
        }
        coverage += cov;
        max_true_risk = max_true_risk.max(risk);
        if risk > target_risk {
            violations += 1;
        }
    }
    Ok(McReport {
        trials,
        violations,
        violation_rate: violations as f64 / trials as f64,
        infeasible,
        mean_coverage: coverage / trials as f64,
        max_true_risk,
    })
}
