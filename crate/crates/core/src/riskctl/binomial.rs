use crate::error::{Error, Result};

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln P(X ≤ k)` for `X ~ Binomial(n, b)`.
///
/// Terms follow `ln pmf(j+1) = ln pmf(j) + ln((n-j)/(j+1)) + ln b - ln(1-b)`
/// from `ln pmf(0) = n ln(1-b)`, summed with a max shift.
pub fn ln_binomial_cdf(k: u64, n: u64, b: f64) -> f64 {
    if k >= n || b <= 0.0 {
        return 0.0;
    }
    if b >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let ln_odds = b.ln() - (-b).ln_1p();
    let mut terms = Vec::with_capacity(k as usize + 1);
    let mut t = n as f64 * (-b).ln_1p();
    terms.push(t);
    for j in 0..k {
        t += ((n - j) as f64 / (j + 1) as f64).ln() + ln_odds;
        terms.push(t);
    }
    log_sum_exp(&terms).min(0.0)
}

pub fn binomial_cdf(k: u64, n: u64, b: f64) -> f64 {
    ln_binomial_cdf(k, n, b).exp()
}

/// Exact (Clopper-Pearson) upper confidence bound on a Bernoulli rate after
/// `k` errors in `n` trials: the `b` with `P(Binomial(n, b) ≤ k) = δ′`.
///
/// Bisection runs until the bracket cannot be split further, and the upper
/// end is returned so the bound is never optimistic. `k = n` gives 1.
pub fn clopper_pearson_upper(k: u64, n: u64, delta_prime: f64) -> Result<f64> {
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(Error::domain(format!("confidence level δ′={delta_prime} is not in (0, 1)")));
    }
    if n == 0 {
        return Err(Error::domain("Clopper-Pearson bound needs n >= 1"));
    }
    if k > n {
        return Err(Error::domain(format!("{k} errors out of {n} trials")));
    }
    if k == n {
        return Ok(1.0);
    }
    let target = delta_prime.ln();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..1100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_binomial_cdf(k, n, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
