//! Exact expectations of binomial functionals used by the finite-sample
//! variance formulas. All sums run in log space with log-gamma binomial
//! coefficients, so nothing overflows up to n ~ 10^6.

use crate::math;

use super::TheoryError;

/// ln C(n, k) via log-gamma.
#[inline]
pub(crate) fn ln_choose(n: u64, k: u64) -> f64 {
    math::ln_gamma(n as f64 + 1.0) - math::ln_gamma(k as f64 + 1.0) - math::ln_gamma((n - k) as f64 + 1.0)
}

/// ln P(Z = k) for Z ~ Binomial(n, p), 0 < p < 1.
#[inline]
pub(crate) fn ln_binom_pmf(n: u64, k: u64, p: f64) -> f64 {
    ln_choose(n, k) + k as f64 * math::ln(p) + (n - k) as f64 * math::ln_1p(-p)
}

fn check_p(p: f64) -> Result<(), TheoryError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(TheoryError::ParameterOutOfRange("p must lie in (0, 1)"));
    }
    Ok(())
}

/// E[1{Z > 0} / Z] for Z ~ Binomial(n, p): Σ_{k=1}^n (1/k) C(n,k) p^k (1-p)^{n-k}.
pub fn e_recip_trunc_binomial(n: u64, p: f64) -> Result<f64, TheoryError> {
    if n < 1 {
        return Err(TheoryError::ParameterOutOfRange("n must be >= 1"));
    }
    check_p(p)?;
    let mut sum = 0.0;
    // ascending k: terms for small k are the smallest when np is large
    for k in 1..=n {
        sum += math::exp(ln_binom_pmf(n, k, p) - math::ln(k as f64));
    }
    Ok(sum)
}

/// E[1 / (1 + B)] for B ~ Binomial(n, p), in closed form:
/// (1 − (1−p)^{n+1}) / ((n+1) p).
pub fn e_recip_one_plus_binomial(n: u64, p: f64) -> Result<f64, TheoryError> {
    check_p(p)?;
    Ok((1.0 - math::powi(1.0 - p, n + 1)) / ((n as f64 + 1.0) * p))
}

/// Chernoff-derived upper bound on E[1{π̂ > 0}/π̂] for π̂ the treated
/// fraction of n Bernoulli(π) draws: (1 + C_{α,π} n^{−α}) / π with
/// C_{α,π} = 1 + 2 (16 / (π² (1 − 2α)))^{2/(1−2α)}.
pub fn pihat_inverse_bound(n: u64, pi: f64, alpha: f64) -> Result<f64, TheoryError> {
    if n < 1 {
        return Err(TheoryError::ParameterOutOfRange("n must be >= 1"));
    }
    check_p(pi)?;
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(TheoryError::ParameterOutOfRange("alpha must lie in (0, 1/2)"));
    }
    let c = 1.0 + 2.0 * math::powf(16.0 / (pi * pi * (1.0 - 2.0 * alpha)), 2.0 / (1.0 - 2.0 * alpha));
    Ok((1.0 + c * math::powf(n as f64, -alpha)) / pi)
}
