//! Exact finite-sample biases and variances of the IPSW variants, their
//! printed upper bounds, and the asymptotic variance per sample-size regime.
//!
//! All expectations over stratum counts Z_n(x) are evaluated exactly. Sums
//! of a^{Z_n(x)} use the binomial generating identity
//! E[a^{Z_n(x)}] = (1 − p_R(x)(1 − a))^n, cross-stratum moments use the
//! multinomial identity
//! E[a^{Z_n(x)} b^{Z_n(y)}] = (a p_R(x) + b p_R(y) + 1 − p_R(x) − p_R(y))^n,
//! and reciprocal moments go through [`e_recip_trunc_binomial`]. The
//! brute-force enumeration suite pins each of these identities before use.

use alloc::vec::Vec;

use crate::domain::{DgpSpec, StratumId};
use crate::estimators::EstimatorTag;
use crate::math;

use super::binomial::e_recip_trunc_binomial;
#[cfg(test)]
use super::binomial::ln_binom_pmf;
use super::{AsymptoticRegime, TargetSize, TheoryError, TheoryReport};

/// E[1{Z > 0}/Z] for Z ~ Binomial(n, p), extended to the degenerate masses:
/// p = 1 pins Z to n, p = 0 pins Z to 0.
fn e_recip_trunc(n: u64, p: f64) -> Result<f64, TheoryError> {
    if p >= 1.0 {
        Ok(1.0 / n as f64)
    } else if p == 0.0 {
        Ok(0.0)
    } else {
        e_recip_trunc_binomial(n, p)
    }
}

/// Per-stratum variance kernel of the Horvitz-Thompson transform:
/// E[(Y(1))²/π | x] + E[(Y(0))²/(1−π) | x] − τ(x)².
pub fn v_ht_stratum(spec: &DgpSpec, x: StratumId) -> f64 {
    let o = spec.outcome(x);
    let pi = spec.pi()[x.index()];
    let tau = o.cate();
    (o.mean1 * o.mean1 + o.var1) / pi + (o.mean0 * o.mean0 + o.var0) / (1.0 - pi) - tau * tau
}

/// Large-sample per-stratum variance kernel of the difference-in-means:
/// Var[Y(1)|x]/π + Var[Y(0)|x]/(1−π).
pub fn v_dm_stratum_infty(spec: &DgpSpec, x: StratumId) -> f64 {
    let o = spec.outcome(x);
    let pi = spec.pi()[x.index()];
    o.var1 / pi + o.var0 / (1.0 - pi)
}

/// The finite-sample indicator-variance remainder of the difference-in-means
/// on k units: D_k = m1²(1−π)^k + m0²π^k − (m1(1−π)^k − m0 π^k)².
///
/// Equivalently Var[1{n1>0}] m1² + Var[1{n0>0}] m0² + 2 m1 m0 π^k (1−π)^k;
/// the empty-arm indicators are negatively associated, so the cross term
/// adds.
fn dm_indicator_remainder(mean0: f64, mean1: f64, pi: f64, k: u64) -> f64 {
    let u = math::powi(1.0 - pi, k);
    let v = math::powi(pi, k);
    let cross = mean1 * u - mean0 * v;
    mean1 * mean1 * u + mean0 * mean0 * v - cross * cross
}

/// Exact variance of the difference-in-means on k Bernoulli(π)-assigned
/// units of stratum x (not k-scaled).
fn var_dm_finite_raw(spec: &DgpSpec, x: StratumId, k: u64) -> Result<f64, TheoryError> {
    let o = spec.outcome(x);
    let pi = spec.pi()[x.index()];
    Ok(e_recip_trunc(k, pi)? * o.var1
        + e_recip_trunc(k, 1.0 - pi)? * o.var0
        + dm_indicator_remainder(o.mean0, o.mean1, pi, k))
}

/// k-scaled exact difference-in-means variance on stratum x:
/// V_DM,k(x) = k · Var[τ̂_DM,k | X = x].
pub fn v_dm_stratum_finite(spec: &DgpSpec, x: StratumId, k: u64) -> Result<f64, TheoryError> {
    if k < 1 {
        return Err(TheoryError::ParameterOutOfRange("k must be >= 1"));
    }
    Ok(k as f64 * var_dm_finite_raw(spec, x, k)?)
}

/// Asymptotic variance constant of the completely oracle IPSW:
/// V_o = Var_R[(p_T/p_R)(X) τ(X)] + E_R[((p_T/p_R)(X))² V_HT(X)].
pub fn v_o(spec: &DgpSpec) -> f64 {
    let k = spec.support_size();
    let mut mean = 0.0;
    let mut mean_sq = 0.0;
    for i in 0..k {
        let wtau = spec.probability_ratio(StratumId(i as u32)) * spec.outcomes()[i].cate();
        mean += spec.p_r()[i] * wtau;
        mean_sq += spec.p_r()[i] * wtau * wtau;
    }
    mean_sq - mean * mean + v_so(spec)
}

/// Asymptotic variance constant of the semi-oracle IPSW:
/// V_so = Σ_x (p_T(x)²/p_R(x)) V_HT(x).
pub fn v_so(spec: &DgpSpec) -> f64 {
    let terms: Vec<f64> = (0..spec.support_size())
        .map(|i| {
            let p_t = spec.p_t()[i];
            p_t * p_t / spec.p_r()[i] * v_ht_stratum(spec, StratumId(i as u32))
        })
        .collect();
    math::pairwise_sum(&terms)
}

/// Asymptotic variance constant when π is also estimated per stratum:
/// Ṽ_so,∞ = Σ_x (p_T(x)²/p_R(x)) V_DM,∞(x).
pub fn v_so_tilde_infty(spec: &DgpSpec) -> f64 {
    let terms: Vec<f64> = (0..spec.support_size())
        .map(|i| {
            let p_t = spec.p_t()[i];
            p_t * p_t / spec.p_r()[i] * v_dm_stratum_infty(spec, StratumId(i as u32))
        })
        .collect();
    math::pairwise_sum(&terms)
}

/// Finite-n Ṽ_so: Σ_x (p_T(x)²/p_R(x)) V_DM,n(x), the kernel the printed
/// π̂-variant bounds use.
fn v_so_tilde_finite(spec: &DgpSpec, n: u64) -> Result<f64, TheoryError> {
    let mut sum = 0.0;
    for i in 0..spec.support_size() {
        let p_t = spec.p_t()[i];
        sum += p_t * p_t / spec.p_r()[i] * v_dm_stratum_finite(spec, StratumId(i as u32), n)?;
    }
    Ok(sum)
}

/// Exact bias of the semi-oracle IPSW (shared by the estimated IPSW):
/// E[τ̂] − τ = −Σ_x p_T(x) (1 − p_R(x))^n τ(x).
pub fn bias_semi_oracle(spec: &DgpSpec, n: u64) -> f64 {
    let terms: Vec<f64> = (0..spec.support_size())
        .map(|i| -spec.p_t()[i] * math::powi(1.0 - spec.p_r()[i], n) * spec.outcomes()[i].cate())
        .collect();
    math::pairwise_sum(&terms)
}

/// Exact bias of the IPSW with per-stratum estimated π̂:
/// Σ_x p_T(x) E[Y(0)|x] (1 − p_R(x)(1−π(x)))^n − Σ_x p_T(x) E[Y(1)|x] (1 − p_R(x)π(x))^n.
pub fn bias_pihat(spec: &DgpSpec, n: u64) -> f64 {
    let terms: Vec<f64> = (0..spec.support_size())
        .map(|i| {
            let o = &spec.outcomes()[i];
            let p_r = spec.p_r()[i];
            let pi = spec.pi()[i];
            spec.p_t()[i]
                * (o.mean0 * math::powi(1.0 - p_r * (1.0 - pi), n) - o.mean1 * math::powi(1.0 - p_r * pi, n))
        })
        .collect();
    math::pairwise_sum(&terms)
}

/// E[a^{Z_n(x)}] for Z_n(x) ~ Binomial(n, p): (1 − p(1 − a))^n.
#[inline]
fn gen_moment(p: f64, a: f64, n: u64) -> f64 {
    math::powi(1.0 - p * (1.0 - a), n)
}

/// E[a^{Z_n(x)} b^{Z_n(y)}] for distinct strata of one multinomial draw:
/// (a p_x + b p_y + 1 − p_x − p_y)^n.
#[inline]
fn gen_moment_cross(p_x: f64, a: f64, p_y: f64, b: f64, n: u64) -> f64 {
    math::powi(a * p_x + b * p_y + 1.0 - p_x - p_y, n)
}

/// Var[E_T[τ(X) 1{Z_n(X)=0} | X_n]] = Σ_{x,y} p_T p_T' τ τ' Cov(1{Z_x=0}, 1{Z_y=0}),
/// with P(Z_x = 0, Z_y = 0) = (1 − p_x − p_y)^n off the diagonal.
fn var_empty_mass(spec: &DgpSpec, n: u64) -> f64 {
    let k = spec.support_size();
    let p_r = spec.p_r();
    let coeff: Vec<f64> = (0..k).map(|i| spec.p_t()[i] * spec.outcomes()[i].cate()).collect();
    let p0: Vec<f64> = (0..k).map(|i| math::powi(1.0 - p_r[i], n)).collect();
    let mut sum = 0.0;
    for x in 0..k {
        for y in 0..k {
            let joint =
                if x == y { p0[x] } else { math::powi(1.0 - p_r[x] - p_r[y], n) };
            sum += coeff[x] * coeff[y] * (joint - p0[x] * p0[y]);
        }
    }
    sum
}

/// Exact finite-sample variance of the semi-oracle IPSW:
/// Var[τ̂*] = Σ_x p_T(x)² V_HT(x) E[1{Z>0}/Z] + Var[E_T[τ(X) 1{Z_n(X)=0} | X_n]].
pub fn var_semi_oracle_exact(spec: &DgpSpec, n: u64) -> Result<f64, TheoryError> {
    let mut sum = 0.0;
    for i in 0..spec.support_size() {
        let p_t = spec.p_t()[i];
        sum += p_t * p_t
            * v_ht_stratum(spec, StratumId(i as u32))
            * e_recip_trunc(n, spec.p_r()[i])?;
    }
    Ok(sum + var_empty_mass(spec, n))
}

/// Var_T[τ(X) 1{Z_n(X) ≠ 0}] over the joint law of X ~ p_T and the trial
/// counts.
fn var_tau_covered(spec: &DgpSpec, n: u64) -> f64 {
    let k = spec.support_size();
    let mut first = 0.0;
    let mut second = 0.0;
    for i in 0..k {
        let tau = spec.outcomes()[i].cate();
        let covered = 1.0 - math::powi(1.0 - spec.p_r()[i], n);
        first += spec.p_t()[i] * tau * tau * covered;
        second += spec.p_t()[i] * tau * covered;
    }
    first - second * second
}

/// Exact finite-sample variance of the estimated IPSW (both probabilities
/// counted, oracle π).
pub fn var_estimated_exact(spec: &DgpSpec, n: u64, m: u64) -> Result<f64, TheoryError> {
    if m < 1 {
        return Err(TheoryError::ParameterOutOfRange("m must be >= 1"));
    }
    let m_f = m as f64;
    let mut coupling = 0.0;
    for i in 0..spec.support_size() {
        let p_t = spec.p_t()[i];
        coupling += v_ht_stratum(spec, StratumId(i as u32))
            * p_t
            * (1.0 - p_t)
            * e_recip_trunc(n, spec.p_r()[i])?;
    }
    Ok(var_semi_oracle_exact(spec, n)?
        + (var_tau_covered(spec, n) - var_empty_mass(spec, n)) / m_f
        + coupling / m_f)
}

/// E[1{Z_n(x) > 0} · Var[DM on Z_n(x) units]] on stratum x, jointly over the
/// stratum count and the treated count.
///
/// The reciprocal pieces collapse by binomial thinning — the treated count
/// within the stratum is Binomial(n, p_R(x) π(x)) marginally — and the
/// indicator remainder collapses through the generating identity, so the
/// double sum is evaluated exactly in O(n).
fn e_var_dm_over_count(spec: &DgpSpec, x: StratumId, n: u64) -> Result<f64, TheoryError> {
    let o = spec.outcome(x);
    let p_r = spec.p_r()[x.index()];
    let pi = spec.pi()[x.index()];
    let u = 1.0 - pi;
    let recip_parts =
        o.var1 * e_recip_trunc(n, p_r * pi)? + o.var0 * e_recip_trunc(n, p_r * u)?;
    // Σ_{k≥1} P(Z=k) D_k = E[D_Z] − P(Z=0) D_0, with D_0 = 2 m1 m0.
    let e_d = o.mean1 * o.mean1 * gen_moment(p_r, u, n) + o.mean0 * o.mean0 * gen_moment(p_r, pi, n)
        - o.mean1 * o.mean1 * gen_moment(p_r, u * u, n)
        + 2.0 * o.mean1 * o.mean0 * gen_moment(p_r, u * pi, n)
        - o.mean0 * o.mean0 * gen_moment(p_r, pi * pi, n);
    let d_part = e_d - 2.0 * o.mean1 * o.mean0 * math::powi(1.0 - p_r, n);
    Ok(recip_parts + d_part)
}

/// Cross-check form of [`e_var_dm_over_count`]: the explicit double sum
/// over (Z_n(x), treated count).
#[cfg(test)]
fn e_var_dm_over_count_double_sum(spec: &DgpSpec, x: StratumId, n: u64) -> Result<f64, TheoryError> {
    let p_r = spec.p_r()[x.index()];
    let mut sum = 0.0;
    for k in 1..=n {
        sum += math::exp(ln_binom_pmf(n, k, p_r)) * var_dm_finite_raw(spec, x, k)?;
    }
    Ok(sum)
}

/// Moments of C_n(x) = E[Y(1)|x] (1−π(x))^{Z_n(x)} − E[Y(0)|x] π(x)^{Z_n(x)}.
/// Returns (E[C_n(x)], E over the marginal Binomial law of Z_n(x)).
fn c_n_mean(spec: &DgpSpec, i: usize, n: u64) -> f64 {
    let o = &spec.outcomes()[i];
    let p_r = spec.p_r()[i];
    let pi = spec.pi()[i];
    o.mean1 * gen_moment(p_r, 1.0 - pi, n) - o.mean0 * gen_moment(p_r, pi, n)
}

/// Var[τ(X) − C_n(X)] over the joint law of X ~ p_T and the trial counts.
fn var_tau_minus_c(spec: &DgpSpec, n: u64) -> f64 {
    let k = spec.support_size();
    let mut mean = 0.0;
    let mut mean_sq = 0.0;
    for i in 0..k {
        let o = &spec.outcomes()[i];
        let p_r = spec.p_r()[i];
        let pi = spec.pi()[i];
        let u = 1.0 - pi;
        let tau = o.cate();
        mean += spec.p_t()[i] * (tau - c_n_mean(spec, i, n));
        // E[(τ − m1 u^Z + m0 π^Z)²] termwise through the generating identity
        let sq = tau * tau - 2.0 * tau * o.mean1 * gen_moment(p_r, u, n)
            + 2.0 * tau * o.mean0 * gen_moment(p_r, pi, n)
            + o.mean1 * o.mean1 * gen_moment(p_r, u * u, n)
            - 2.0 * o.mean1 * o.mean0 * gen_moment(p_r, u * pi, n)
            + o.mean0 * o.mean0 * gen_moment(p_r, pi * pi, n);
        mean_sq += spec.p_t()[i] * sq;
    }
    mean_sq - mean * mean
}

/// Var[E[C_n(X) | X_n]] = Var[Σ_x p_T(x) C_n(x)] over the multinomial trial
/// counts; cross-stratum terms use the multinomial generating identity.
fn var_c_mass(spec: &DgpSpec, n: u64) -> f64 {
    let k = spec.support_size();
    let p_r = spec.p_r();
    let mut mean = 0.0;
    for i in 0..k {
        mean += spec.p_t()[i] * c_n_mean(spec, i, n);
    }
    let mut mean_sq = 0.0;
    for x in 0..k {
        let ox = &spec.outcomes()[x];
        let (ux, vx) = (1.0 - spec.pi()[x], spec.pi()[x]);
        for y in 0..k {
            let oy = &spec.outcomes()[y];
            let (uy, vy) = (1.0 - spec.pi()[y], spec.pi()[y]);
            let moment = |a: f64, b: f64| -> f64 {
                if x == y {
                    gen_moment(p_r[x], a * b, n)
                } else {
                    gen_moment_cross(p_r[x], a, p_r[y], b, n)
                }
            };
            let e_prod = ox.mean1 * oy.mean1 * moment(ux, uy) - ox.mean1 * oy.mean0 * moment(ux, vy)
                - ox.mean0 * oy.mean1 * moment(vx, uy)
                + ox.mean0 * oy.mean0 * moment(vx, vy);
            mean_sq += spec.p_t()[x] * spec.p_t()[y] * e_prod;
        }
    }
    mean_sq - mean * mean
}

/// Exact finite-sample variance of the completely estimated IPSW with
/// per-stratum estimated π̂.
pub fn var_pihat_exact(spec: &DgpSpec, n: u64, m: u64) -> Result<f64, TheoryError> {
    if m < 1 {
        return Err(TheoryError::ParameterOutOfRange("m must be >= 1"));
    }
    let m_f = m as f64;
    let mut dm_part = 0.0;
    for i in 0..spec.support_size() {
        let p_t = spec.p_t()[i];
        dm_part += (p_t * (1.0 - p_t) / m_f + p_t * p_t)
            * e_var_dm_over_count(spec, StratumId(i as u32), n)?;
    }
    Ok(var_tau_minus_c(spec, n) / m_f + (1.0 - 1.0 / m_f) * var_c_mass(spec, n) + dm_part)
}

/// Exact finite-sample variance of the semi-oracle IPSW with per-stratum
/// estimated π̂ (the m → ∞ limit of [`var_pihat_exact`]).
pub fn var_semi_pihat_exact(spec: &DgpSpec, n: u64) -> Result<f64, TheoryError> {
    let mut dm_part = 0.0;
    for i in 0..spec.support_size() {
        let p_t = spec.p_t()[i];
        dm_part += p_t * p_t * e_var_dm_over_count(spec, StratumId(i as u32), n)?;
    }
    Ok(var_c_mass(spec, n) + dm_part)
}

/// min(n,m)-scaled asymptotic variance of the estimated IPSW:
/// min(1, λ)(Var_T[τ(X)]/λ + V), with V = V_so, or Ṽ_so,∞ when π is also
/// estimated. λ = ∞ gives V; λ = 0 gives Var_T[τ(X)].
pub fn asymptotic_variance(spec: &DgpSpec, regime: AsymptoticRegime, pihat: bool) -> f64 {
    let v = if pihat { v_so_tilde_infty(spec) } else { v_so(spec) };
    let var_tau = spec.cate_variance_target();
    match regime {
        AsymptoticRegime::Zero => var_tau,
        AsymptoticRegime::Infinite => v,
        AsymptoticRegime::Ratio(lambda) => {
            let min = if lambda < 1.0 { lambda } else { 1.0 };
            min * (var_tau / lambda + v)
        }
    }
}

/// E_T[τ(X)²].
fn e_t_tau_sq(spec: &DgpSpec) -> f64 {
    (0..spec.support_size())
        .map(|i| {
            let tau = spec.outcomes()[i].cate();
            spec.p_t()[i] * tau * tau
        })
        .sum()
}

/// Σ_x (p_T(x)(1−p_T(x))/p_R(x)) · kernel(x), the coupling factor in the
/// printed bounds.
fn coupling_expectation(spec: &DgpSpec, kernel: impl Fn(usize) -> f64) -> f64 {
    (0..spec.support_size())
        .map(|i| {
            let p_t = spec.p_t()[i];
            p_t * (1.0 - p_t) / spec.p_r()[i] * kernel(i)
        })
        .sum()
}

/// E_R[(Y(1))² + (Y(0))²], the second-moment mass in the π̂-variant bounds.
fn e_r_second_moments(spec: &DgpSpec) -> f64 {
    (0..spec.support_size())
        .map(|i| {
            let o = &spec.outcomes()[i];
            spec.p_r()[i] * (o.mean1 * o.mean1 + o.var1 + o.mean0 * o.mean0 + o.var0)
        })
        .sum()
}

/// min_x (1 − π̃(x)^power) p_R(x) with π̃ = max(π, 1−π); drives the
/// exponential terms of the π̂-variant bounds.
fn min_arm_coverage(spec: &DgpSpec, power: i32) -> f64 {
    (0..spec.support_size())
        .map(|i| {
            let pi = spec.pi()[i];
            let tilde = if pi > 0.5 { pi } else { 1.0 - pi };
            let t = if power == 2 { tilde * tilde } else { tilde };
            (1.0 - t) * spec.p_r()[i]
        })
        .fold(f64::INFINITY, f64::min)
}

fn require_finite_m(m: TargetSize, tag: EstimatorTag) -> Result<u64, TheoryError> {
    m.as_finite().ok_or(TheoryError::VariantParameterMismatch(tag))
}

fn require_infinite_m(m: TargetSize, tag: EstimatorTag) -> Result<(), TheoryError> {
    match m {
        TargetSize::Infinite => Ok(()),
        TargetSize::Finite(_) => Err(TheoryError::VariantParameterMismatch(tag)),
    }
}

/// The printed finite-sample upper bound on the variance of the given IPSW
/// variant (exact variance for the oracle).
pub fn variance_bound(spec: &DgpSpec, n: u64, m: TargetSize, tag: EstimatorTag) -> Result<f64, TheoryError> {
    if n < 1 {
        return Err(TheoryError::ParameterOutOfRange("n must be >= 1"));
    }
    let n_f = n as f64;
    let decay = math::powi(1.0 - spec.min_p_r(), n);
    match tag {
        EstimatorTag::IpswOracle => Ok(v_o(spec) / n_f),
        EstimatorTag::IpswSemi => {
            require_infinite_m(m, tag)?;
            Ok(2.0 * v_so(spec) / (n_f + 1.0) + decay * e_t_tau_sq(spec))
        }
        EstimatorTag::IpswEst => {
            let m = require_finite_m(m, tag)? as f64;
            Ok(2.0 * v_so(spec) / (n_f + 1.0)
                + spec.cate_variance_target() / m
                + 2.0 / (m * (n_f + 1.0))
                    * coupling_expectation(spec, |i| v_ht_stratum(spec, StratumId(i as u32)))
                + math::sqrt(decay) * e_t_tau_sq(spec) * (1.0 + 4.0 / m))
        }
        EstimatorTag::IpswSemiPihat => {
            require_infinite_m(m, tag)?;
            Ok(2.0 * v_so_tilde_finite(spec, n)? / (n_f + 1.0)
                + 2.0 * math::sqrt(math::powi(1.0 - min_arm_coverage(spec, 2), n)) * e_r_second_moments(spec))
        }
        EstimatorTag::IpswEstPihat => {
            let m = require_finite_m(m, tag)? as f64;
            let mut kernel = Vec::with_capacity(spec.support_size());
            for i in 0..spec.support_size() {
                kernel.push(v_dm_stratum_finite(spec, StratumId(i as u32), n)?);
            }
            Ok(2.0 * v_so_tilde_finite(spec, n)? / (n_f + 1.0)
                + spec.cate_variance_target() / m
                + 2.0 / ((n_f + 1.0) * m) * coupling_expectation(spec, |i| kernel[i])
                + 2.0
                    * (1.0 + 3.0 / m)
                    * math::sqrt(math::powi(1.0 - min_arm_coverage(spec, 2), n))
                    * e_r_second_moments(spec))
        }
        _ => Err(TheoryError::VariantParameterMismatch(tag)),
    }
}

/// The printed upper bound on the quadratic risk E[(τ̂ − τ)²] of the given
/// IPSW variant; the oracle's risk is returned exactly (V_o/n).
pub fn risk_bound(spec: &DgpSpec, n: u64, m: TargetSize, tag: EstimatorTag) -> Result<f64, TheoryError> {
    if n < 1 {
        return Err(TheoryError::ParameterOutOfRange("n must be >= 1"));
    }
    let n_f = n as f64;
    let decay = math::powi(1.0 - spec.min_p_r(), n);
    match tag {
        EstimatorTag::IpswOracle => Ok(v_o(spec) / n_f),
        EstimatorTag::IpswSemi => {
            require_infinite_m(m, tag)?;
            Ok(2.0 * v_so(spec) / (n_f + 1.0) + 2.0 * decay * e_t_tau_sq(spec))
        }
        EstimatorTag::IpswEst => {
            let m = require_finite_m(m, tag)? as f64;
            Ok(2.0 * v_so(spec) / (n_f + 1.0)
                + spec.cate_variance_target() / m
                + 2.0 / (m * (n_f + 1.0))
                    * coupling_expectation(spec, |i| v_ht_stratum(spec, StratumId(i as u32)))
                + 2.0 * decay * e_t_tau_sq(spec) * (1.0 + 2.0 / m))
        }
        EstimatorTag::IpswSemiPihat => {
            require_infinite_m(m, tag)?;
            Ok(2.0 * v_so_tilde_finite(spec, n)? / (n_f + 1.0)
                + 4.0 * math::sqrt(math::powi(1.0 - min_arm_coverage(spec, 1), n)) * e_r_second_moments(spec))
        }
        EstimatorTag::IpswEstPihat => {
            let m = require_finite_m(m, tag)? as f64;
            let mut kernel = Vec::with_capacity(spec.support_size());
            for i in 0..spec.support_size() {
                kernel.push(v_dm_stratum_finite(spec, StratumId(i as u32), n)?);
            }
            Ok(2.0 * v_so_tilde_finite(spec, n)? / (n_f + 1.0)
                + spec.cate_variance_target() / m
                + 2.0 / (m * (n_f + 1.0)) * coupling_expectation(spec, |i| kernel[i])
                + 2.0
                    * (2.0 + 3.0 / m)
                    * math::sqrt(math::powi(1.0 - min_arm_coverage(spec, 1), n))
                    * e_r_second_moments(spec))
        }
        _ => Err(TheoryError::VariantParameterMismatch(tag)),
    }
}

/// Full closed-form report for one IPSW variant at one (n, m).
pub fn theory_report(
    spec: &DgpSpec,
    tag: EstimatorTag,
    n: u64,
    m: TargetSize,
) -> Result<TheoryReport, TheoryError> {
    if n < 1 {
        return Err(TheoryError::ParameterOutOfRange("n must be >= 1"));
    }
    let (bias, variance_exact) = match (tag, m) {
        (EstimatorTag::IpswOracle, _) => (0.0, Some(v_o(spec) / n as f64)),
        (EstimatorTag::IpswSemi, TargetSize::Infinite) => {
            (bias_semi_oracle(spec, n), Some(var_semi_oracle_exact(spec, n)?))
        }
        (EstimatorTag::IpswEst, TargetSize::Finite(m)) => {
            (bias_semi_oracle(spec, n), Some(var_estimated_exact(spec, n, m)?))
        }
        (EstimatorTag::IpswSemiPihat, TargetSize::Infinite) => {
            (bias_pihat(spec, n), Some(var_semi_pihat_exact(spec, n)?))
        }
        (EstimatorTag::IpswEstPihat, TargetSize::Finite(m)) => {
            (bias_pihat(spec, n), Some(var_pihat_exact(spec, n, m)?))
        }
        _ => return Err(TheoryError::VariantParameterMismatch(tag)),
    };
    let pihat = matches!(tag, EstimatorTag::IpswSemiPihat | EstimatorTag::IpswEstPihat);
    let asymptotic = match tag {
        EstimatorTag::IpswOracle => v_o(spec),
        EstimatorTag::IpswSemi => v_so(spec),
        EstimatorTag::IpswSemiPihat => v_so_tilde_infty(spec),
        _ => asymptotic_variance(spec, AsymptoticRegime::from_sizes(n, m), pihat),
    };
    Ok(TheoryReport {
        estimator: tag,
        n,
        m,
        bias,
        variance_exact,
        variance_bound: variance_bound(spec, n, m, tag)?,
        risk_bound: risk_bound(spec, n, m, tag)?,
        asymptotic_variance: asymptotic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::StratumOutcomeModel;
    use alloc::vec;

    fn toy() -> DgpSpec {
        DgpSpec::from_parts(
            vec![0.25, 0.75],
            vec![0.7, 0.3],
            vec![0.5, 0.5],
            vec![StratumOutcomeModel::new(0.0, 3.0, 1.0, 1.0), StratumOutcomeModel::new(0.0, 10.0, 1.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn v_ht_toy_values() {
        let spec = toy();
        assert!((v_ht_stratum(&spec, StratumId(1)) - 104.0).abs() < 1e-12);
        assert!((v_ht_stratum(&spec, StratumId(0)) - 13.0).abs() < 1e-12);
    }

    #[test]
    fn v_ht_zero_for_deterministic_zero_outcomes() {
        let spec = DgpSpec::from_parts(
            vec![1.0],
            vec![1.0],
            vec![0.5],
            vec![StratumOutcomeModel::new(0.0, 0.0, 0.0, 0.0)],
        )
        .unwrap();
        assert_eq!(v_ht_stratum(&spec, StratumId(0)), 0.0);
        assert_eq!(v_dm_stratum_infty(&spec, StratumId(0)), 0.0);
        assert_eq!(v_o(&spec), 0.0);
    }

    #[test]
    fn v_dm_infty_toy_and_gap_identity() {
        let spec = toy();
        assert!((v_dm_stratum_infty(&spec, StratumId(0)) - 4.0).abs() < 1e-12);
        // V_DM,∞ = V_HT − (sqrt((1−π)/π) m1 + sqrt(π/(1−π)) m0)²
        for x in 0..2u32 {
            let o = &spec.outcomes()[x as usize];
            let pi = spec.pi()[x as usize];
            let gap = math::sqrt((1.0 - pi) / pi) * o.mean1 + math::sqrt(pi / (1.0 - pi)) * o.mean0;
            let lhs = v_dm_stratum_infty(&spec, StratumId(x));
            let rhs = v_ht_stratum(&spec, StratumId(x)) - gap * gap;
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn v_dm_finite_unit_sample() {
        // k=1, π=0.5, centered means, unit variances: Var = 0.5 + 0.5
        let spec = DgpSpec::from_parts(
            vec![1.0],
            vec![1.0],
            vec![0.5],
            vec![StratumOutcomeModel::new(0.0, 0.0, 1.0, 1.0)],
        )
        .unwrap();
        assert!((v_dm_stratum_finite(&spec, StratumId(0), 1).unwrap() - 1.0).abs() < 1e-14);
        // centered means make D_k vanish
        assert_eq!(dm_indicator_remainder(0.0, 0.0, 0.5, 7), 0.0);
    }

    #[test]
    fn v_dm_finite_converges_to_infty() {
        let spec = toy();
        for x in 0..2u32 {
            let limit = v_dm_stratum_infty(&spec, StratumId(x));
            let at_10k = v_dm_stratum_finite(&spec, StratumId(x), 10_000).unwrap();
            assert!((at_10k - limit).abs() / limit < 0.01, "x={x}: {at_10k} vs {limit}");
        }
    }

    #[test]
    fn toy_variance_constants() {
        let spec = toy();
        assert!((v_so(&spec) - 37.96).abs() < 1e-12);
        assert!((v_o(&spec) - 41.59).abs() < 1e-12);
        assert!((v_so_tilde_infty(&spec) - 8.32).abs() < 1e-12);
        // V_so = V_o − Var_R[w τ]
        let w_tau = [2.8 * 3.0, 0.4 * 10.0];
        let mean = 0.25 * w_tau[0] + 0.75 * w_tau[1];
        let var = 0.25 * w_tau[0] * w_tau[0] + 0.75 * w_tau[1] * w_tau[1] - mean * mean;
        assert!((v_so(&spec) - (v_o(&spec) - var)).abs() < 1e-12);
    }

    #[test]
    fn v_o_without_shift_or_heterogeneity_is_pooled_v_ht() {
        // p_R = p_T and constant τ: weights are 1 and the heterogeneity
        // term vanishes, so V_o is the whole-population HT variance
        let spec = DgpSpec::from_parts(
            vec![0.25, 0.75],
            vec![0.25, 0.75],
            vec![0.5, 0.5],
            vec![StratumOutcomeModel::new(1.0, 4.0, 2.0, 0.5), StratumOutcomeModel::new(-1.0, 2.0, 1.0, 3.0)],
        )
        .unwrap();
        let pooled_m1_sq = 0.25 * (16.0 + 0.5) + 0.75 * (4.0 + 3.0);
        let pooled_m0_sq = 0.25 * (1.0 + 2.0) + 0.75 * (1.0 + 1.0);
        let tau = 3.0;
        let pooled_v_ht = pooled_m1_sq / 0.5 + pooled_m0_sq / 0.5 - tau * tau;
        assert!((v_o(&spec) - pooled_v_ht).abs() < 1e-12);
    }

    #[test]
    fn tilde_v_vanishes_without_outcome_noise() {
        let spec = DgpSpec::from_parts(
            vec![0.25, 0.75],
            vec![0.7, 0.3],
            vec![0.5, 0.5],
            vec![StratumOutcomeModel::new(0.0, 3.0, 0.0, 0.0), StratumOutcomeModel::new(0.0, 10.0, 0.0, 0.0)],
        )
        .unwrap();
        assert_eq!(v_so_tilde_infty(&spec), 0.0);
    }

    #[test]
    fn scaled_estimated_variance_near_unit_ratio_corollary_value() {
        // n = m = 20000: min(n,m)·Var within 2% of the λ = 1 value
        let spec = toy();
        let n = 20_000u64;
        let scaled = n as f64 * var_estimated_exact(&spec, n, n).unwrap();
        let corollary = asymptotic_variance(&spec, AsymptoticRegime::Ratio(1.0), false);
        assert!((scaled - corollary).abs() / corollary < 0.02, "{scaled} vs {corollary}");
    }

    #[test]
    fn single_stratum_v_so_is_v_ht() {
        let spec = DgpSpec::from_parts(
            vec![1.0],
            vec![1.0],
            vec![0.3],
            vec![StratumOutcomeModel::new(1.0, 2.0, 0.5, 2.0)],
        )
        .unwrap();
        assert!((v_so(&spec) - v_ht_stratum(&spec, StratumId(0))).abs() < 1e-12);
    }

    #[test]
    fn bias_semi_oracle_toy() {
        let spec = toy();
        assert!((bias_semi_oracle(&spec, 1) - (-2.325)).abs() < 1e-12);
        // bias bound and decay
        let e_abs_tau = 0.7 * 3.0 + 0.3 * 10.0;
        for n in 1..=200u64 {
            let b = bias_semi_oracle(&spec, n);
            assert!(math::abs(b) <= math::powi(1.0 - spec.min_p_r(), n) * e_abs_tau + 1e-12);
        }
        assert!(math::abs(bias_semi_oracle(&spec, 5_000)) < 1e-12);
    }

    #[test]
    fn bias_zero_when_tau_zero() {
        let spec = DgpSpec::from_parts(
            vec![0.25, 0.75],
            vec![0.7, 0.3],
            vec![0.5, 0.5],
            vec![StratumOutcomeModel::new(2.0, 2.0, 1.0, 1.0); 2],
        )
        .unwrap();
        for n in [1u64, 3, 10] {
            assert_eq!(bias_semi_oracle(&spec, n), 0.0);
        }
    }

    #[test]
    fn bias_pihat_toy_and_simplified_form() {
        let spec = toy();
        assert!((bias_pihat(&spec, 1) - (-3.7125)).abs() < 1e-12);
        // at π = 1/2 the bias simplifies to −Σ p_T τ (1 − p_R/2)^n
        for n in [1u64, 2, 5, 20] {
            let simplified: f64 = (0..2)
                .map(|i| {
                    -spec.p_t()[i] * spec.outcomes()[i].cate() * math::powi(1.0 - spec.p_r()[i] / 2.0, n)
                })
                .sum();
            assert!((bias_pihat(&spec, n) - simplified).abs() < 1e-12);
        }
        // mean0 = mean1 = 0 kills the bias entirely
        let centered = DgpSpec::from_parts(
            vec![0.25, 0.75],
            vec![0.7, 0.3],
            vec![0.5, 0.5],
            vec![StratumOutcomeModel::new(0.0, 0.0, 1.0, 1.0); 2],
        )
        .unwrap();
        assert_eq!(bias_pihat(&centered, 4), 0.0);
    }

    #[test]
    fn bias_pihat_simplified_holds_with_baseline() {
        // the π = 1/2 simplification does not need mean0 = 0
        let spec = DgpSpec::from_parts(
            vec![0.4, 0.6],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![StratumOutcomeModel::new(1.5, 4.0, 1.0, 1.0), StratumOutcomeModel::new(-2.0, 1.0, 1.0, 1.0)],
        )
        .unwrap();
        for n in [1u64, 3, 7] {
            let simplified: f64 = (0..2)
                .map(|i| {
                    -spec.p_t()[i] * spec.outcomes()[i].cate() * math::powi(1.0 - spec.p_r()[i] / 2.0, n)
                })
                .sum();
            assert!((bias_pihat(&spec, n) - simplified).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_semi_oracle_variance_converges_to_v_so() {
        let spec = toy();
        let n = 5_000u64;
        let scaled = n as f64 * var_semi_oracle_exact(&spec, n).unwrap();
        assert!((scaled - v_so(&spec)).abs() / v_so(&spec) < 0.01, "{scaled}");
    }

    #[test]
    fn estimated_variance_converges_to_semi_oracle_in_m() {
        let spec = toy();
        let semi = var_semi_oracle_exact(&spec, 40).unwrap();
        let est = var_estimated_exact(&spec, 40, 1_000_000).unwrap();
        assert!((est - semi).abs() / semi < 1e-3);
    }

    #[test]
    fn degenerate_variances_vanish() {
        let spec = DgpSpec::from_parts(
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![StratumOutcomeModel::new(0.0, 0.0, 0.0, 0.0); 2],
        )
        .unwrap();
        assert_eq!(var_semi_oracle_exact(&spec, 4).unwrap(), 0.0);
        assert_eq!(var_estimated_exact(&spec, 4, 3).unwrap(), 0.0);
        assert_eq!(var_pihat_exact(&spec, 4, 3).unwrap(), 0.0);
    }

    #[test]
    fn pihat_collapsed_count_sum_matches_double_sum() {
        let spec = toy();
        for n in [1u64, 2, 17, 120] {
            for x in 0..2u32 {
                let fast = e_var_dm_over_count(&spec, StratumId(x), n).unwrap();
                let slow = e_var_dm_over_count_double_sum(&spec, StratumId(x), n).unwrap();
                assert!((fast - slow).abs() < 1e-12, "n={n} x={x}: {fast} vs {slow}");
            }
        }
        // and on a spec with uncentered means and asymmetric π
        let spec = DgpSpec::from_parts(
            vec![0.3, 0.7],
            vec![0.6, 0.4],
            vec![0.3, 0.8],
            vec![StratumOutcomeModel::new(1.0, 2.5, 0.7, 1.3), StratumOutcomeModel::new(-1.0, 0.5, 2.0, 0.1)],
        )
        .unwrap();
        for x in 0..2u32 {
            let fast = e_var_dm_over_count(&spec, StratumId(x), 60).unwrap();
            let slow = e_var_dm_over_count_double_sum(&spec, StratumId(x), 60).unwrap();
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_pihat_variance_converges_to_tilde_v() {
        let spec = toy();
        let n = 5_000u64;
        let scaled = n as f64 * var_semi_pihat_exact(&spec, n).unwrap();
        let limit = v_so_tilde_infty(&spec);
        assert!((scaled - limit).abs() / limit < 0.01, "{scaled} vs {limit}");
    }

    #[test]
    fn asymptotic_variance_toy_regimes() {
        let spec = toy();
        let inf = asymptotic_variance(&spec, AsymptoticRegime::Infinite, false);
        assert!((inf - 37.96).abs() < 1e-12);
        let one = asymptotic_variance(&spec, AsymptoticRegime::Ratio(1.0), false);
        assert!((one - 48.25).abs() < 1e-12);
        let zero = asymptotic_variance(&spec, AsymptoticRegime::Zero, false);
        assert!((zero - 10.29).abs() < 1e-12);
        let zero_pihat = asymptotic_variance(&spec, AsymptoticRegime::Zero, true);
        assert!((zero_pihat - 10.29).abs() < 1e-12);
        let ten = asymptotic_variance(&spec, AsymptoticRegime::Ratio(10.0), false);
        assert!((ten - (10.29 / 10.0 + 37.96)).abs() < 1e-12);
    }

    #[test]
    fn risk_bound_toy_values() {
        let spec = toy();
        let oracle = risk_bound(&spec, 100, TargetSize::Infinite, EstimatorTag::IpswOracle).unwrap();
        assert!((oracle - 0.4159).abs() < 1e-12);
        let semi = risk_bound(&spec, 150, TargetSize::Infinite, EstimatorTag::IpswSemi).unwrap();
        let expect = 2.0 * 37.96 / 151.0 + 2.0 * math::powi(0.75, 150) * 36.3;
        assert!((semi - expect).abs() < 1e-12);
        assert!((semi - 0.5028).abs() < 1e-3);
    }

    #[test]
    fn semi_risk_bound_dominates_exact_risk_on_toy() {
        let spec = toy();
        for n in 1..=50u64 {
            let exact = {
                let b = bias_semi_oracle(&spec, n);
                b * b + var_semi_oracle_exact(&spec, n).unwrap()
            };
            let bound = risk_bound(&spec, n, TargetSize::Infinite, EstimatorTag::IpswSemi).unwrap();
            assert!(exact <= bound + 1e-12, "n={n}: {exact} > {bound}");
        }
    }

    #[test]
    fn variant_parameter_mismatches() {
        let spec = toy();
        assert!(matches!(
            risk_bound(&spec, 10, TargetSize::Infinite, EstimatorTag::IpswEst),
            Err(TheoryError::VariantParameterMismatch(_))
        ));
        assert!(matches!(
            theory_report(&spec, EstimatorTag::IpswSemi, 10, TargetSize::Finite(5)),
            Err(TheoryError::VariantParameterMismatch(_))
        ));
        assert!(matches!(
            theory_report(&spec, EstimatorTag::Ht, 10, TargetSize::Infinite),
            Err(TheoryError::VariantParameterMismatch(_))
        ));
    }

    #[test]
    fn theory_report_oracle_is_exact() {
        let spec = toy();
        let rep = theory_report(&spec, EstimatorTag::IpswOracle, 150, TargetSize::Infinite).unwrap();
        assert_eq!(rep.bias, 0.0);
        assert!((rep.variance_exact.unwrap() - 41.59 / 150.0).abs() < 1e-12);
        assert!((rep.risk_bound - 41.59 / 150.0).abs() < 1e-12);
        assert!((rep.asymptotic_variance - 41.59).abs() < 1e-12);
    }
}
