//! Brute-force oracles for testing `ipsw-core`.
//!
//! Everything here recomputes moments from first principles — exhaustive
//! enumeration of stratum assignments, treatment assignments, and target
//! draws, with analytic conditional outcome moments — and never calls the
//! closed-form formulas or estimator paths it is used to check.

use ipsw_core::domain::{DgpSpec, StratumOutcomeModel};
use ipsw_core::estimators::EstimatorTag;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Exact mean and variance of one IPSW variant by complete enumeration.
///
/// Enumerates every trial stratum configuration (K^n), every treatment
/// assignment (2^n), and, for estimated-p_T variants, every target
/// configuration (K^m). Conditional on a configuration the estimator is a
/// linear form Σ c_i Y_i, so its conditional mean and variance come from
/// the per-stratum outcome moments.
pub fn enumerate_mean_var(spec: &DgpSpec, n: usize, m: usize, tag: EstimatorTag) -> (f64, f64) {
    let k = spec.support_size();
    let needs_target = matches!(tag, EstimatorTag::IpswEst | EstimatorTag::IpswEstPihat);

    let mut mean = 0.0;
    let mut second = 0.0;

    let mut trial_x = vec![0usize; n];
    loop {
        let p_x: f64 = trial_x.iter().map(|&x| spec.p_r()[x]).product();
        if p_x > 0.0 {
            let mut arms = vec![false; n];
            loop {
                let p_a: f64 = (0..n)
                    .map(|i| {
                        let pi = spec.pi()[trial_x[i]];
                        if arms[i] {
                            pi
                        } else {
                            1.0 - pi
                        }
                    })
                    .product();
                let p_cfg = p_x * p_a;

                if needs_target {
                    let mut target_x = vec![0usize; m];
                    loop {
                        let p_t: f64 = target_x.iter().map(|&x| spec.p_t()[x]).product();
                        if p_t > 0.0 {
                            let (e, v) =
                                conditional_moments(spec, &trial_x, &arms, Some(&target_x), tag);
                            let w = p_cfg * p_t;
                            mean += w * e;
                            second += w * (v + e * e);
                        }
                        if !advance(&mut target_x, k) {
                            break;
                        }
                    }
                } else {
                    let (e, v) = conditional_moments(spec, &trial_x, &arms, None, tag);
                    mean += p_cfg * e;
                    second += p_cfg * (v + e * e);
                }

                if !advance_bools(&mut arms) {
                    break;
                }
            }
        }
        if !advance(&mut trial_x, k) {
            break;
        }
    }
    (mean, second - mean * mean)
}

fn advance(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn advance_bools(bits: &mut [bool]) -> bool {
    for b in bits.iter_mut() {
        if !*b {
            *b = true;
            return true;
        }
        *b = false;
    }
    false
}

/// Per-unit coefficients of the estimator as a linear form in the observed
/// outcomes, given a configuration; derived from the defining formulas.
fn coefficients(
    spec: &DgpSpec,
    trial_x: &[usize],
    arms: &[bool],
    target_x: Option<&[usize]>,
    tag: EstimatorTag,
) -> Vec<f64> {
    let n = trial_x.len();
    let k = spec.support_size();

    let mut count = vec![0u64; k];
    let mut treated = vec![0u64; k];
    for i in 0..n {
        count[trial_x[i]] += 1;
        treated[trial_x[i]] += arms[i] as u64;
    }
    // weight on each stratum: p_T or its empirical counterpart
    let w_t: Vec<f64> = match target_x {
        Some(tx) => {
            let mut c = vec![0u64; k];
            for &x in tx {
                c[x] += 1;
            }
            c.iter().map(|&c| c as f64 / tx.len() as f64).collect()
        }
        None => spec.p_t().to_vec(),
    };

    (0..n)
        .map(|i| {
            let x = trial_x[i];
            match tag {
                EstimatorTag::IpswSemi | EstimatorTag::IpswEst => {
                    // (1/n) (p_T(x)/p̂_R(x)) (A/π − (1−A)/(1−π)); p̂_R = count/n
                    let w = w_t[x] / (count[x] as f64 / n as f64);
                    let pi = spec.pi()[x];
                    let ht = if arms[i] { 1.0 / pi } else { -1.0 / (1.0 - pi) };
                    w * ht / n as f64
                }
                EstimatorTag::IpswSemiPihat | EstimatorTag::IpswEstPihat => {
                    // Σ_x w_T(x) DM_x with 0/0 = 0 inside each stratum
                    let (n1, n0) = (treated[x], count[x] - treated[x]);
                    if arms[i] {
                        if n1 > 0 {
                            w_t[x] / n1 as f64
                        } else {
                            0.0
                        }
                    } else if n0 > 0 {
                        -w_t[x] / n0 as f64
                    } else {
                        0.0
                    }
                }
                _ => panic!("enumeration covers the estimated IPSW variants"),
            }
        })
        .collect()
}

fn conditional_moments(
    spec: &DgpSpec,
    trial_x: &[usize],
    arms: &[bool],
    target_x: Option<&[usize]>,
    tag: EstimatorTag,
) -> (f64, f64) {
    let coef = coefficients(spec, trial_x, arms, target_x, tag);
    let mut e = 0.0;
    let mut v = 0.0;
    for i in 0..trial_x.len() {
        let o = &spec.outcomes()[trial_x[i]];
        let (mean, var) = if arms[i] { (o.mean1, o.var1) } else { (o.mean0, o.var0) };
        e += coef[i] * mean;
        v += coef[i] * coef[i] * var;
    }
    (e, v)
}

/// E[f(Z)] for Z ~ Binomial(n, p) by direct summation with exact
/// coefficients built from Pascal's rule.
pub fn binomial_expectation(n: u64, p: f64, f: impl Fn(u64) -> f64) -> f64 {
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for j in 1..row.len() {
            next[j] = row[j - 1] + row[j];
        }
        row = next;
    }
    (0..=n)
        .map(|z| row[z as usize] * p.powi(z as i32) * (1.0 - p).powi((n - z) as i32) * f(z))
        .sum()
}

/// A generator of small valid specs for property tests: K strata with
/// probabilities bounded away from 0, π in [0.1, 0.9], bounded moments.
pub fn random_spec(rng: &mut ChaCha8Rng, max_k: usize) -> DgpSpec {
    let k = rng.random_range(1..=max_k);
    let draw_probs = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05f64..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
        // make the vector sum to 1 exactly enough for validation
        let err: f64 = 1.0 - probs.iter().sum::<f64>();
        probs[0] += err;
        probs
    };
    let p_r = draw_probs(rng);
    let p_t = draw_probs(rng);
    let pi: Vec<f64> = (0..k).map(|_| rng.random_range(0.1f64..0.9)).collect();
    let outcomes: Vec<StratumOutcomeModel> = (0..k)
        .map(|_| {
            StratumOutcomeModel::new(
                rng.random_range(-3.0f64..3.0),
                rng.random_range(-3.0f64..3.0),
                rng.random_range(0.0f64..4.0),
                rng.random_range(0.0f64..4.0),
            )
        })
        .collect();
    DgpSpec::from_parts(p_r, p_t, pi, outcomes).expect("generated spec is valid")
}

/// Seeded generator stream for reproducible property tests.
pub fn spec_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
