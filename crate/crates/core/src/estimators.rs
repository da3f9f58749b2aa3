//! Average-treatment-effect estimators as pure functions of sample data.
//!
//! Within-trial estimators (Horvitz-Thompson, difference-in-means,
//! post-stratification) target the trial ATE; the IPSW family reweights the
//! trial by (estimates of) p_T(x)/p_R(x) to target the target-population
//! ATE. Variants differ in what is oracle and what is estimated:
//!
//! | tag               | p_T      | p_R      | treatment prob. |
//! |-------------------|----------|----------|-----------------|
//! | `IpswOracle`      | known    | known    | known π(x)      |
//! | `IpswSemi`        | known    | counted  | known π(x)      |
//! | `IpswEst`         | counted  | counted  | known π(x)      |
//! | `IpswSemiPihat`   | known    | counted  | counted π̂(x)    |
//! | `IpswEstPihat`    | counted  | counted  | counted π̂(x)    |
//!
//! Empty strata and empty treatment arms follow the 0/0 = 0 convention
//! throughout, and are counted in [`Diagnostics`] so a simulation harness
//! can report finite-sample degeneracy rates.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{DgpSpec, StratumId, TargetSample, TrialSample};
use crate::math;

/// Which estimator produced an [`Estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorTag {
    Ht,
    Dm,
    Ps,
    IpswOracle,
    IpswSemi,
    IpswEst,
    IpswSemiPihat,
    IpswEstPihat,
}

impl EstimatorTag {
    pub const ALL: [EstimatorTag; 8] = [
        EstimatorTag::Ht,
        EstimatorTag::Dm,
        EstimatorTag::Ps,
        EstimatorTag::IpswOracle,
        EstimatorTag::IpswSemi,
        EstimatorTag::IpswEst,
        EstimatorTag::IpswSemiPihat,
        EstimatorTag::IpswEstPihat,
    ];

    /// Stable machine name used in CLI arguments and CSV output.
    pub fn name(self) -> &'static str {
        match self {
            EstimatorTag::Ht => "ht",
            EstimatorTag::Dm => "dm",
            EstimatorTag::Ps => "ps",
            EstimatorTag::IpswOracle => "ipsw_oracle",
            EstimatorTag::IpswSemi => "ipsw_semi",
            EstimatorTag::IpswEst => "ipsw_est",
            EstimatorTag::IpswSemiPihat => "ipsw_semi_pihat",
            EstimatorTag::IpswEstPihat => "ipsw_est_pihat",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    /// Whether the estimator consumes a target sample.
    pub fn needs_target(self) -> bool {
        matches!(self, EstimatorTag::IpswEst | EstimatorTag::IpswEstPihat)
    }
}

/// Degeneracy counters for one evaluation: strata of the relevant support
/// with no trial units, and occupied strata with an empty treatment arm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub empty_strata: u32,
    pub zero_arm_strata: u32,
}

impl Diagnostics {
    pub fn is_degenerate(&self) -> bool {
        self.empty_strata > 0 || self.zero_arm_strata > 0
    }
}

/// A point estimate with its estimator tag and degeneracy diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub tag: EstimatorTag,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("pi = {0} is outside (0, 1)")]
    PiOutOfRange(f64),
    #[error("stratum id {0} is outside the support of size {1}")]
    InvalidStratumId(u32, usize),
    #[error("sampled stratum {0} has p_R = 0")]
    SupportViolation(u32),
    #[error("sample is empty")]
    EmptySample,
}

/// Per-stratum counting estimate of a categorical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalFrequencies {
    pub counts: Vec<u64>,
    pub total: u64,
    pub probs: Vec<f64>,
}

/// Counts occurrences of each stratum id: p̂(x) = count(x)/total.
pub fn empirical_frequencies(
    x: &[StratumId],
    support_size: usize,
) -> Result<EmpiricalFrequencies, EstimatorError> {
    if x.is_empty() {
        return Err(EstimatorError::EmptySample);
    }
    let mut counts = vec![0u64; support_size];
    for &xi in x {
        if xi.index() >= support_size {
            return Err(EstimatorError::InvalidStratumId(xi.0, support_size));
        }
        counts[xi.index()] += 1;
    }
    let total = x.len() as u64;
    let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(EmpiricalFrequencies { counts, total, probs })
}

/// Per-stratum treated counts and the estimated treatment probability
/// π̂(x) = n_{x,1}/n_x; `None` marks strata with no trial units.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumTreatmentFreq {
    pub treated_counts: Vec<u64>,
    pub stratum_counts: Vec<u64>,
    pub pi_hat: Vec<Option<f64>>,
}

pub fn stratum_treatment_freq(
    sample: &TrialSample,
    support_size: usize,
) -> Result<StratumTreatmentFreq, EstimatorError> {
    let mut treated = vec![0u64; support_size];
    let mut counts = vec![0u64; support_size];
    for i in 0..sample.len() {
        let xi = sample.x[i];
        if xi.index() >= support_size {
            return Err(EstimatorError::InvalidStratumId(xi.0, support_size));
        }
        counts[xi.index()] += 1;
        if sample.a[i] {
            treated[xi.index()] += 1;
        }
    }
    let pi_hat = (0..support_size)
        .map(|x| if counts[x] > 0 { Some(treated[x] as f64 / counts[x] as f64) } else { None })
        .collect();
    Ok(StratumTreatmentFreq { treated_counts: treated, stratum_counts: counts, pi_hat })
}

/// Horvitz-Thompson estimator with known constant treatment probability:
/// (1/n) Σ_i (A_i Y_i/π − (1−A_i) Y_i/(1−π)).
pub fn horvitz_thompson(sample: &TrialSample, pi: f64) -> Result<Estimate, EstimatorError> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(EstimatorError::PiOutOfRange(pi));
    }
    let n = sample.len() as f64;
    let mut sum = 0.0;
    for i in 0..sample.len() {
        sum += if sample.a[i] { sample.y[i] / pi } else { -sample.y[i] / (1.0 - pi) };
    }
    Ok(Estimate { value: sum / n, tag: EstimatorTag::Ht, diagnostics: Diagnostics::default() })
}

/// Mean outcome of the treated minus mean outcome of the controls; an empty
/// arm contributes 0.
fn dm_value(treated_sum: f64, treated_n: u64, control_sum: f64, control_n: u64) -> f64 {
    let t = if treated_n > 0 { treated_sum / treated_n as f64 } else { 0.0 };
    let c = if control_n > 0 { control_sum / control_n as f64 } else { 0.0 };
    t - c
}

/// Difference-in-means estimator (Horvitz-Thompson with π estimated as the
/// sample treated fraction).
pub fn difference_in_means(sample: &TrialSample) -> Estimate {
    let mut sums = [0.0f64; 2];
    let mut counts = [0u64; 2];
    for i in 0..sample.len() {
        let arm = sample.a[i] as usize;
        sums[arm] += sample.y[i];
        counts[arm] += 1;
    }
    let zero_arms = (counts[0] == 0) as u32 + (counts[1] == 0) as u32;
    Estimate {
        value: dm_value(sums[1], counts[1], sums[0], counts[0]),
        tag: EstimatorTag::Dm,
        diagnostics: Diagnostics { empty_strata: 0, zero_arm_strata: zero_arms },
    }
}

/// Per-stratum outcome sums and unit counts by treatment arm.
struct StratumArms {
    treated_sum: Vec<f64>,
    treated_n: Vec<u64>,
    control_sum: Vec<f64>,
    control_n: Vec<u64>,
}

impl StratumArms {
    fn collect(sample: &TrialSample, support_size: usize) -> Result<Self, EstimatorError> {
        let mut arms = StratumArms {
            treated_sum: vec![0.0; support_size],
            treated_n: vec![0; support_size],
            control_sum: vec![0.0; support_size],
            control_n: vec![0; support_size],
        };
        for i in 0..sample.len() {
            let x = sample.x[i].index();
            if x >= support_size {
                return Err(EstimatorError::InvalidStratumId(sample.x[i].0, support_size));
            }
            if sample.a[i] {
                arms.treated_sum[x] += sample.y[i];
                arms.treated_n[x] += 1;
            } else {
                arms.control_sum[x] += sample.y[i];
                arms.control_n[x] += 1;
            }
        }
        Ok(arms)
    }

    #[inline]
    fn stratum_n(&self, x: usize) -> u64 {
        self.treated_n[x] + self.control_n[x]
    }

    #[inline]
    fn dm(&self, x: usize) -> f64 {
        dm_value(self.treated_sum[x], self.treated_n[x], self.control_sum[x], self.control_n[x])
    }

    /// Weighted combination Σ_x w(x)·DM_x with the empty-arm convention,
    /// counting degeneracies over strata with positive weight.
    fn weighted_dm(&self, weights: &[f64]) -> (f64, Diagnostics) {
        let mut diag = Diagnostics::default();
        let mut terms = Vec::with_capacity(weights.len());
        for (x, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let n_x = self.stratum_n(x);
            if n_x == 0 {
                diag.empty_strata += 1;
                continue;
            }
            if self.treated_n[x] == 0 || self.control_n[x] == 0 {
                diag.zero_arm_strata += 1;
            }
            terms.push(w * self.dm(x));
        }
        (math::pairwise_sum(&terms), diag)
    }
}

/// Post-stratification: Σ_x (n_x/n)·DM on the stratum-x subsample.
pub fn post_stratification(sample: &TrialSample, support_size: usize) -> Result<Estimate, EstimatorError> {
    let arms = StratumArms::collect(sample, support_size)?;
    let n = sample.len() as f64;
    let mut diag = Diagnostics::default();
    let mut terms = Vec::with_capacity(support_size);
    for x in 0..support_size {
        let n_x = arms.stratum_n(x);
        if n_x == 0 {
            continue;
        }
        if arms.treated_n[x] == 0 || arms.control_n[x] == 0 {
            diag.zero_arm_strata += 1;
        }
        terms.push(n_x as f64 / n * arms.dm(x));
    }
    Ok(Estimate { value: math::pairwise_sum(&terms), tag: EstimatorTag::Ps, diagnostics: diag })
}

/// Shared worker for the known-π IPSW variants: per-unit weighted
/// Horvitz-Thompson transform (1/n) Σ_i w(X_i) Y_i (A_i/π(X_i) − (1−A_i)/(1−π(X_i))).
fn weighted_ht(
    sample: &TrialSample,
    weight: &[f64],
    pi: &[f64],
    tag: EstimatorTag,
    diag: Diagnostics,
) -> Estimate {
    let n = sample.len() as f64;
    let mut terms = Vec::with_capacity(sample.len());
    for i in 0..sample.len() {
        let x = sample.x[i].index();
        let ht = if sample.a[i] { sample.y[i] / pi[x] } else { -sample.y[i] / (1.0 - pi[x]) };
        terms.push(weight[x] * ht);
    }
    Estimate { value: math::pairwise_sum(&terms) / n, tag, diagnostics: diag }
}

/// Completely oracle IPSW: weights p_T(x)/p_R(x) and treatment probability
/// π(x) both taken from the true process.
pub fn ipsw_oracle(sample: &TrialSample, spec: &DgpSpec) -> Result<Estimate, EstimatorError> {
    let k = spec.support_size();
    let mut weight = vec![0.0; k];
    for &xi in &sample.x {
        if xi.index() >= k {
            return Err(EstimatorError::InvalidStratumId(xi.0, k));
        }
        if spec.p_r()[xi.index()] == 0.0 {
            return Err(EstimatorError::SupportViolation(xi.0));
        }
        weight[xi.index()] = spec.probability_ratio(xi);
    }
    Ok(weighted_ht(sample, &weight, spec.pi(), EstimatorTag::IpswOracle, Diagnostics::default()))
}

/// Semi-oracle IPSW: p_T known, p_R counted from the trial, known π(x).
/// Strata absent from the trial contribute nothing.
pub fn ipsw_semi_oracle(sample: &TrialSample, p_t: &[f64], pi: &[f64]) -> Result<Estimate, EstimatorError> {
    let k = p_t.len();
    let freq = empirical_frequencies(&sample.x, k)?;
    let mut weight = vec![0.0; k];
    let mut diag = Diagnostics::default();
    for x in 0..k {
        if freq.counts[x] > 0 {
            weight[x] = p_t[x] / freq.probs[x];
        } else if p_t[x] > 0.0 {
            diag.empty_strata += 1;
        }
    }
    Ok(weighted_ht(sample, &weight, pi, EstimatorTag::IpswSemi, diag))
}

/// Estimated IPSW: both p_T and p_R counted, known π(x).
pub fn ipsw_estimated(
    trial: &TrialSample,
    target: &TargetSample,
    pi: &[f64],
    support_size: usize,
) -> Result<Estimate, EstimatorError> {
    let p_t_hat = empirical_frequencies(&target.x, support_size)?;
    let mut est = ipsw_semi_oracle(trial, &p_t_hat.probs, pi)?;
    est.tag = EstimatorTag::IpswEst;
    Ok(est)
}

/// Semi-oracle IPSW with per-stratum estimated treatment probability:
/// equals Σ_x p_T(x)·DM on the stratum-x subsample.
pub fn ipsw_semi_oracle_pihat(sample: &TrialSample, p_t: &[f64]) -> Result<Estimate, EstimatorError> {
    let arms = StratumArms::collect(sample, p_t.len())?;
    let (value, diag) = arms.weighted_dm(p_t);
    Ok(Estimate { value, tag: EstimatorTag::IpswSemiPihat, diagnostics: diag })
}

/// Completely estimated IPSW with estimated π̂(x): Σ_x (m_x/m)·DM on the
/// stratum-x subsample.
pub fn ipsw_estimated_pihat(
    trial: &TrialSample,
    target: &TargetSample,
    support_size: usize,
) -> Result<Estimate, EstimatorError> {
    let p_t_hat = empirical_frequencies(&target.x, support_size)?;
    let arms = StratumArms::collect(trial, support_size)?;
    let (value, diag) = arms.weighted_dm(&p_t_hat.probs);
    Ok(Estimate { value, tag: EstimatorTag::IpswEstPihat, diagnostics: diag })
}
