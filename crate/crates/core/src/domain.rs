//! The categorical-covariate universe: data-generating process, sampled
//! datasets, and the trial/target estimands.
//!
//! Everything is a sum over a finite support of strata with dense ids
//! `0..K-1`, so probability vectors and outcome models are plain `Vec`s
//! indexed by stratum id.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;

/// Index of a stratum in the categorical support. Ids are dense `0..K-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StratumId(pub u32);

impl StratumId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One category of the support, with an optional human-readable label for
/// reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    pub id: StratumId,
    pub label: Option<String>,
}

impl Stratum {
    pub fn new(id: u32) -> Self {
        Stratum { id: StratumId(id), label: None }
    }

    pub fn labeled(id: u32, label: impl Into<String>) -> Self {
        Stratum { id: StratumId(id), label: Some(label.into()) }
    }
}

/// Sampling family for simulated potential outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseFamily {
    #[default]
    Gaussian,
}

/// First and second moments of the potential outcomes on one stratum.
///
/// The closed-form results only involve these moments, so the Gaussian
/// family is just the simulator's concrete choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StratumOutcomeModel {
    /// E[Y(0) | X = x]
    pub mean0: f64,
    /// E[Y(1) | X = x]
    pub mean1: f64,
    /// Var[Y(0) | X = x]
    pub var0: f64,
    /// Var[Y(1) | X = x]
    pub var1: f64,
    pub noise_family: NoiseFamily,
}

impl StratumOutcomeModel {
    pub fn new(mean0: f64, mean1: f64, var0: f64, var1: f64) -> Self {
        StratumOutcomeModel { mean0, mean1, var0, var1, noise_family: NoiseFamily::Gaussian }
    }

    /// Conditional average treatment effect τ(x) = E[Y(1)−Y(0) | X=x].
    #[inline]
    pub fn cate(&self) -> f64 {
        self.mean1 - self.mean0
    }
}

/// A violation of the data-generating-process invariants.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DgpViolation {
    #[error("{which} sums to {sum} instead of 1")]
    ProbabilityNotNormalized { which: &'static str, sum: f64 },
    #[error("stratum {stratum} has p_T > 0 but p_R = 0")]
    SupportViolation { stratum: u32 },
    #[error("stratum {stratum} has negative probability in {which}")]
    NegativeProbability { stratum: u32, which: &'static str },
    #[error("stratum {stratum} has pi = {value}, outside (0, 1)")]
    PiOutOfRange { stratum: u32, value: f64 },
    #[error("stratum {stratum} has a negative outcome variance")]
    NegativeVariance { stratum: u32 },
    #[error("fields have inconsistent lengths")]
    LengthMismatch,
    #[error("support is empty")]
    EmptySupport,
}

const NORMALIZATION_TOL: f64 = 1e-12;

/// The full data-generating process over a categorical support: stratum
/// probabilities in the trial (`p_r`) and target (`p_t`) populations, the
/// per-stratum treatment probability `pi`, and the outcome moments.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    strata: Vec<Stratum>,
    p_r: Vec<f64>,
    p_t: Vec<f64>,
    pi: Vec<f64>,
    outcomes: Vec<StratumOutcomeModel>,
}

impl DgpSpec {
    /// Builds and validates a spec. Strata with `p_r = p_t = 0` are dropped
    /// (ids are re-densified); every other invariant violation is reported,
    /// all together.
    pub fn new(
        strata: Vec<Stratum>,
        p_r: Vec<f64>,
        p_t: Vec<f64>,
        pi: Vec<f64>,
        outcomes: Vec<StratumOutcomeModel>,
    ) -> Result<Self, Vec<DgpViolation>> {
        let k = strata.len();
        if p_r.len() != k || p_t.len() != k || pi.len() != k || outcomes.len() != k {
            return Err(alloc::vec![DgpViolation::LengthMismatch]);
        }

        // Drop strata carrying no mass in either population.
        let keep: Vec<usize> = (0..k).filter(|&i| !(p_r[i] == 0.0 && p_t[i] == 0.0)).collect();
        let select = |v: &[f64]| -> Vec<f64> { keep.iter().map(|&i| v[i]).collect() };
        let spec = DgpSpec {
            strata: keep
                .iter()
                .enumerate()
                .map(|(new_id, &i)| Stratum { id: StratumId(new_id as u32), label: strata[i].label.clone() })
                .collect(),
            p_r: select(&p_r),
            p_t: select(&p_t),
            pi: select(&pi),
            outcomes: keep.iter().map(|&i| outcomes[i]).collect(),
        };

        let violations = spec.validate();
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(violations)
        }
    }

    /// Convenience constructor for unlabeled strata.
    pub fn from_parts(
        p_r: Vec<f64>,
        p_t: Vec<f64>,
        pi: Vec<f64>,
        outcomes: Vec<StratumOutcomeModel>,
    ) -> Result<Self, Vec<DgpViolation>> {
        let strata = (0..p_r.len() as u32).map(Stratum::new).collect();
        DgpSpec::new(strata, p_r, p_t, pi, outcomes)
    }

    /// Checks every invariant and returns the complete list of violations.
    pub fn validate(&self) -> Vec<DgpViolation> {
        let mut out = Vec::new();
        if self.strata.is_empty() {
            out.push(DgpViolation::EmptySupport);
            return out;
        }
        for (name, v) in [("p_R", &self.p_r), ("p_T", &self.p_t)] {
            for (i, &p) in v.iter().enumerate() {
                if p < 0.0 || !p.is_finite() {
                    out.push(DgpViolation::NegativeProbability { stratum: i as u32, which: name });
                }
            }
            let sum = math::pairwise_sum(v);
            if math::abs(sum - 1.0) > NORMALIZATION_TOL {
                out.push(DgpViolation::ProbabilityNotNormalized { which: name, sum });
            }
        }
        for i in 0..self.strata.len() {
            // Support inclusion: target mass must be reachable in the trial.
            if self.p_t[i] > 0.0 && self.p_r[i] == 0.0 {
                out.push(DgpViolation::SupportViolation { stratum: i as u32 });
            }
            if !(self.pi[i] > 0.0 && self.pi[i] < 1.0) {
                out.push(DgpViolation::PiOutOfRange { stratum: i as u32, value: self.pi[i] });
            }
            let o = &self.outcomes[i];
            if o.var0 < 0.0 || o.var1 < 0.0 {
                out.push(DgpViolation::NegativeVariance { stratum: i as u32 });
            }
        }
        out
    }

    #[inline]
    pub fn support_size(&self) -> usize {
        self.strata.len()
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn p_r(&self) -> &[f64] {
        &self.p_r
    }

    pub fn p_t(&self) -> &[f64] {
        &self.p_t
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn outcomes(&self) -> &[StratumOutcomeModel] {
        &self.outcomes
    }

    #[inline]
    pub fn outcome(&self, x: StratumId) -> &StratumOutcomeModel {
        &self.outcomes[x.index()]
    }

    /// τ(x) on one stratum.
    #[inline]
    pub fn cate(&self, x: StratumId) -> f64 {
        self.outcomes[x.index()].cate()
    }

    /// The weight p_T(x)/p_R(x) the IPSW family estimates.
    #[inline]
    pub fn probability_ratio(&self, x: StratumId) -> f64 {
        self.p_t[x.index()] / self.p_r[x.index()]
    }

    /// Target-population average treatment effect τ = Σ_x p_T(x) τ(x).
    pub fn true_ate(&self) -> f64 {
        let terms: Vec<f64> =
            (0..self.support_size()).map(|i| self.p_t[i] * self.outcomes[i].cate()).collect();
        math::pairwise_sum(&terms)
    }

    /// Trial-population average treatment effect τ_R = Σ_x p_R(x) τ(x).
    pub fn trial_ate(&self) -> f64 {
        let terms: Vec<f64> =
            (0..self.support_size()).map(|i| self.p_r[i] * self.outcomes[i].cate()).collect();
        math::pairwise_sum(&terms)
    }

    /// min_x p_R(x); drives every exponential finite-sample bias term.
    pub fn min_p_r(&self) -> f64 {
        self.p_r.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Var_T[τ(X)] under the target distribution.
    pub fn cate_variance_target(&self) -> f64 {
        let mean = self.true_ate();
        let terms: Vec<f64> = (0..self.support_size())
            .map(|i| {
                let d = self.outcomes[i].cate() - mean;
                self.p_t[i] * d * d
            })
            .collect();
        math::pairwise_sum(&terms)
    }
}

/// Standalone form of spec validation: `Ok(())` or the complete violation
/// list.
pub fn validate_dgp(spec: &DgpSpec) -> Result<(), Vec<DgpViolation>> {
    let v = spec.validate();
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Trial observations (X_i, A_i, Y_i), i = 1..n.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSample {
    pub x: Vec<StratumId>,
    pub a: Vec<bool>,
    pub y: Vec<f64>,
}

impl TrialSample {
    pub fn new(x: Vec<StratumId>, a: Vec<bool>, y: Vec<f64>) -> Self {
        assert!(!x.is_empty(), "trial sample must be nonempty");
        assert!(x.len() == a.len() && x.len() == y.len(), "trial sample fields must have equal lengths");
        TrialSample { x, a, y }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Target-population observations: covariates only.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSample {
    pub x: Vec<StratumId>,
}

impl TargetSample {
    pub fn new(x: Vec<StratumId>) -> Self {
        assert!(!x.is_empty(), "target sample must be nonempty");
        TargetSample { x }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// A violation of the extended-spec invariants.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtendedDgpViolation {
    #[error("base spec invalid: {0:?}")]
    Base(Vec<DgpViolation>),
    #[error("auxiliary covariate fields have inconsistent lengths")]
    LengthMismatch,
    #[error("{which} sums to {sum} instead of 1")]
    AuxNotNormalized { which: &'static str, sum: f64 },
    #[error("auxiliary level {level} has q_T > 0 but q_R = 0")]
    AuxSupportViolation { level: u32 },
    #[error("tau_shift for stratum {stratum} has nonzero q_T-mean {mean}")]
    TauShiftNotCentered { stratum: u32, mean: f64 },
}

/// A base process extended with one extra categorical covariate `V`,
/// independent of `X` in both populations. `tau_shift(x, v)` additively
/// modifies the CATE and must be q_T-mean-zero per stratum so the marginal
/// τ(x) is unchanged.
///
/// `tau_shift ≡ 0` means `V` does not modulate the treatment effect;
/// `q_r == q_t` means `V` is not shifted.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedDgpSpec {
    base: DgpSpec,
    aux_support: Vec<Stratum>,
    q_r: Vec<f64>,
    q_t: Vec<f64>,
    /// Row-major over (stratum, aux level): `tau_shift[x * v_len + v]`.
    tau_shift: Vec<f64>,
}

impl ExtendedDgpSpec {
    pub fn new(
        base: DgpSpec,
        aux_support: Vec<Stratum>,
        q_r: Vec<f64>,
        q_t: Vec<f64>,
        tau_shift: Vec<f64>,
    ) -> Result<Self, Vec<ExtendedDgpViolation>> {
        let mut out = Vec::new();
        let bv = base.validate();
        if !bv.is_empty() {
            out.push(ExtendedDgpViolation::Base(bv));
        }
        let vk = aux_support.len();
        if q_r.len() != vk || q_t.len() != vk || tau_shift.len() != base.support_size() * vk || vk == 0 {
            out.push(ExtendedDgpViolation::LengthMismatch);
            return Err(out);
        }
        for (name, v) in [("q_R", &q_r), ("q_T", &q_t)] {
            let sum = math::pairwise_sum(v);
            if math::abs(sum - 1.0) > NORMALIZATION_TOL {
                out.push(ExtendedDgpViolation::AuxNotNormalized { which: name, sum });
            }
        }
        for v in 0..vk {
            if q_t[v] > 0.0 && q_r[v] == 0.0 {
                out.push(ExtendedDgpViolation::AuxSupportViolation { level: v as u32 });
            }
        }
        for x in 0..base.support_size() {
            let mean: f64 = (0..vk).map(|v| q_t[v] * tau_shift[x * vk + v]).sum();
            if math::abs(mean) > 1e-9 {
                out.push(ExtendedDgpViolation::TauShiftNotCentered { stratum: x as u32, mean });
            }
        }
        if out.is_empty() {
            Ok(ExtendedDgpSpec { base, aux_support, q_r, q_t, tau_shift })
        } else {
            Err(out)
        }
    }

    pub fn base(&self) -> &DgpSpec {
        &self.base
    }

    pub fn aux_support(&self) -> &[Stratum] {
        &self.aux_support
    }

    pub fn q_r(&self) -> &[f64] {
        &self.q_r
    }

    pub fn q_t(&self) -> &[f64] {
        &self.q_t
    }

    #[inline]
    pub fn aux_len(&self) -> usize {
        self.aux_support.len()
    }

    #[inline]
    pub fn tau_shift(&self, x: usize, v: usize) -> f64 {
        self.tau_shift[x * self.aux_len() + v]
    }

    /// Whether `V` satisfies the non-shifted definition (q_R = q_T exactly).
    pub fn is_non_shifted(&self) -> bool {
        self.q_r == self.q_t
    }

    /// Whether `V` satisfies the non-modifier definition (tau_shift ≡ 0).
    pub fn is_non_modifier(&self) -> bool {
        self.tau_shift.iter().all(|&s| s == 0.0)
    }

    /// Flattened joint id for (x, v): `x * |V| + v`.
    #[inline]
    pub fn joint_id(&self, x: StratumId, v: usize) -> StratumId {
        StratumId(x.0 * self.aux_len() as u32 + v as u32)
    }

    /// Flattens (X, V) into a single categorical spec over `K·|V|` strata.
    /// Under independence the joint probabilities are products; the shift
    /// moves `mean1` so that τ(x, v) = τ(x) + tau_shift(x, v).
    pub fn flatten(&self) -> DgpSpec {
        let k = self.base.support_size();
        let vk = self.aux_len();
        let mut strata = Vec::with_capacity(k * vk);
        let mut p_r = Vec::with_capacity(k * vk);
        let mut p_t = Vec::with_capacity(k * vk);
        let mut pi = Vec::with_capacity(k * vk);
        let mut outcomes = Vec::with_capacity(k * vk);
        for x in 0..k {
            for v in 0..vk {
                strata.push(Stratum::new((x * vk + v) as u32));
                p_r.push(self.base.p_r()[x] * self.q_r[v]);
                p_t.push(self.base.p_t()[x] * self.q_t[v]);
                pi.push(self.base.pi()[x]);
                let o = self.base.outcomes()[x];
                outcomes.push(StratumOutcomeModel {
                    mean0: o.mean0,
                    mean1: o.mean1 + self.tau_shift(x, v),
                    var0: o.var0,
                    var1: o.var1,
                    noise_family: o.noise_family,
                });
            }
        }
        DgpSpec::new(strata, p_r, p_t, pi, outcomes)
            .expect("flattening a valid extended spec yields a valid spec")
    }

    /// The spec seen when adjusting on `X` only while `(X, V)` is the true
    /// process: outcome moments are collapsed over `V` under its trial
    /// distribution. Requires a non-shifted `V` so the collapse is the same
    /// in both populations.
    pub fn collapse(&self) -> DgpSpec {
        assert!(self.is_non_shifted(), "collapse over V requires q_R = q_T");
        let k = self.base.support_size();
        let vk = self.aux_len();
        let mut outcomes = Vec::with_capacity(k);
        for x in 0..k {
            let o = self.base.outcomes()[x];
            let mean_shift: f64 = (0..vk).map(|v| self.q_r[v] * self.tau_shift(x, v)).sum();
            let var_shift: f64 = (0..vk)
                .map(|v| {
                    let d = self.tau_shift(x, v) - mean_shift;
                    self.q_r[v] * d * d
                })
                .sum();
            outcomes.push(StratumOutcomeModel {
                mean0: o.mean0,
                mean1: o.mean1 + mean_shift,
                var0: o.var0,
                var1: o.var1 + var_shift,
                noise_family: o.noise_family,
            });
        }
        DgpSpec::new(
            self.base.strata().to_vec(),
            self.base.p_r().to_vec(),
            self.base.p_t().to_vec(),
            self.base.pi().to_vec(),
            outcomes,
        )
        .expect("collapsing a valid extended spec yields a valid spec")
    }
}
