//! Seeded Monte Carlo harness.
//!
//! Every replicate draws its RNG from a counter-based stream keyed by
//! (seed, replicate index), so a run is reproducible and independent of how
//! replicates are scheduled across workers. Aggregation stores per-replicate
//! values and reduces them pairwise in index order, which makes the report
//! bit-identical whether the `parallel` feature fans replicates out or not.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{DgpSpec, StratumId, TargetSample, TrialSample};
use crate::estimators::{self, Estimate, EstimatorError, EstimatorTag};
use crate::math;
use crate::theory::{asymptotic_variance, v_o, AsymptoticRegime, TargetSize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulateError {
    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("estimator failed on replicate {rep}: {source}")]
    Estimator {
        rep: u64,
        #[source]
        source: EstimatorError,
    },
}

/// One Monte Carlo experiment: sample sizes, replicate count, seed, and the
/// estimators to evaluate on each replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n: u64,
    pub m: u64,
    pub reps: u64,
    pub seed: u64,
    pub estimators: Vec<EstimatorTag>,
}

/// Aggregates for one estimator across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorStats {
    pub tag: EstimatorTag,
    pub mean: f64,
    pub bias_vs_true_ate: f64,
    /// Unbiased across-replicate variance; `None` when reps = 1.
    pub empirical_variance: Option<f64>,
    /// Mean squared error against the true target ATE.
    pub mse: f64,
    /// Standard error of `mean`; `None` when reps = 1.
    pub monte_carlo_standard_error: Option<f64>,
    /// Replicates whose diagnostics showed an empty stratum or arm.
    pub degenerate_reps: u64,
}

/// Result of [`run_monte_carlo`]: one [`EstimatorStats`] per requested
/// estimator, in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub n: u64,
    pub m: u64,
    pub reps: u64,
    pub seed: u64,
    pub true_ate: f64,
    pub stats: Vec<EstimatorStats>,
}

impl McReport {
    pub fn stats_for(&self, tag: EstimatorTag) -> Option<&EstimatorStats> {
        self.stats.iter().find(|s| s.tag == tag)
    }
}

/// Normal-theory standard error of an across-replicate variance estimate:
/// var · sqrt(2/(reps − 1)).
pub fn variance_mc_se(variance: f64, reps: u64) -> f64 {
    variance * math::sqrt(2.0 / (reps as f64 - 1.0))
}

/// The RNG stream for one replicate: ChaCha keyed by the experiment seed,
/// with the replicate index as the stream counter.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Derives an independent sub-experiment seed from (seed, index); a
/// splitmix64 step, so grid points of a sweep get unrelated key material.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Prebuilt samplers for one spec.
struct Samplers {
    trial: WeightedIndex<f64>,
    target: WeightedIndex<f64>,
}

impl Samplers {
    fn new(spec: &DgpSpec) -> Self {
        Samplers {
            trial: WeightedIndex::new(spec.p_r().iter().copied())
                .expect("valid spec has a nonempty, nonnegative p_R"),
            target: WeightedIndex::new(spec.p_t().iter().copied())
                .expect("valid spec has a nonempty, nonnegative p_T"),
        }
    }
}

fn draw_trial(spec: &DgpSpec, sampler: &WeightedIndex<f64>, n: u64, rng: &mut impl Rng) -> TrialSample {
    let n = n as usize;
    let mut x = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = sampler.sample(rng);
        let o = &spec.outcomes()[xi];
        let treated = rng.random::<f64>() < spec.pi()[xi];
        let (mean, var) = if treated { (o.mean1, o.var1) } else { (o.mean0, o.var0) };
        let z: f64 = rng.sample(StandardNormal);
        x.push(StratumId(xi as u32));
        a.push(treated);
        y.push(mean + math::sqrt(var) * z);
    }
    TrialSample::new(x, a, y)
}

fn draw_target(sampler: &WeightedIndex<f64>, m: u64, rng: &mut impl Rng) -> TargetSample {
    let x = (0..m).map(|_| StratumId(sampler.sample(rng) as u32)).collect();
    TargetSample::new(x)
}

/// Draws a trial sample: X i.i.d. from p_R, A | X = x Bernoulli(π(x)),
/// Y from the observed arm's Gaussian outcome model.
pub fn sample_trial(spec: &DgpSpec, n: u64, rng: &mut impl Rng) -> TrialSample {
    assert!(n >= 1);
    let sampler =
        WeightedIndex::new(spec.p_r().iter().copied()).expect("valid spec has a nonempty, nonnegative p_R");
    draw_trial(spec, &sampler, n, rng)
}

/// Draws a target sample: X i.i.d. from p_T.
pub fn sample_target(spec: &DgpSpec, m: u64, rng: &mut impl Rng) -> TargetSample {
    assert!(m >= 1);
    let sampler =
        WeightedIndex::new(spec.p_t().iter().copied()).expect("valid spec has a nonempty, nonnegative p_T");
    draw_target(&sampler, m, rng)
}

/// A coarsening of the sampled support for estimators that adjust on a
/// subset of the covariates: joint stratum ids map onto a smaller support
/// with its own probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentView {
    /// joint id → adjusted id; length equals the sampling spec's support.
    pub map: Vec<StratumId>,
    pub support_size: usize,
    /// Projected trial-population probabilities.
    pub p_r: Vec<f64>,
    /// Projected target-population probabilities.
    pub p_t: Vec<f64>,
    /// Treatment probability per adjusted stratum; the projection must not
    /// mix treatment probabilities.
    pub pi: Vec<f64>,
}

impl AdjustmentView {
    fn project_trial(&self, sample: &TrialSample) -> TrialSample {
        TrialSample {
            x: sample.x.iter().map(|x| self.map[x.index()]).collect(),
            a: sample.a.clone(),
            y: sample.y.clone(),
        }
    }

    fn project_target(&self, sample: &TargetSample) -> TargetSample {
        TargetSample { x: sample.x.iter().map(|x| self.map[x.index()]).collect() }
    }
}

/// What one estimator sees: the (possibly coarsened) support and its
/// probability vectors.
struct EvalContext<'a> {
    spec: &'a DgpSpec,
    view: Option<&'a AdjustmentView>,
}

impl EvalContext<'_> {
    fn support_size(&self) -> usize {
        self.view.map_or(self.spec.support_size(), |v| v.support_size)
    }

    fn p_t(&self) -> &[f64] {
        self.view.map_or(self.spec.p_t(), |v| &v.p_t)
    }

    fn p_r(&self) -> &[f64] {
        self.view.map_or(self.spec.p_r(), |v| &v.p_r)
    }

    fn pi(&self) -> &[f64] {
        self.view.map_or(self.spec.pi(), |v| &v.pi)
    }

    fn evaluate(
        &self,
        tag: EstimatorTag,
        trial: &TrialSample,
        target: Option<&TargetSample>,
    ) -> Result<Estimate, EstimatorError> {
        let k = self.support_size();
        match tag {
            EstimatorTag::Ht => estimators::horvitz_thompson(trial, self.pi()[0]),
            EstimatorTag::Dm => Ok(estimators::difference_in_means(trial)),
            EstimatorTag::Ps => estimators::post_stratification(trial, k),
            EstimatorTag::IpswOracle => {
                // per-stratum oracle weights from the (projected) probabilities
                let weights: Vec<f64> = (0..k).map(|i| self.p_t()[i] / self.p_r()[i]).collect();
                let mut terms = Vec::with_capacity(trial.len());
                for i in 0..trial.len() {
                    let x = trial.x[i].index();
                    let pi = self.pi()[x];
                    let ht = if trial.a[i] { trial.y[i] / pi } else { -trial.y[i] / (1.0 - pi) };
                    terms.push(weights[x] * ht);
                }
                Ok(Estimate {
                    value: math::pairwise_sum(&terms) / trial.len() as f64,
                    tag,
                    diagnostics: Default::default(),
                })
            }
            EstimatorTag::IpswSemi => estimators::ipsw_semi_oracle(trial, self.p_t(), self.pi()),
            EstimatorTag::IpswEst => {
                estimators::ipsw_estimated(trial, target.expect("target required"), self.pi(), k)
            }
            EstimatorTag::IpswSemiPihat => estimators::ipsw_semi_oracle_pihat(trial, self.p_t()),
            EstimatorTag::IpswEstPihat => {
                estimators::ipsw_estimated_pihat(trial, target.expect("target required"), k)
            }
        }
    }
}

/// Constant-π Horvitz-Thompson needs one π for the whole trial; reject
/// setups where the (possibly projected) π varies if HT is requested.
fn check_ht_constant_pi(pi: &[f64], tags: &[EstimatorTag]) -> Result<(), SimulateError> {
    if tags.contains(&EstimatorTag::Ht) {
        let pi0 = pi[0];
        if pi.iter().any(|&p| p != pi0) {
            return Err(SimulateError::InvalidConfig("ht requires a constant treatment probability"));
        }
    }
    Ok(())
}

fn validate_config(cfg: &McConfig) -> Result<Vec<EstimatorTag>, SimulateError> {
    if cfg.reps < 1 {
        return Err(SimulateError::InvalidConfig("reps must be >= 1"));
    }
    if cfg.n < 1 {
        return Err(SimulateError::InvalidConfig("n must be >= 1"));
    }
    if cfg.estimators.is_empty() {
        return Err(SimulateError::InvalidConfig("at least one estimator is required"));
    }
    let mut tags: Vec<EstimatorTag> = Vec::new();
    for &t in &cfg.estimators {
        if !tags.contains(&t) {
            tags.push(t);
        }
    }
    if tags.iter().any(|t| t.needs_target()) && cfg.m < 1 {
        return Err(SimulateError::InvalidConfig("m must be >= 1 for estimated-p_T variants"));
    }
    Ok(tags)
}

/// One replicate: draw fresh samples, evaluate every requested estimator.
fn run_rep(
    spec: &DgpSpec,
    samplers: &Samplers,
    cfg: &McConfig,
    tags: &[EstimatorTag],
    view: Option<&AdjustmentView>,
    needs_target: bool,
    rep: u64,
) -> Result<Vec<(f64, bool)>, SimulateError> {
    let mut rng = rep_rng(cfg.seed, rep);
    let trial = draw_trial(spec, &samplers.trial, cfg.n, &mut rng);
    let target = needs_target.then(|| draw_target(&samplers.target, cfg.m, &mut rng));
    let (trial, target) = match view {
        Some(v) => (v.project_trial(&trial), target.map(|t| v.project_target(&t))),
        None => (trial, target),
    };
    let ctx = EvalContext { spec, view };
    tags.iter()
        .map(|&tag| {
            ctx.evaluate(tag, &trial, target.as_ref())
                .map(|e| (e.value, e.diagnostics.is_degenerate()))
                .map_err(|source| SimulateError::Estimator { rep, source })
        })
        .collect()
}

fn collect_reps(
    spec: &DgpSpec,
    samplers: &Samplers,
    cfg: &McConfig,
    tags: &[EstimatorTag],
    view: Option<&AdjustmentView>,
    needs_target: bool,
) -> Result<Vec<Vec<(f64, bool)>>, SimulateError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| run_rep(spec, samplers, cfg, tags, view, needs_target, rep))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.reps).map(|rep| run_rep(spec, samplers, cfg, tags, view, needs_target, rep)).collect()
    }
}

/// Runs the experiment with estimators evaluated on a coarsened adjustment
/// set. Sampling always follows `spec`; `view` only changes what the
/// estimators see.
pub fn run_monte_carlo_adjusted(
    spec: &DgpSpec,
    cfg: &McConfig,
    view: Option<&AdjustmentView>,
) -> Result<McReport, SimulateError> {
    let tags = validate_config(cfg)?;
    check_ht_constant_pi(view.map_or(spec.pi(), |v| &v.pi), &tags)?;
    let needs_target = tags.iter().any(|t| t.needs_target());
    let samplers = Samplers::new(spec);
    let per_rep = collect_reps(spec, &samplers, cfg, &tags, view, needs_target)?;

    let true_ate = spec.true_ate();
    let reps = cfg.reps;
    let mut stats = Vec::with_capacity(tags.len());
    let mut values = vec![0.0f64; reps as usize];
    let mut sq_err = vec![0.0f64; reps as usize];
    for (j, &tag) in tags.iter().enumerate() {
        let mut degenerate = 0u64;
        for (r, rep_vals) in per_rep.iter().enumerate() {
            let (v, degen) = rep_vals[j];
            values[r] = v;
            let d = v - true_ate;
            sq_err[r] = d * d;
            degenerate += degen as u64;
        }
        let mean = math::pairwise_sum(&values) / reps as f64;
        let mse = math::pairwise_sum(&sq_err) / reps as f64;
        let (variance, se) = if reps > 1 {
            let centered: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
            let var = math::pairwise_sum(&centered) / (reps as f64 - 1.0);
            (Some(var), Some(math::sqrt(var / reps as f64)))
        } else {
            (None, None)
        };
        stats.push(EstimatorStats {
            tag,
            mean,
            bias_vs_true_ate: mean - true_ate,
            empirical_variance: variance,
            mse,
            monte_carlo_standard_error: se,
            degenerate_reps: degenerate,
        });
    }
    Ok(McReport { n: cfg.n, m: cfg.m, reps, seed: cfg.seed, true_ate, stats })
}

/// Runs the experiment: per replicate, fresh trial and target samples and
/// one evaluation of every requested estimator.
pub fn run_monte_carlo(spec: &DgpSpec, cfg: &McConfig) -> Result<McReport, SimulateError> {
    run_monte_carlo_adjusted(spec, cfg, None)
}

/// How m tracks n along a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepRegime {
    /// m held constant: the λ = 0 regime as n grows.
    FixedM(u64),
    /// m = round(λ n), λ finite and positive.
    Ratio(f64),
    /// m = ∞: estimated-p_T variants are replaced by their semi-oracle
    /// counterparts, which are exactly the m → ∞ estimators.
    RatioInfinite,
}

/// One grid point of [`regime_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: u64,
    pub m: TargetSize,
    pub estimator: EstimatorTag,
    pub variance: f64,
    pub scaled_variance: f64,
    /// Corollary value of min(n,m)·Var in this regime.
    pub theory_asymptote: f64,
}

fn sweep_asymptote(spec: &DgpSpec, regime: SweepRegime, tag: EstimatorTag) -> f64 {
    let pihat = matches!(tag, EstimatorTag::IpswSemiPihat | EstimatorTag::IpswEstPihat);
    if tag == EstimatorTag::IpswOracle {
        return v_o(spec);
    }
    let asy_regime = match (regime, tag) {
        (_, EstimatorTag::IpswSemi | EstimatorTag::IpswSemiPihat) => AsymptoticRegime::Infinite,
        (SweepRegime::FixedM(_), _) => AsymptoticRegime::Zero,
        (SweepRegime::Ratio(l), _) => AsymptoticRegime::Ratio(l),
        (SweepRegime::RatioInfinite, _) => AsymptoticRegime::Infinite,
    };
    asymptotic_variance(spec, asy_regime, pihat)
}

/// Monte Carlo variance along a grid of trial sizes under one m-regime,
/// with the matching asymptote on every row.
pub fn regime_sweep(
    spec: &DgpSpec,
    n_grid: &[u64],
    regime: SweepRegime,
    estimators: &[EstimatorTag],
    reps: u64,
    seed: u64,
) -> Result<Vec<SweepRow>, SimulateError> {
    if n_grid.is_empty() {
        return Err(SimulateError::InvalidConfig("n grid must be nonempty"));
    }
    if estimators.iter().any(|t| {
        !matches!(
            t,
            EstimatorTag::IpswOracle
                | EstimatorTag::IpswSemi
                | EstimatorTag::IpswEst
                | EstimatorTag::IpswSemiPihat
                | EstimatorTag::IpswEstPihat
        )
    }) {
        return Err(SimulateError::InvalidConfig("sweep estimators must be IPSW variants"));
    }
    if let SweepRegime::Ratio(l) = regime {
        if !(l.is_finite() && l > 0.0) {
            return Err(SimulateError::InvalidConfig("ratio must be finite and positive"));
        }
    }

    // Under m = ∞ the estimated variants are their semi-oracle forms.
    let run_tags: Vec<EstimatorTag> = estimators
        .iter()
        .map(|&t| match (regime, t) {
            (SweepRegime::RatioInfinite, EstimatorTag::IpswEst) => EstimatorTag::IpswSemi,
            (SweepRegime::RatioInfinite, EstimatorTag::IpswEstPihat) => EstimatorTag::IpswSemiPihat,
            (_, t) => t,
        })
        .collect();

    let mut rows = Vec::new();
    for (i, &n) in n_grid.iter().enumerate() {
        let (m, m_out) = match regime {
            SweepRegime::FixedM(m) => (m, TargetSize::Finite(m)),
            SweepRegime::Ratio(l) => {
                let m = (math::round(l * n as f64) as u64).max(1);
                (m, TargetSize::Finite(m))
            }
            SweepRegime::RatioInfinite => (1, TargetSize::Infinite),
        };
        let cfg = McConfig {
            n,
            m,
            reps,
            seed: derive_seed(seed, i as u64),
            estimators: run_tags.clone(),
        };
        let report = run_monte_carlo(spec, &cfg)?;
        let min_nm = match m_out {
            TargetSize::Finite(m) => n.min(m),
            TargetSize::Infinite => n,
        };
        for stat in &report.stats {
            let variance =
                stat.empirical_variance.ok_or(SimulateError::InvalidConfig("reps must be >= 2 for a sweep"))?;
            rows.push(SweepRow {
                n,
                m: m_out,
                estimator: stat.tag,
                variance,
                scaled_variance: min_nm as f64 * variance,
                theory_asymptote: sweep_asymptote(spec, regime, stat.tag),
            });
        }
    }
    Ok(rows)
}

/// One grid point of [`inflation_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct InflationRow {
    pub shift_index: usize,
    pub theory_factor: f64,
    pub empirical_factor: f64,
    /// Conservative normal-theory standard error of the empirical factor
    /// (ignores the pairing between numerator and denominator).
    pub mc_se: f64,
}

/// Measures the variance inflation from adding an independent, shifted,
/// non-modifier binary-or-wider covariate `V` to the adjustment set.
///
/// Each grid point extends `base` with aux distributions (q_R, q_T), samples
/// trial and target data from the flattened (X, V) process, and evaluates
/// the completely estimated π̂-IPSW twice per replicate: adjusting on (X, V)
/// and on X alone. All grid points share the seed so their noise is paired.
pub fn inflation_experiment(
    base: &DgpSpec,
    shift_grid: &[(Vec<f64>, Vec<f64>)],
    n: u64,
    m: u64,
    reps: u64,
    seed: u64,
) -> Result<Vec<InflationRow>, SimulateError> {
    use crate::domain::{ExtendedDgpSpec, Stratum};
    use crate::theory::inflation_factor;

    if shift_grid.is_empty() {
        return Err(SimulateError::InvalidConfig("shift grid must be nonempty"));
    }
    if reps < 2 {
        return Err(SimulateError::InvalidConfig("reps must be >= 2"));
    }
    let mut rows = Vec::with_capacity(shift_grid.len());
    for (g, (q_r, q_t)) in shift_grid.iter().enumerate() {
        let aux: Vec<Stratum> = (0..q_r.len() as u32).map(Stratum::new).collect();
        let zero_shift = vec![0.0; base.support_size() * q_r.len()];
        let ext = ExtendedDgpSpec::new(base.clone(), aux, q_r.clone(), q_t.clone(), zero_shift)
            .map_err(|_| SimulateError::InvalidConfig("invalid (q_R, q_T) grid point"))?;
        let flat = ext.flatten();
        let theory_factor = inflation_factor(q_r, q_t)
            .map_err(|_| SimulateError::InvalidConfig("invalid (q_R, q_T) grid point"))?;

        // Adjusting on X alone = projecting the flattened sample back to X.
        let vk = ext.aux_len();
        let view = AdjustmentView {
            map: (0..flat.support_size()).map(|j| StratumId((j / vk) as u32)).collect(),
            support_size: base.support_size(),
            p_r: base.p_r().to_vec(),
            p_t: base.p_t().to_vec(),
            pi: base.pi().to_vec(),
        };

        let cfg = McConfig {
            n,
            m,
            reps,
            seed,
            estimators: vec![EstimatorTag::IpswEstPihat],
        };
        let with_v = run_monte_carlo(&flat, &cfg)?;
        let without_v = run_monte_carlo_adjusted(&flat, &cfg, Some(&view))?;
        let var_with = with_v.stats[0].empirical_variance.expect("reps >= 2");
        let var_without = without_v.stats[0].empirical_variance.expect("reps >= 2");
        let factor = var_with / var_without;
        rows.push(InflationRow {
            shift_index: g,
            theory_factor,
            empirical_factor: factor,
            mc_se: factor * math::sqrt(4.0 / (reps as f64 - 1.0)),
        });
    }
    Ok(rows)
}
