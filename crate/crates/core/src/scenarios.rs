//! Ready-made experimental setups: the two-stratum toy problem, its
//! extended-covariate variants, and a semi-synthetic critical-care model
//! with six categorical covariates.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{DgpSpec, DgpViolation, ExtendedDgpSpec, ExtendedDgpViolation, Stratum, StratumId, StratumOutcomeModel};
use crate::math;
use crate::simulate::AdjustmentView;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid process: {0:?}")]
    Dgp(Vec<DgpViolation>),
    #[error("invalid extended process: {0:?}")]
    Extended(Vec<ExtendedDgpViolation>),
}

impl From<Vec<DgpViolation>> for ScenarioError {
    fn from(v: Vec<DgpViolation>) -> Self {
        ScenarioError::Dgp(v)
    }
}

impl From<Vec<ExtendedDgpViolation>> for ScenarioError {
    fn from(v: Vec<ExtendedDgpViolation>) -> Self {
        ScenarioError::Extended(v)
    }
}

/// Parameters of the two-stratum toy problem: a binary covariate with a
/// strong trial/target shift and a heterogeneous treatment effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyParams {
    /// p_R(X = 1)
    pub p_r1: f64,
    /// p_T(X = 1)
    pub p_t1: f64,
    /// τ on the X = 1 stratum
    pub tau1: f64,
    /// τ on the X = 0 stratum
    pub tau0: f64,
    /// outcome variance on both strata and arms
    pub baseline_var: f64,
    pub pi: f64,
}

impl Default for ToyParams {
    fn default() -> Self {
        ToyParams { p_r1: 0.75, p_t1: 0.30, tau1: 10.0, tau0: 3.0, baseline_var: 1.0, pi: 0.5 }
    }
}

/// Builds the toy process: two strata, baseline centered on zero, τ(x)
/// carried entirely by the treated arm. Defaults give a trial ATE of 8.25
/// and a target ATE of 5.1.
pub fn toy_dgp(params: &ToyParams) -> Result<DgpSpec, ScenarioError> {
    for (name, p) in [("p_r1", params.p_r1), ("p_t1", params.p_t1)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(ScenarioError::InvalidParameter(alloc::format!("{name} must lie in (0, 1)")));
        }
    }
    let spec = DgpSpec::new(
        vec![Stratum::labeled(0, "X=0"), Stratum::labeled(1, "X=1")],
        vec![1.0 - params.p_r1, params.p_r1],
        vec![1.0 - params.p_t1, params.p_t1],
        vec![params.pi, params.pi],
        vec![
            StratumOutcomeModel::new(0.0, params.tau0, params.baseline_var, params.baseline_var),
            StratumOutcomeModel::new(0.0, params.tau1, params.baseline_var, params.baseline_var),
        ],
    )?;
    Ok(spec)
}

/// How the toy problem is extended with an independent auxiliary covariate.
#[derive(Debug, Clone, PartialEq)]
pub enum ToyExtendedMode {
    /// `V` is shifted between populations but does not modulate the
    /// treatment effect.
    ShiftedNonModifier { q_r: Vec<f64>, q_t: Vec<f64> },
    /// `V` modulates the treatment effect but has identical distributions;
    /// `tau_shift[v]` applies to every stratum and must be q-mean-zero.
    NonShiftedModifier { q: Vec<f64>, tau_shift: Vec<f64> },
}

impl ToyExtendedMode {
    /// Balanced trial distribution for a binary shifted covariate.
    pub fn balanced_binary(q_t: Vec<f64>) -> Self {
        ToyExtendedMode::ShiftedNonModifier { q_r: vec![0.5, 0.5], q_t }
    }

    /// Imbalanced trial distribution for a binary shifted covariate.
    pub fn imbalanced_binary(q_t: Vec<f64>) -> Self {
        ToyExtendedMode::ShiftedNonModifier { q_r: vec![0.25, 0.75], q_t }
    }
}

/// Extends the toy process with the auxiliary covariate of the given mode.
pub fn toy_extended_dgp(params: &ToyParams, mode: &ToyExtendedMode) -> Result<ExtendedDgpSpec, ScenarioError> {
    let base = toy_dgp(params)?;
    let (q_r, q_t, shift) = match mode {
        ToyExtendedMode::ShiftedNonModifier { q_r, q_t } => (q_r.clone(), q_t.clone(), vec![0.0; q_r.len()]),
        ToyExtendedMode::NonShiftedModifier { q, tau_shift } => (q.clone(), q.clone(), tau_shift.clone()),
    };
    let vk = q_r.len();
    let mut tau_shift = Vec::with_capacity(base.support_size() * vk);
    for _x in 0..base.support_size() {
        tau_shift.extend_from_slice(&shift);
    }
    let aux = (0..vk as u32).map(Stratum::new).collect();
    Ok(ExtendedDgpSpec::new(base, aux, q_r, q_t, tau_shift)?)
}

/// A grid of auxiliary-covariate distribution pairs (q_R, q_T).
pub type ShiftGrid = Vec<(Vec<f64>, Vec<f64>)>;

/// Binary-covariate shift grid: the trial keeps q_R = (q_r0, 1 − q_r0) and
/// the target moves mass toward the first level, q_T = (q_r0 + s, 1 − q_r0 − s).
pub fn binary_shift_grid(q_r0: f64, shifts: &[f64]) -> Result<ShiftGrid, ScenarioError> {
    if !(q_r0 > 0.0 && q_r0 < 1.0) {
        return Err(ScenarioError::InvalidParameter("q_r0 must lie in (0, 1)".into()));
    }
    let mut grid = Vec::with_capacity(shifts.len());
    for &s in shifts {
        let q_t0 = q_r0 + s;
        if !(0.0..=1.0).contains(&q_t0) {
            return Err(ScenarioError::InvalidParameter(alloc::format!(
                "shift {s} pushes q_T outside [0, 1]"
            )));
        }
        grid.push((vec![q_r0, 1.0 - q_r0], vec![q_t0, 1.0 - q_t0]));
    }
    Ok(grid)
}

/// One categorical covariate of the semi-synthetic model: its name, level
/// count, and a marginal distribution per population.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub name: &'static str,
    pub p_r: Vec<f64>,
    pub p_t: Vec<f64>,
}

impl Factor {
    pub fn levels(&self) -> usize {
        self.p_r.len()
    }
}

/// Synthetic non-shifted effect modifier appended to the covariate set.
#[derive(Debug, Clone, PartialEq)]
pub struct XSupModifier {
    /// Level distribution, identical in both populations.
    pub q: Vec<f64>,
    /// Additive treatment-effect shift per level; must be q-mean-zero.
    pub tau_shift: Vec<f64>,
}

impl Default for XSupModifier {
    fn default() -> Self {
        XSupModifier { q: vec![0.2; 5], tau_shift: vec![-20.0, -10.0, 0.0, 10.0, 20.0] }
    }
}

/// Parameters of the semi-synthetic critical-care model: marginal tables
/// for the six covariates in each population, the heteroscedastic noise
/// scale per time-to-treatment level, and the trial's treatment
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiSynthParams {
    pub glasgow_r: Vec<f64>,
    pub glasgow_t: Vec<f64>,
    pub gender_r: Vec<f64>,
    pub gender_t: Vec<f64>,
    pub pupil_r: Vec<f64>,
    pub pupil_t: Vec<f64>,
    pub age_r: Vec<f64>,
    pub age_t: Vec<f64>,
    pub blood_pressure_r: Vec<f64>,
    pub blood_pressure_t: Vec<f64>,
    pub time_to_treatment_r: Vec<f64>,
    pub time_to_treatment_t: Vec<f64>,
    /// Noise standard deviation per time-to-treatment level; nondecreasing.
    pub noise_scale: Vec<f64>,
    pub pi: f64,
    /// Optional synthetic non-shifted effect modifier.
    pub x_sup: Option<XSupModifier>,
}

impl Default for SemiSynthParams {
    fn default() -> Self {
        SemiSynthParams {
            // strongly shifted, affects the baseline only
            glasgow_r: vec![0.5, 0.3, 0.2],
            glasgow_t: vec![0.2, 0.3, 0.5],
            gender_r: vec![0.7, 0.3],
            gender_t: vec![0.65, 0.35],
            // no role in the outcome model
            pupil_r: vec![0.6, 0.3, 0.1],
            pupil_t: vec![0.5, 0.35, 0.15],
            age_r: vec![0.3, 0.5, 0.2],
            age_t: vec![0.25, 0.45, 0.3],
            // effect modifier, moderately shifted
            blood_pressure_r: vec![0.3, 0.5, 0.2],
            blood_pressure_t: vec![0.2, 0.5, 0.3],
            // effect modifier; the target treats earlier than the trial
            time_to_treatment_r: vec![0.1, 0.2, 0.3, 0.4],
            time_to_treatment_t: vec![0.4, 0.3, 0.2, 0.1],
            noise_scale: vec![2.0, 6.0, 10.0, 14.0],
            pi: 0.5,
            x_sup: None,
        }
    }
}

/// The names of the factors whose marginals shift the treatment effect;
/// adjusting on them is sufficient for generalization.
pub const MINIMAL_ADJUSTMENT_SET: [&str; 2] = ["time_to_treatment", "blood_pressure"];

/// A built semi-synthetic process: the flat spec over the joint support and
/// the factor grid mapping joint ids back to covariate levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiSynthetic {
    pub spec: DgpSpec,
    pub factors: Vec<Factor>,
}

impl SemiSynthetic {
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.factors.len()];
        for i in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.factors[i + 1].levels();
        }
        strides
    }

    /// 1-based level of `factor` within the joint stratum id.
    pub fn level_of(&self, joint: StratumId, factor: &str) -> usize {
        let idx = self.factors.iter().position(|f| f.name == factor).expect("unknown factor");
        let strides = self.strides();
        (joint.index() / strides[idx]) % self.factors[idx].levels() + 1
    }

    /// Estimator-side view adjusting only on the named factors. Projected
    /// probabilities are fiber sums of the joint spec, so they are exact
    /// for dependent joints too.
    pub fn adjustment_view(&self, factor_names: &[&str]) -> Result<AdjustmentView, ScenarioError> {
        let mut selected = Vec::new();
        for name in factor_names {
            let idx = self
                .factors
                .iter()
                .position(|f| f.name == *name)
                .ok_or_else(|| ScenarioError::InvalidParameter(alloc::format!("unknown factor {name}")))?;
            if selected.contains(&idx) {
                return Err(ScenarioError::InvalidParameter(alloc::format!("factor {name} repeated")));
            }
            selected.push(idx);
        }
        if selected.is_empty() {
            return Err(ScenarioError::InvalidParameter("adjustment set must be nonempty".into()));
        }
        let strides = self.strides();
        let support: usize = selected.iter().map(|&i| self.factors[i].levels()).product();
        let joint_k = self.spec.support_size();
        let mut map = Vec::with_capacity(joint_k);
        for joint in 0..joint_k {
            let mut id = 0usize;
            for &i in &selected {
                let level = (joint / strides[i]) % self.factors[i].levels();
                id = id * self.factors[i].levels() + level;
            }
            map.push(StratumId(id as u32));
        }
        let mut p_r = vec![0.0; support];
        let mut p_t = vec![0.0; support];
        for joint in 0..joint_k {
            p_r[map[joint].index()] += self.spec.p_r()[joint];
            p_t[map[joint].index()] += self.spec.p_t()[joint];
        }
        Ok(AdjustmentView { map, support_size: support, p_r, p_t, pi: vec![self.spec.pi()[0]; support] })
    }
}

fn check_marginal(name: &str, p_r: &[f64], p_t: &[f64]) -> Result<(), ScenarioError> {
    if p_r.len() != p_t.len() || p_r.is_empty() {
        return Err(ScenarioError::InvalidParameter(alloc::format!("{name} marginals must match in length")));
    }
    for (pop, v) in [("trial", p_r), ("target", p_t)] {
        let sum = math::pairwise_sum(v);
        if math::abs(sum - 1.0) > 1e-12 {
            return Err(ScenarioError::InvalidParameter(alloc::format!(
                "{name} {pop} marginal sums to {sum}"
            )));
        }
        if v.iter().any(|&p| p < 0.0) {
            return Err(ScenarioError::InvalidParameter(alloc::format!("{name} {pop} marginal is negative")));
        }
    }
    for lvl in 0..p_r.len() {
        // support inclusion factor-by-factor implies it for the product
        if p_t[lvl] > 0.0 && p_r[lvl] == 0.0 {
            return Err(ScenarioError::InvalidParameter(alloc::format!(
                "{name} level {lvl} has target mass but no trial mass"
            )));
        }
    }
    Ok(())
}

fn semi_synth_factors(params: &SemiSynthParams) -> Result<Vec<Factor>, ScenarioError> {
    let mut factors = vec![
        Factor { name: "glasgow", p_r: params.glasgow_r.clone(), p_t: params.glasgow_t.clone() },
        Factor { name: "gender", p_r: params.gender_r.clone(), p_t: params.gender_t.clone() },
        Factor { name: "pupil", p_r: params.pupil_r.clone(), p_t: params.pupil_t.clone() },
        Factor { name: "age", p_r: params.age_r.clone(), p_t: params.age_t.clone() },
        Factor {
            name: "blood_pressure",
            p_r: params.blood_pressure_r.clone(),
            p_t: params.blood_pressure_t.clone(),
        },
        Factor {
            name: "time_to_treatment",
            p_r: params.time_to_treatment_r.clone(),
            p_t: params.time_to_treatment_t.clone(),
        },
    ];
    if params.glasgow_r.len() != 3
        || params.gender_r.len() != 2
        || params.pupil_r.len() != 3
        || params.age_r.len() != 3
        || params.blood_pressure_r.len() != 3
        || params.time_to_treatment_r.len() != 4
    {
        return Err(ScenarioError::InvalidParameter(
            "expected levels: glasgow 3, gender 2, pupil 3, age 3, blood_pressure 3, time_to_treatment 4"
                .into(),
        ));
    }
    for f in &factors {
        check_marginal(f.name, &f.p_r, &f.p_t)?;
    }
    if params.noise_scale.len() != params.time_to_treatment_r.len() {
        return Err(ScenarioError::InvalidParameter("noise_scale needs one entry per TTT level".into()));
    }
    if params.noise_scale.windows(2).any(|w| w[1] < w[0]) {
        return Err(ScenarioError::InvalidParameter("noise_scale must be nondecreasing in TTT".into()));
    }
    if let Some(xs) = &params.x_sup {
        check_marginal("x_sup", &xs.q, &xs.q)?;
        if xs.tau_shift.len() != xs.q.len() {
            return Err(ScenarioError::InvalidParameter("x_sup tau_shift needs one entry per level".into()));
        }
        let mean: f64 = xs.q.iter().zip(&xs.tau_shift).map(|(q, s)| q * s).sum();
        if math::abs(mean) > 1e-9 {
            return Err(ScenarioError::InvalidParameter("x_sup tau_shift must be q-mean-zero".into()));
        }
        factors.push(Factor { name: "x_sup", p_r: xs.q.clone(), p_t: xs.q.clone() });
    }
    Ok(factors)
}

/// Outcome model of the semi-synthetic design, with 1-based level
/// encodings: baseline 10 − glasgow − 5·girl, treatment effect
/// 15(6 − ttt) + 3(bp − 1)², noise scale indexed by ttt.
fn semi_synth_outcome(levels: &[usize], params: &SemiSynthParams) -> StratumOutcomeModel {
    let glasgow = levels[0] as f64;
    let girl = (levels[1] == 2) as u8 as f64;
    let bp = levels[4] as f64;
    let ttt = levels[5];
    let mean0 = 10.0 - glasgow - 5.0 * girl;
    let mut tau = 15.0 * (6.0 - ttt as f64) + 3.0 * (bp - 1.0) * (bp - 1.0);
    if let Some(xs) = &params.x_sup {
        tau += xs.tau_shift[levels[6] - 1];
    }
    let sd = params.noise_scale[ttt - 1];
    StratumOutcomeModel::new(mean0, mean0 + tau, sd * sd, sd * sd)
}

/// Builds the semi-synthetic process with independent marginals per
/// population, flattened over the joint support in factor order (last
/// factor fastest).
pub fn semi_synthetic_dgp(params: &SemiSynthParams) -> Result<SemiSynthetic, ScenarioError> {
    let factors = semi_synth_factors(params)?;
    let joint_k: usize = factors.iter().map(Factor::levels).product();
    let mut p_r = Vec::with_capacity(joint_k);
    let mut p_t = Vec::with_capacity(joint_k);
    let mut outcomes = Vec::with_capacity(joint_k);
    let mut levels = vec![1usize; factors.len()];
    for joint in 0..joint_k {
        let mut rem = joint;
        for i in (0..factors.len()).rev() {
            levels[i] = rem % factors[i].levels() + 1;
            rem /= factors[i].levels();
        }
        let mut pr = 1.0;
        let mut pt = 1.0;
        for (i, f) in factors.iter().enumerate() {
            pr *= f.p_r[levels[i] - 1];
            pt *= f.p_t[levels[i] - 1];
        }
        p_r.push(pr);
        p_t.push(pt);
        outcomes.push(semi_synth_outcome(&levels, params));
    }
    let pi = vec![params.pi; joint_k];
    let spec = DgpSpec::from_parts(p_r, p_t, pi, outcomes)?;
    // dropping zero-mass joints would desync the id map
    assert_eq!(spec.support_size(), joint_k, "all joint strata must carry trial mass");
    Ok(SemiSynthetic { spec, factors })
}

/// Builds the semi-synthetic process from an explicit joint table: one row
/// per covariate combination with its trial and target probabilities.
/// Rows are (1-based levels in factor order, p_R, p_T); omitted
/// combinations get zero mass in both populations.
pub fn semi_synthetic_from_joint(
    params: &SemiSynthParams,
    rows: &[(Vec<usize>, f64, f64)],
) -> Result<SemiSynthetic, ScenarioError> {
    let factors = semi_synth_factors(params)?;
    let joint_k: usize = factors.iter().map(Factor::levels).product();
    let mut p_r = vec![0.0; joint_k];
    let mut p_t = vec![0.0; joint_k];
    for (levels, pr, pt) in rows {
        if levels.len() != factors.len() {
            return Err(ScenarioError::InvalidParameter(alloc::format!(
                "joint row has {} levels, expected {}",
                levels.len(),
                factors.len()
            )));
        }
        let mut joint = 0usize;
        for (i, f) in factors.iter().enumerate() {
            if levels[i] < 1 || levels[i] > f.levels() {
                return Err(ScenarioError::InvalidParameter(alloc::format!(
                    "level {} out of range for {}",
                    levels[i],
                    f.name
                )));
            }
            joint = joint * f.levels() + (levels[i] - 1);
        }
        p_r[joint] += pr;
        p_t[joint] += pt;
    }
    let mut outcomes = Vec::with_capacity(joint_k);
    let mut levels = vec![1usize; factors.len()];
    for joint in 0..joint_k {
        let mut rem = joint;
        for i in (0..factors.len()).rev() {
            levels[i] = rem % factors[i].levels() + 1;
            rem /= factors[i].levels();
        }
        outcomes.push(semi_synth_outcome(&levels, params));
    }
    let pi = vec![params.pi; joint_k];
    // zero-mass combinations are dropped here, so the factor-level map no
    // longer applies to the dense ids; keep the original id order by
    // construction (DgpSpec::new re-densifies in order).
    let spec = DgpSpec::from_parts(p_r, p_t, pi, outcomes)?;
    if spec.support_size() != joint_k {
        // rebuild factor-consistent dense mapping: the projected views need
        // every joint id present; require full support instead
        return Err(ScenarioError::InvalidParameter(
            "joint table must give trial mass to every combination; zero-mass rows are unsupported".into(),
        ));
    }
    Ok(SemiSynthetic { spec, factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory;

    #[test]
    fn toy_defaults_reproduce_headline_numbers() {
        let spec = toy_dgp(&ToyParams::default()).unwrap();
        assert!((spec.trial_ate() - 8.25).abs() < 1e-12);
        assert!((spec.true_ate() - 5.1).abs() < 1e-12);
        assert_eq!(spec.min_p_r(), 0.25);
        assert!(spec.validate().is_empty());
    }

    #[test]
    fn toy_rejects_degenerate_probability() {
        assert!(toy_dgp(&ToyParams { p_r1: 1.0, ..ToyParams::default() }).is_err());
    }

    #[test]
    fn extended_modes_have_declared_structure() {
        let params = ToyParams::default();
        let shifted = toy_extended_dgp(
            &params,
            &ToyExtendedMode::ShiftedNonModifier { q_r: vec![0.25, 0.75], q_t: vec![0.5, 0.5] },
        )
        .unwrap();
        assert!(shifted.is_non_modifier());
        assert!(!shifted.is_non_shifted());

        let modifier = toy_extended_dgp(
            &params,
            &ToyExtendedMode::NonShiftedModifier { q: vec![0.5, 0.5], tau_shift: vec![-2.0, 2.0] },
        )
        .unwrap();
        assert!(modifier.is_non_shifted());
        let report = theory::effect_modifier_reduction(&modifier).unwrap();
        assert!((report.variance_reduction - 8.32).abs() < 1e-12);
    }

    #[test]
    fn imbalanced_inflation_beats_balanced() {
        let q_t = vec![0.5, 0.5];
        let balanced = match ToyExtendedMode::balanced_binary(q_t.clone()) {
            ToyExtendedMode::ShiftedNonModifier { q_r, q_t } => {
                theory::inflation_factor(&q_r, &q_t).unwrap()
            }
            _ => unreachable!(),
        };
        let imbalanced = match ToyExtendedMode::imbalanced_binary(q_t) {
            ToyExtendedMode::ShiftedNonModifier { q_r, q_t } => {
                theory::inflation_factor(&q_r, &q_t).unwrap()
            }
            _ => unreachable!(),
        };
        assert!(imbalanced > balanced);
        assert_eq!(balanced, 1.0);
    }

    #[test]
    fn shift_grid_validates() {
        let grid = binary_shift_grid(0.25, &[0.0, 0.1, 0.25]).unwrap();
        assert_eq!(grid.len(), 3);
        assert_eq!(grid[2].1, vec![0.5, 0.5]);
        assert!(binary_shift_grid(0.25, &[0.8]).is_err());
    }

    #[test]
    fn semi_synth_spec_shape() {
        let built = semi_synthetic_dgp(&SemiSynthParams::default()).unwrap();
        assert_eq!(built.spec.support_size(), 3 * 2 * 3 * 3 * 3 * 4);
        assert!(built.spec.validate().is_empty());
    }

    #[test]
    fn semi_synth_outcome_formula_hand_case() {
        // glasgow=1, boy, ttt=1, bp=2: baseline 9, effect 75 + 3 = 78
        let built = semi_synthetic_dgp(&SemiSynthParams::default()).unwrap();
        let joint = built
            .spec
            .strata()
            .iter()
            .map(|s| s.id)
            .find(|&id| {
                built.level_of(id, "glasgow") == 1
                    && built.level_of(id, "gender") == 1
                    && built.level_of(id, "time_to_treatment") == 1
                    && built.level_of(id, "blood_pressure") == 2
            })
            .unwrap();
        let o = built.spec.outcome(joint);
        assert_eq!(o.mean0, 9.0);
        assert_eq!(o.cate(), 78.0);
        assert_eq!(o.var0, 4.0);
    }

    #[test]
    fn cate_depends_only_on_modifiers() {
        let built = semi_synthetic_dgp(&SemiSynthParams::default()).unwrap();
        for id in built.spec.strata().iter().map(|s| s.id) {
            let ttt = built.level_of(id, "time_to_treatment") as f64;
            let bp = built.level_of(id, "blood_pressure") as f64;
            let expect = 15.0 * (6.0 - ttt) + 3.0 * (bp - 1.0) * (bp - 1.0);
            assert_eq!(built.spec.cate(id), expect);
        }
    }

    #[test]
    fn adjustment_view_projects_marginals() {
        let built = semi_synthetic_dgp(&SemiSynthParams::default()).unwrap();
        let view = built.adjustment_view(&MINIMAL_ADJUSTMENT_SET).unwrap();
        assert_eq!(view.support_size, 4 * 3);
        // projected p_R(ttt, bp) = p_R(ttt) p_R(bp)
        let params = SemiSynthParams::default();
        for ttt in 0..4 {
            for bp in 0..3 {
                let id = ttt * 3 + bp;
                let expect = params.time_to_treatment_r[ttt] * params.blood_pressure_r[bp];
                assert!((view.p_r[id] - expect).abs() < 1e-12);
            }
        }
        let total: f64 = view.p_t.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn x_sup_extends_support_and_cate() {
        let params = SemiSynthParams { x_sup: Some(XSupModifier::default()), ..Default::default() };
        let built = semi_synthetic_dgp(&params).unwrap();
        assert_eq!(built.spec.support_size(), 648 * 5);
        // marginal CATE over x_sup equals the (ttt, bp) CATE
        let view = built.adjustment_view(&["time_to_treatment", "blood_pressure"]).unwrap();
        let mut marginal = vec![0.0; view.support_size];
        let mut mass = vec![0.0; view.support_size];
        for joint in 0..built.spec.support_size() {
            let a = view.map[joint].index();
            marginal[a] += built.spec.p_t()[joint] * built.spec.cate(StratumId(joint as u32));
            mass[a] += built.spec.p_t()[joint];
        }
        for a in 0..view.support_size {
            let ttt = (a / 3 + 1) as f64;
            let bp = (a % 3 + 1) as f64;
            let expect = 15.0 * (6.0 - ttt) + 3.0 * (bp - 1.0) * (bp - 1.0);
            assert!((marginal[a] / mass[a] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn joint_table_roundtrip() {
        let params = SemiSynthParams::default();
        let built = semi_synthetic_dgp(&params).unwrap();
        // reconstruct the independent joint as an explicit table
        let rows: Vec<(Vec<usize>, f64, f64)> = (0..built.spec.support_size())
            .map(|j| {
                let id = StratumId(j as u32);
                let levels = vec![
                    built.level_of(id, "glasgow"),
                    built.level_of(id, "gender"),
                    built.level_of(id, "pupil"),
                    built.level_of(id, "age"),
                    built.level_of(id, "blood_pressure"),
                    built.level_of(id, "time_to_treatment"),
                ];
                (levels, built.spec.p_r()[j], built.spec.p_t()[j])
            })
            .collect();
        let rebuilt = semi_synthetic_from_joint(&params, &rows).unwrap();
        assert_eq!(rebuilt.spec, built.spec);
    }
}
