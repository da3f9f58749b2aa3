//! Closed-form finite-sample and asymptotic properties of the IPSW family:
//! exact biases and variances for any (n, m), upper bounds on variance and
//! quadratic risk, asymptotic variances per sample-size regime, and the
//! variance effect of adding covariates to the adjustment set.

mod adjustment;
mod binomial;
mod variance;

pub use adjustment::{adjustment_report, effect_modifier_reduction, inflation_factor, AdjustmentSetReport};
pub use binomial::{e_recip_one_plus_binomial, e_recip_trunc_binomial, pihat_inverse_bound};
pub use variance::{
    asymptotic_variance, bias_pihat, bias_semi_oracle, risk_bound, theory_report, v_dm_stratum_finite,
    v_dm_stratum_infty, v_ht_stratum, v_o, v_so, v_so_tilde_infty, var_estimated_exact, var_pihat_exact,
    var_semi_oracle_exact, var_semi_pihat_exact, variance_bound,
};

use crate::estimators::EstimatorTag;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TheoryError {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(&'static str),
    #[error("estimator {0:?} does not take this (n, m) form")]
    VariantParameterMismatch(EstimatorTag),
    #[error("support inclusion violated at level {0}")]
    SupportViolation(u32),
    #[error("auxiliary covariate is shifted (q_R != q_T)")]
    NotNonShifted,
    #[error("tau_shift is not q_T-mean-zero on stratum {0}")]
    TauShiftNotCentered(u32),
}

/// Target sample size, with an explicit marker for the infinite-target
/// (semi-oracle) regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSize {
    Finite(u64),
    Infinite,
}

impl TargetSize {
    pub fn as_finite(self) -> Option<u64> {
        match self {
            TargetSize::Finite(m) => Some(m),
            TargetSize::Infinite => None,
        }
    }
}

/// The limit λ of m/n as both sample sizes grow. The endpoints are explicit
/// markers, not large or small floats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AsymptoticRegime {
    /// m grows slower than n (λ = 0): the target sample dominates.
    Zero,
    /// m/n → λ for a finite positive λ.
    Ratio(f64),
    /// m grows faster than n (λ = ∞): the trial dominates.
    Infinite,
}

impl AsymptoticRegime {
    pub fn new(lambda: f64) -> Result<Self, TheoryError> {
        if lambda == 0.0 {
            Ok(AsymptoticRegime::Zero)
        } else if lambda.is_infinite() && lambda > 0.0 {
            Ok(AsymptoticRegime::Infinite)
        } else if lambda.is_finite() && lambda > 0.0 {
            Ok(AsymptoticRegime::Ratio(lambda))
        } else {
            Err(TheoryError::ParameterOutOfRange("lambda must lie in [0, inf]"))
        }
    }

    /// The regime implied by a concrete (n, m) pair.
    pub fn from_sizes(n: u64, m: TargetSize) -> Self {
        match m {
            TargetSize::Finite(m) => AsymptoticRegime::Ratio(m as f64 / n as f64),
            TargetSize::Infinite => AsymptoticRegime::Infinite,
        }
    }
}

/// Closed-form properties of one estimator at one (n, m).
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub estimator: EstimatorTag,
    pub n: u64,
    pub m: TargetSize,
    /// Exact finite-sample bias E[τ̂] − τ.
    pub bias: f64,
    /// Exact finite-sample variance, when the variant has a closed form.
    pub variance_exact: Option<f64>,
    /// Printed upper bound on the variance.
    pub variance_bound: f64,
    /// Printed upper bound on the quadratic risk (exact risk for the
    /// oracle variant).
    pub risk_bound: f64,
    /// min(n,m)-scaled asymptotic variance in the regime implied by (n, m).
    pub asymptotic_variance: f64,
}
