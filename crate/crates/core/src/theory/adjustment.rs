//! Asymptotic-variance effect of adding a covariate `V` to the adjustment
//! set, for `V` independent of `X` in both populations.
//!
//! Two clean cases exist. A shifted non-modifier multiplies the asymptotic
//! variance by Σ_v q_T(v)²/q_R(v) ≥ 1. A non-shifted modifier subtracts
//! Σ_x (p_T(x)²/p_R(x)) Var_q[tau_shift(x, ·)]: adjusting on `V` removes the
//! modifier's contribution from the per-stratum outcome variance. Both
//! closed forms agree exactly with evaluating the variance constant on the
//! flattened (X, V) spec versus the V-collapsed spec.

use alloc::vec::Vec;

use crate::domain::ExtendedDgpSpec;
use crate::math;

use super::variance::v_so;
use super::TheoryError;

/// Variance comparison between adjusting on `X` alone and on `(X, V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentSetReport {
    /// Σ_v q_T(v)²/q_R(v); 1 exactly when V is not shifted.
    pub inflation_factor: f64,
    /// Σ_x (p_T(x)²/p_R(x)) Var_q[tau_shift(x, ·)]; 0 when V is not a
    /// modifier.
    pub variance_reduction: f64,
    /// Asymptotic variance constant when adjusting on X only.
    pub base_asymptotic_variance: f64,
    /// Asymptotic variance constant when adjusting on (X, V).
    pub extended_asymptotic_variance: f64,
}

/// Multiplier on the asymptotic variance from adding an independent shifted
/// non-modifier covariate: Σ_v q_T(v)²/q_R(v). Always ≥ 1 by Jensen.
pub fn inflation_factor(q_r: &[f64], q_t: &[f64]) -> Result<f64, TheoryError> {
    if q_r.len() != q_t.len() || q_r.is_empty() {
        return Err(TheoryError::ParameterOutOfRange("q_R and q_T must be nonempty and equal-length"));
    }
    let mut terms = Vec::with_capacity(q_r.len());
    for v in 0..q_r.len() {
        if q_t[v] > 0.0 && q_r[v] <= 0.0 {
            return Err(TheoryError::SupportViolation(v as u32));
        }
        if q_t[v] > 0.0 {
            terms.push(q_t[v] * q_t[v] / q_r[v]);
        }
    }
    Ok(math::pairwise_sum(&terms))
}

/// Variance subtracted by adjusting on an independent, non-shifted effect
/// modifier, with the before/after asymptotic variance constants.
///
/// Requires q_R = q_T and a q-mean-zero tau_shift per stratum. The base
/// constant is the semi-oracle V_so of the V-collapsed spec; the extended
/// constant equals base − reduction and is cross-checked against V_so of
/// the flattened spec by the test suite.
pub fn effect_modifier_reduction(ext: &ExtendedDgpSpec) -> Result<AdjustmentSetReport, TheoryError> {
    if !ext.is_non_shifted() {
        return Err(TheoryError::NotNonShifted);
    }
    let q = ext.q_t();
    let base_spec = ext.base();
    for x in 0..base_spec.support_size() {
        let mean: f64 = (0..ext.aux_len()).map(|v| q[v] * ext.tau_shift(x, v)).sum();
        if math::abs(mean) > 1e-9 {
            return Err(TheoryError::TauShiftNotCentered(x as u32));
        }
    }
    let mut reduction = 0.0;
    for x in 0..base_spec.support_size() {
        let var_shift: f64 = (0..ext.aux_len())
            .map(|v| {
                let s = ext.tau_shift(x, v);
                q[v] * s * s
            })
            .sum();
        let p_t = base_spec.p_t()[x];
        reduction += p_t * p_t / base_spec.p_r()[x] * var_shift;
    }
    let base = v_so(&ext.collapse());
    Ok(AdjustmentSetReport {
        inflation_factor: 1.0,
        variance_reduction: reduction,
        base_asymptotic_variance: base,
        extended_asymptotic_variance: base - reduction,
    })
}

/// Report for either clean case, dispatched on the extended spec's shape.
pub fn adjustment_report(ext: &ExtendedDgpSpec) -> Result<AdjustmentSetReport, TheoryError> {
    if ext.is_non_modifier() {
        let factor = inflation_factor(ext.q_r(), ext.q_t())?;
        let base = v_so(ext.base());
        Ok(AdjustmentSetReport {
            inflation_factor: factor,
            variance_reduction: 0.0,
            base_asymptotic_variance: base,
            extended_asymptotic_variance: base * factor,
        })
    } else {
        effect_modifier_reduction(ext)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DgpSpec, Stratum, StratumOutcomeModel};
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
    fn inflation_factor_cases() {
        assert_eq!(inflation_factor(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 1.0);
        let f = inflation_factor(&[0.25, 0.75], &[0.5, 0.5]).unwrap();
        assert!((f - (1.0 + 1.0 / 3.0)).abs() < 1e-12);
        assert!(matches!(
            inflation_factor(&[0.0, 1.0], &[0.5, 0.5]),
            Err(TheoryError::SupportViolation(0))
        ));
    }

    #[test]
    fn inflation_factor_at_least_one() {
        // Jensen: Σ q_T²/q_R ≥ 1 with equality iff q_T = q_R
        let grids = [
            (vec![0.2, 0.8], vec![0.4, 0.6]),
            (vec![0.1, 0.2, 0.7], vec![0.3, 0.3, 0.4]),
            (vec![0.5, 0.5], vec![0.9, 0.1]),
        ];
        for (q_r, q_t) in grids {
            assert!(inflation_factor(&q_r, &q_t).unwrap() >= 1.0);
        }
    }

    #[test]
    fn non_modifier_flattening_matches_factor() {
        // v_so on the flattened spec equals factor × v_so on the base spec
        let ext = crate::domain::ExtendedDgpSpec::new(
            toy(),
            vec![Stratum::new(0), Stratum::new(1)],
            vec![0.25, 0.75],
            vec![0.5, 0.5],
            vec![0.0; 4],
        )
        .unwrap();
        let report = adjustment_report(&ext).unwrap();
        let flat_v_so = v_so(&ext.flatten());
        assert!((report.extended_asymptotic_variance - flat_v_so).abs() < 1e-10);
        assert!((report.inflation_factor - (1.0 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn modifier_reduction_matches_flattened_difference() {
        let ext = crate::domain::ExtendedDgpSpec::new(
            toy(),
            vec![Stratum::new(0), Stratum::new(1)],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![-2.0, 2.0, -2.0, 2.0],
        )
        .unwrap();
        let report = effect_modifier_reduction(&ext).unwrap();
        // Var_q[(-2,+2)] = 4 against weights Σ p_T²/p_R = 2.08
        assert!((report.variance_reduction - 8.32).abs() < 1e-12);
        let flat = v_so(&ext.flatten());
        let collapsed = v_so(&ext.collapse());
        assert!((report.base_asymptotic_variance - collapsed).abs() < 1e-10);
        assert!((report.extended_asymptotic_variance - flat).abs() < 1e-10);
        assert!((collapsed - flat - report.variance_reduction).abs() < 1e-10);
        assert!(report.extended_asymptotic_variance <= report.base_asymptotic_variance);
    }

    #[test]
    fn zero_shift_modifier_reduces_nothing() {
        let ext = crate::domain::ExtendedDgpSpec::new(
            toy(),
            vec![Stratum::new(0), Stratum::new(1)],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![0.0; 4],
        )
        .unwrap();
        let report = effect_modifier_reduction(&ext).unwrap();
        assert_eq!(report.variance_reduction, 0.0);
        assert_eq!(report.base_asymptotic_variance, report.extended_asymptotic_variance);
    }

    #[test]
    fn shifted_spec_rejected_by_reduction() {
        let ext = crate::domain::ExtendedDgpSpec::new(
            toy(),
            vec![Stratum::new(0), Stratum::new(1)],
            vec![0.25, 0.75],
            vec![0.5, 0.5],
            vec![0.0; 4],
        )
        .unwrap();
        assert!(matches!(effect_modifier_reduction(&ext), Err(TheoryError::NotNonShifted)));
    }
}
