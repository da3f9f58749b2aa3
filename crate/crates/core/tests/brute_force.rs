//! Enumeration gates for the closed-form bias/variance machinery.
//!
//! Every exact formula (and every multinomial identity it leans on) must
//! match complete enumeration of trial stratum assignments, treatment
//! assignments, and target draws with analytic outcome moments.

use ipsw_core::domain::{DgpSpec, StratumOutcomeModel};
use ipsw_core::estimators::EstimatorTag;
use ipsw_core::theory;
use ipsw_testkit::{binomial_expectation, enumerate_mean_var, random_spec, spec_rng};

fn toy() -> DgpSpec {
    DgpSpec::from_parts(
        vec![0.25, 0.75],
        vec![0.7, 0.3],
        vec![0.5, 0.5],
        vec![
            StratumOutcomeModel::new(0.0, 3.0, 1.0, 1.0),
            StratumOutcomeModel::new(0.0, 10.0, 1.0, 1.0),
        ],
    )
    .unwrap()
}

/// An asymmetric three-stratum spec exercising per-stratum π and uncentered
/// baselines.
fn crooked() -> DgpSpec {
    DgpSpec::from_parts(
        vec![0.2, 0.5, 0.3],
        vec![0.5, 0.1, 0.4],
        vec![0.3, 0.5, 0.7],
        vec![
            StratumOutcomeModel::new(1.0, 3.0, 0.5, 2.0),
            StratumOutcomeModel::new(-2.0, 0.5, 1.5, 0.25),
            StratumOutcomeModel::new(0.0, -1.0, 2.0, 1.0),
        ],
    )
    .unwrap()
}

#[test]
fn semi_oracle_bias_matches_enumeration() {
    for spec in [toy(), crooked()] {
        for n in 1..=4u64 {
            let (mean, _) = enumerate_mean_var(&spec, n as usize, 1, EstimatorTag::IpswSemi);
            let bias = mean - spec.true_ate();
            assert!(
                (bias - theory::bias_semi_oracle(&spec, n)).abs() < 1e-10,
                "n={n}: {bias} vs {}",
                theory::bias_semi_oracle(&spec, n)
            );
        }
    }
}

#[test]
fn estimated_bias_equals_semi_oracle_bias() {
    let spec = toy();
    for (n, m) in [(1usize, 1usize), (2, 2), (3, 2)] {
        let (mean, _) = enumerate_mean_var(&spec, n, m, EstimatorTag::IpswEst);
        let bias = mean - spec.true_ate();
        assert!((bias - theory::bias_semi_oracle(&spec, n as u64)).abs() < 1e-10);
    }
}

#[test]
fn pihat_bias_matches_enumeration() {
    for spec in [toy(), crooked()] {
        for n in 1..=4usize {
            let (mean, _) = enumerate_mean_var(&spec, n, 1, EstimatorTag::IpswEstPihat);
            let bias = mean - spec.true_ate();
            assert!(
                (bias - theory::bias_pihat(&spec, n as u64)).abs() < 1e-10,
                "n={n}: {bias} vs {}",
                theory::bias_pihat(&spec, n as u64)
            );
        }
    }
}

#[test]
fn semi_oracle_variance_matches_enumeration() {
    for spec in [toy(), crooked()] {
        for n in 1..=5u64 {
            let (_, var) = enumerate_mean_var(&spec, n as usize, 1, EstimatorTag::IpswSemi);
            let exact = theory::var_semi_oracle_exact(&spec, n).unwrap();
            assert!((var - exact).abs() < 1e-10, "n={n}: {var} vs {exact}");
        }
    }
}

#[test]
fn estimated_variance_matches_enumeration() {
    for spec in [toy(), crooked()] {
        for n in 1..=4u64 {
            for m in 1..=3u64 {
                let (_, var) = enumerate_mean_var(&spec, n as usize, m as usize, EstimatorTag::IpswEst);
                let exact = theory::var_estimated_exact(&spec, n, m).unwrap();
                assert!((var - exact).abs() < 1e-10, "n={n} m={m}: {var} vs {exact}");
            }
        }
    }
}

#[test]
fn pihat_variance_matches_enumeration() {
    for spec in [toy(), crooked()] {
        for n in 1..=4u64 {
            for m in 1..=3u64 {
                let (_, var) =
                    enumerate_mean_var(&spec, n as usize, m as usize, EstimatorTag::IpswEstPihat);
                let exact = theory::var_pihat_exact(&spec, n, m).unwrap();
                assert!((var - exact).abs() < 1e-10, "n={n} m={m}: {var} vs {exact}");
            }
        }
    }
}

#[test]
fn semi_pihat_variance_matches_enumeration() {
    for spec in [toy(), crooked()] {
        for n in 1..=5u64 {
            let (_, var) = enumerate_mean_var(&spec, n as usize, 1, EstimatorTag::IpswSemiPihat);
            let exact = theory::var_semi_pihat_exact(&spec, n).unwrap();
            assert!((var - exact).abs() < 1e-10, "n={n}: {var} vs {exact}");
        }
    }
}

#[test]
fn single_stratum_pihat_cases_match_enumeration() {
    // K = 1 collapses the π̂ variants onto the difference-in-means
    let spec = DgpSpec::from_parts(
        vec![1.0],
        vec![1.0],
        vec![0.4],
        vec![StratumOutcomeModel::new(1.0, 2.0, 1.0, 0.5)],
    )
    .unwrap();
    for n in 1..=6u64 {
        let (_, var) = enumerate_mean_var(&spec, n as usize, 1, EstimatorTag::IpswEstPihat);
        let exact = theory::var_pihat_exact(&spec, n, 1).unwrap();
        assert!((var - exact).abs() < 1e-10, "n={n}");
        // m is irrelevant when p̂_T is degenerate
        let exact_m5 = theory::var_pihat_exact(&spec, n, 5).unwrap();
        assert!((exact - exact_m5).abs() < 1e-12);
    }
}

#[test]
fn variance_formulas_match_enumeration_on_random_specs() {
    let mut rng = spec_rng(2024);
    for round in 0..12 {
        let spec = random_spec(&mut rng, 3);
        let (_, var_semi) = enumerate_mean_var(&spec, 3, 1, EstimatorTag::IpswSemi);
        assert!(
            (var_semi - theory::var_semi_oracle_exact(&spec, 3).unwrap()).abs() < 1e-10,
            "round {round}"
        );
        let (_, var_est) = enumerate_mean_var(&spec, 3, 2, EstimatorTag::IpswEst);
        assert!((var_est - theory::var_estimated_exact(&spec, 3, 2).unwrap()).abs() < 1e-10);
        let (_, var_pihat) = enumerate_mean_var(&spec, 3, 2, EstimatorTag::IpswEstPihat);
        assert!((var_pihat - theory::var_pihat_exact(&spec, 3, 2).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn binomial_utilities_match_direct_enumeration() {
    for n in 1..=20u64 {
        for p in [0.1, 0.3, 0.5, 0.9] {
            let trunc = binomial_expectation(n, p, |z| if z > 0 { 1.0 / z as f64 } else { 0.0 });
            assert!(
                (theory::e_recip_trunc_binomial(n, p).unwrap() - trunc).abs() < 1e-12,
                "n={n} p={p}"
            );
            let one_plus = binomial_expectation(n, p, |z| 1.0 / (z as f64 + 1.0));
            assert!((theory::e_recip_one_plus_binomial(n, p).unwrap() - one_plus).abs() < 1e-12);
        }
    }
}

#[test]
fn pihat_inverse_bound_dominates_enumerated_expectation() {
    for n in 1..=15u64 {
        for pi in [0.3, 0.5, 0.7] {
            let expect =
                binomial_expectation(n, pi, |z| if z > 0 { n as f64 / z as f64 } else { 0.0 });
            for alpha in [0.1, 0.25, 0.4] {
                let bound = theory::pihat_inverse_bound(n, pi, alpha).unwrap();
                assert!(expect <= bound, "n={n} pi={pi} alpha={alpha}: {expect} > {bound}");
            }
        }
    }
}

#[test]
fn multinomial_empty_indicator_identity() {
    // P(Z_x = 0, Z_y = 0) = (1 − p_x − p_y)^n against direct enumeration
    // over stratum assignments of a 3-category multinomial.
    let p = [0.2, 0.5, 0.3];
    for n in 1..=6u32 {
        let mut both_empty = 0.0;
        let k = 3usize.pow(n);
        for code in 0..k {
            let mut c = code;
            let mut prob = 1.0;
            let mut seen = [false; 3];
            for _ in 0..n {
                let d = c % 3;
                c /= 3;
                prob *= p[d];
                seen[d] = true;
            }
            if !seen[0] && !seen[1] {
                both_empty += prob;
            }
        }
        let closed = (1.0f64 - p[0] - p[1]).powi(n as i32);
        assert!((both_empty - closed).abs() < 1e-12, "n={n}");
    }
}

#[test]
fn multinomial_generating_identity() {
    // E[a^{Z_x} b^{Z_y}] = (a p_x + b p_y + 1 − p_x − p_y)^n by enumeration.
    let p = [0.2, 0.5, 0.3];
    let (a, b) = (0.6f64, 0.35f64);
    for n in 1..=6u32 {
        let mut moment = 0.0;
        let k = 3usize.pow(n);
        for code in 0..k {
            let mut c = code;
            let mut prob = 1.0;
            let mut z = [0u32; 3];
            for _ in 0..n {
                let d = c % 3;
                c /= 3;
                prob *= p[d];
                z[d] += 1;
            }
            moment += prob * a.powi(z[0] as i32) * b.powi(z[1] as i32);
        }
        let closed = (a * p[0] + b * p[1] + 1.0 - p[0] - p[1]).powi(n as i32);
        assert!((moment - closed).abs() < 1e-12, "n={n}: {moment} vs {closed}");
    }
}
