//! Float math routed through `libm` so results are bit-identical across
//! platforms and the crate builds without `std`.

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// `base^n` by binary exponentiation for integer exponents. Switches to
/// `exp(n ln base)` only when the exponent is enormous.
pub(crate) fn powi(base: f64, n: u64) -> f64 {
    if n > (1 << 40) {
        return exp(n as f64 * ln(base));
    }
    let mut acc = 1.0;
    let mut b = base;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

/// Sum of `f64` values by pairwise reduction; the result depends only on the
/// order of the input slice, not on how callers produced it.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        let mut s = 0.0;
        for &v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powi_matches_naive() {
        let mut acc = 1.0;
        for k in 0..=30u64 {
            assert!((powi(0.9, k) - acc).abs() < 1e-15);
            acc *= 0.9;
        }
        assert_eq!(powi(0.5, 0), 1.0);
    }

    #[test]
    fn ln_gamma_factorials() {
        // lgamma(n+1) = ln(n!)
        let mut ln_fact = 0.0;
        for n in 1..20u64 {
            ln_fact += ln(n as f64);
            assert!((ln_gamma(n as f64 + 1.0) - ln_fact).abs() < 1e-10);
        }
    }

    #[test]
    fn pairwise_sum_matches_exact_on_integers() {
        let xs: alloc::vec::Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
