//! Log-domain binomial coefficients.
//!
//! Dicke-state normalisations involve `C(N, n) / 2^N`, which under- or
//! overflows long before `N` reaches the sizes of interest. Everything here
//! works on logarithms, using Loader's saddle-point decomposition so that the
//! large `(k + 1/2) ln k - k` pieces cancel analytically instead of
//! numerically.

use std::f64::consts::{LN_2, PI};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Exact factorials up to 20! fit in an `f64` without rounding error beyond
/// the final conversion.
fn small_factorial(k: u64) -> f64 {
    debug_assert!(k <= 20);
    (1..=k).product::<u64>() as f64
}

/// Stirling-series remainder `ln k! - [(k + 1/2) ln k - k + ln sqrt(2 pi)]`.
pub fn stirling_error(k: u64) -> f64 {
    if k == 0 {
        // limit convention: ln 0! - ln sqrt(2 pi) with the k ln k terms dropped
        return -HALF_LN_2PI;
    }
    if k <= 15 {
        let kf = k as f64;
        return small_factorial(k).ln() - (kf + 0.5) * kf.ln() + kf - HALF_LN_2PI;
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let kf = k as f64;
    let k2 = kf * kf;
    if k > 500 {
        (S0 - S1 / k2) / kf
    } else if k > 80 {
        (S0 - (S1 - S2 / k2) / k2) / kf
    } else if k > 35 {
        (S0 - (S1 - (S2 - S3 / k2) / k2) / k2) / kf
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / k2) / k2) / k2) / k2) / kf
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated without cancellation when
/// `x` is close to `np`.
pub fn deviance(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln k!`.
pub fn ln_factorial(k: u64) -> f64 {
    if k <= 20 {
        return small_factorial(k).ln();
    }
    let kf = k as f64;
    (kf + 0.5) * kf.ln() - kf + HALF_LN_2PI + stirling_error(k)
}

/// `ln(C(n, k) / 2^n)`, the log of the symmetric binomial probability mass.
///
/// Accurate to a few ulps in relative terms for all `n` that fit the
/// Stirling table, which is what lets `ln N_JM` cancel cleanly.
pub fn ln_half_binomial_pmf(n: u64, k: u64) -> f64 {
    assert!(k <= n, "ln_half_binomial_pmf: k > n");
    if k == 0 || k == n {
        return -(n as f64) * LN_2;
    }
    let nf = n as f64;
    let kf = k as f64;
    let half = 0.5 * nf;
    let lc = stirling_error(n)
        - stirling_error(k)
        - stirling_error(n - k)
        - deviance(kf, half)
        - deviance(nf - kf, half);
    let lf = (2.0 * PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n, "ln_binomial: k > n");
    if k == 0 || k == n {
        return 0.0;
    }
    if let Some(c) = exact_binomial(n, k) {
        if c < (1u128 << 53) {
            return (c as f64).ln();
        }
    }
    ln_half_binomial_pmf(n, k) + n as f64 * LN_2
}

/// `C(n, k)` in exact integer arithmetic, `None` on overflow.
pub fn exact_binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn factorials_match_exact_products() {
        for k in 0..=20u64 {
            assert_eq!(ln_factorial(k), small_factorial(k).ln());
        }
        // ln 30! = 74.658236348830164...
        assert!(rel(ln_factorial(30), 74.658_236_348_830_16) < 1e-15);
    }

    #[test]
    fn stirling_branches_are_continuous() {
        // the series branches must agree with the direct formula at their seams
        for k in [16u64, 35, 36, 80, 81, 500, 501] {
            let kf = k as f64;
            let direct = ln_factorial(k) - (kf + 0.5) * kf.ln() + kf - HALF_LN_2PI;
            assert!((stirling_error(k) - direct).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn ln_binomial_against_exact_integers() {
        for n in 0..=120u64 {
            for k in 0..=n {
                let exact = exact_binomial(n, k).unwrap() as f64;
                assert!(rel(ln_binomial(n, k).exp(), exact) < 1e-12, "C({n},{k})");
            }
        }
    }

    #[test]
    fn deviance_near_and_far() {
        // x == np gives exactly zero; far from np reduces to the direct formula
        assert_eq!(deviance(5.0, 5.0), 0.0);
        let (x, np) = (3.0, 10.0);
        assert!((deviance(x, np) - (x * (x / np).ln() + np - x)).abs() < 1e-15);
        let (x, np) = (10.3, 10.0);
        assert!(rel(deviance(x, np), x * (x / np).ln() + np - x) < 1e-12);
    }

    #[test]
    #[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
    fn half_pmf_frozen_high_precision_values() {
        // 40-digit reference values of -2 ln N_JM = ln(C(N, n) / 2^N)
        let cases = [
            (2u64, 1u64, 0.346_573_590_279_972_654_71),
            (10, 5, 0.701_021_359_044_014_893_72),
            (100, 37, 2.957_635_677_249_997_203_1),
            (1000, 500, 1.839_959_496_047_064_670_9),
            (1001, 3, 337.454_411_186_393_699_29),
            (10000, 5000, 2.415_493_269_316_388_566_9),
            (10000, 7500, 656.403_758_012_443_724_58),
            (10000, 1, 3461.130_732_613_738_455_7),
        ];
        for (n, k, ln_norm) in cases {
            let got = -0.5 * ln_half_binomial_pmf(n, k);
            assert!(rel(got, ln_norm) < 1e-13, "N={n} n={k}: {got} vs {ln_norm}");
        }
    }
}
