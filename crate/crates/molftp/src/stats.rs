//! Scalar numerics shared by the scoring statistics.
//!
//! Everything here is deterministic, allocation-light `f64` math: the
//! complementary error function, chi-square survival probabilities for the
//! 2x2 statistics, and a log-space binomial tail for the triplet vote. The
//! routines are self-contained so tests can check them against independent
//! reference implementations.

/// Floor applied to p-values before taking `-log10`; caps score magnitudes.
pub const P_FLOOR: f64 = 1e-300;

/// Largest magnitude a signed score can take: `-log10(P_FLOOR)`.
pub const SCORE_CAP: f64 = 300.0;

/// Sign convention used by every signed score: `sign(0) == 0`.
///
/// `f64::signum` maps `0.0` to `1.0`, which would give null tables a
/// spurious direction, so scoring code must use this helper instead.
#[must_use]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `-log10(max(p, P_FLOOR))`: the unsigned score magnitude for a p-value.
#[must_use]
pub fn capped_neg_log10(p: f64) -> f64 {
    -p.max(P_FLOOR).log10()
}

/// Signed significance score: `sgn(direction) * capped_neg_log10(p)`.
///
/// Balanced evidence (direction 0, or p = 1 with a negative direction)
/// yields plain `0.0`, never `-0.0`, so serialized score maps stay tidy.
#[must_use]
pub fn signed_score(direction: f64, p: f64) -> f64 {
    let s = sign(direction) * capped_neg_log10(p);
    if s == 0.0 {
        0.0
    } else {
        s
    }
}

/// Complementary error function.
///
/// Power series below `x = 2`, modified-Lentz continued fraction above.
/// Relative error stays below 1e-13 across `[0, 27.5]`, after which the
/// result underflows toward 0 and the p-value floor takes over anyway.
#[must_use]
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// erf(x) via the scaled Maclaurin series
/// `erf(x) = (2/sqrt(pi)) * x * exp(-x^2) * sum_n (2x^2)^n / (2n+1)!!`,
/// whose terms are all positive (no cancellation). Converges quickly for
/// `x < 2`.
fn erf_series(x: f64) -> f64 {
    let xx = x * x;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= 2.0 * xx / f64::from(2 * n + 1);
        sum += term;
        if term < sum * 1e-17 || n > 200 {
            break;
        }
    }
    core::f64::consts::FRAC_2_SQRT_PI * x * (-xx).exp() * sum
}

/// erfc(x) for `x >= 2` via the Laplace continued fraction
/// `erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + (2/2)/(x + ...)))`
/// evaluated with the modified Lentz algorithm.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-308;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0_f64;
    for n in 1..=300 {
        let a = f64::from(n) * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    let sqrt_pi = core::f64::consts::PI.sqrt();
    (-x * x).exp() / (sqrt_pi * f)
}

/// Survival probability of a chi-square distribution.
///
/// Only the two cases the statistics need are implemented: df=1
/// (`erfc(sqrt(x/2))`) and df=2 (`exp(-x/2)`), both exact closed forms.
///
/// # Panics
/// Panics on other degrees of freedom; that is a programming error, not a
/// data condition.
#[must_use]
pub fn chi_square_survival(x: f64, df: u32) -> f64 {
    assert!(x >= 0.0, "chi-square statistic must be non-negative");
    match df {
        1 => erfc((x / 2.0).sqrt()),
        2 => (-x / 2.0).exp(),
        _ => panic!("chi_square_survival supports df = 1 or 2, got {df}"),
    }
}

/// Natural log of the gamma function (Lanczos approximation, g = 7).
///
/// Absolute error on `ln(gamma)` is around 1e-14, which keeps log-space
/// binomial tails accurate to well past the tolerances used in tests.
#[must_use]
#[allow(clippy::excessive_precision)] // coefficients kept verbatim from the published table
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "ln_gamma defined here for positive arguments only");
    if x < 0.5 {
        // Reflection keeps the Lanczos series in its accurate range.
        let pi = core::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = 0.999_999_999_999_809_93_f64;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (z + (i as f64) + 1.0);
    }
    let t = z + 7.5;
    0.5 * (2.0 * core::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Upper tail `P[X >= m]` of `X ~ Binomial(n, 1/2)`, exact in log space.
///
/// Summation runs over the tail terms with a log-sum-exp reduction so the
/// result stays meaningful far below `f64` underflow of individual
/// unnormalized terms. Returns a value clamped into `[0, 1]`.
#[must_use]
pub fn binomial_half_tail(m: u64, n: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m > n {
        return 0.0;
    }
    let ln_half = -core::f64::consts::LN_2;
    // Log-probabilities of the tail terms; the maximum term sits at the
    // smallest k (the tail starts at or beyond the mode for every caller
    // that matters, but handle the general case by scanning).
    let mut terms = Vec::with_capacity((n - m + 1) as usize);
    let mut ln_c = ln_choose(n, m);
    terms.push(ln_c + (n as f64) * ln_half);
    let mut k = m;
    while k < n {
        // C(n, k+1) = C(n, k) * (n-k)/(k+1)
        ln_c += ((n - k) as f64).ln() - ((k + 1) as f64).ln();
        terms.push(ln_c + (n as f64) * ln_half);
        k += 1;
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max < -745.0 {
        // Even the largest term underflows; the caller's p-floor handles it.
        return 0.0;
    }
    let sum: f64 = terms.iter().map(|&t| (t - max).exp()).sum();
    (max + sum.ln()).exp().clamp(0.0, 1.0)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // reference values frozen at full printed precision
mod tests {
    use super::*;

    /// Relative-error assertion used for the frozen reference values.
    fn assert_rel(actual: f64, expected: f64, tol: f64) {
        let err = if expected == 0.0 {
            actual.abs()
        } else {
            ((actual - expected) / expected).abs()
        };
        assert!(
            err <= tol,
            "got {actual:e}, expected {expected:e}, rel err {err:e} > {tol:e}"
        );
    }

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(-0.0), 0.0);
        assert_eq!(sign(3.5), 1.0);
        assert_eq!(sign(-1e-12), -1.0);
    }

    #[test]
    fn capped_neg_log10_floors_at_300() {
        assert_eq!(capped_neg_log10(0.0), 300.0);
        assert_eq!(capped_neg_log10(1e-320), 300.0);
        assert_rel(capped_neg_log10(0.01), 2.0, 1e-15);
        assert_eq!(capped_neg_log10(1.0), 0.0);
    }

    // Reference values computed with mpmath at 30 significant digits.
    #[test]
    fn erfc_matches_high_precision_references() {
        let cases = [
            (0.01, 0.988_716_584_444_150_4),
            (0.1, 0.887_537_083_981_715_1),
            (0.25, 0.723_673_609_831_763_1),
            (0.5, 0.479_500_122_186_953_46),
            (0.75, 0.288_844_366_346_484_87),
            (1.0, 0.157_299_207_050_285_13),
            (1.5, 0.033_894_853_524_689_27),
            (1.9999, 4.679_802_092_970_608_5e-3),
            (2.0001, 4.675_668_695_803_344e-3),
            (2.5, 4.069_520_174_449_589_4e-4),
            (3.0, 2.209_049_699_858_544e-5),
            (4.0, 1.541_725_790_028_002e-8),
            (5.0, 1.537_459_794_428_035e-12),
            (7.0, 4.183_825_607_779_414_4e-23),
            (10.0, 2.088_487_583_762_544_7e-45),
            (12.0, 1.356_261_169_205_904_2e-64),
            (15.0, 7.212_994_172_451_206_6e-100),
            (20.0, 5.395_865_611_607_9e-176),
            (24.5, 4.749_361_264_067_379e-263),
            (26.0, 5.663_192_408_856_143e-296),
        ];
        for (x, expected) in cases {
            assert_rel(erfc(x), expected, 1e-12);
        }
        assert_rel(erfc(-0.5), 1.520_499_877_813_046_5, 1e-14);
        assert_rel(erfc(-2.0), 1.995_322_265_018_952_7, 1e-14);
        assert_eq!(erfc(0.0), 1.0);
    }

    #[test]
    fn erfc_is_monotone_and_bounded() {
        let mut prev = f64::INFINITY;
        let mut x = -5.0;
        while x <= 27.0 {
            let v = erfc(x);
            assert!((0.0..=2.0).contains(&v), "erfc({x}) = {v} out of range");
            assert!(v <= prev, "erfc not monotone at {x}");
            prev = v;
            x += 0.037;
        }
    }

    #[test]
    fn erfc_reflection_identity() {
        let mut x = 0.0;
        while x <= 3.0 {
            let lhs = erfc(x) + erfc(-x);
            assert!((lhs - 2.0).abs() < 1e-14, "reflection broke at {x}");
            x += 0.13;
        }
    }

    #[test]
    fn chi_square_survival_closed_forms() {
        // df=1 at the McNemar example statistic.
        assert_rel(chi_square_survival(3.2, 1), 0.073_638_270_120_302_65, 1e-12);
        // df=2 is a pure exponential.
        assert_rel(chi_square_survival(4.0, 2), (-2.0_f64).exp(), 1e-15);
        assert_eq!(chi_square_survival(0.0, 1), 1.0);
        assert_eq!(chi_square_survival(0.0, 2), 1.0);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        // ln(k!) for small k, where the factorial is exact.
        let mut fact = 1.0_f64;
        for k in 1..=20u32 {
            fact *= f64::from(k);
            assert_rel(ln_gamma(f64::from(k) + 1.0), fact.ln(), 1e-13);
        }
        assert_rel(ln_gamma(0.5), core::f64::consts::PI.sqrt().ln(), 1e-13);
    }

    // Reference tails computed with mpmath (exact rational summation).
    #[test]
    fn binomial_half_tail_matches_references() {
        assert_rel(binomial_half_tail(8, 8), 0.003_906_25, 1e-13);
        assert_rel(binomial_half_tail(1, 1), 0.5, 1e-14);
        assert_rel(binomial_half_tail(6, 10), 0.376_953_125, 1e-12);
        assert_rel(binomial_half_tail(5, 5), 0.031_25, 1e-13);
        assert_rel(binomial_half_tail(55, 100), 0.184_100_808_663_348_12, 1e-11);
        assert_rel(
            binomial_half_tail(75, 100),
            2.818_141_017_102_701_3e-7,
            1e-11,
        );
        assert_rel(
            binomial_half_tail(600, 1000),
            1.364_232_078_033_009_2e-10,
            1e-10,
        );
        assert_eq!(binomial_half_tail(0, 7), 1.0);
        assert_eq!(binomial_half_tail(9, 8), 0.0);
    }

    #[test]
    fn binomial_half_tail_monotone_in_threshold() {
        for n in [1u64, 2, 7, 33, 128] {
            let mut prev = 1.0;
            for m in 0..=n {
                let p = binomial_half_tail(m, n);
                // Slack covers log-sum-exp rounding over up to n terms.
                assert!(p <= prev + 1e-12, "tail not monotone at m={m}, n={n}");
                assert!((0.0..=1.0).contains(&p));
                prev = p;
            }
        }
    }
}
