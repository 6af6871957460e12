//! Standard normal special functions and a Mills ratio that stays finite in
//! the far upper tail.
//!
//! `erfc` and `erfcx` use W. J. Cody's rational Chebyshev approximations
//! (CALERF), which evaluate `exp(x²)·erfc(x)` directly for `x > 0.46875`, so
//! nothing underflows before the ratio is formed.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use crate::error::{Error, Result};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
/// 1/√(2π)
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// ½·ln(2π)
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

const SMALL: f64 = 0.46875;
// erfc(x) underflows to 0 beyond this point.
const ERFC_UNDERFLOW: f64 = 26.543;
// exp(x²) overflows below this point.
const ERFCX_OVERFLOW: f64 = -26.628_735_713_751_4;
// Above this, erfcx(x) = 1/(x√π) to machine precision.
const ERFCX_HUGE: f64 = 6.71e7;

const A: [f64; 5] = [
    3.161_123_743_870_565_6,
    113.864_154_151_050_16,
    377.485_237_685_302,
    3_209.377_589_138_469_5,
    0.185_777_706_184_603_15,
];
const B: [f64; 4] = [
    23.601_290_952_344_122,
    244.024_637_934_444_17,
    1_282.616_526_077_372_3,
    2_844.236_833_439_170_6,
];
const C: [f64; 9] = [
    0.564_188_496_988_670_1,
    8.883_149_794_388_376,
    66.119_190_637_141_63,
    298.635_138_197_400_1,
    881.952_221_241_769,
    1_712.047_612_634_070_6,
    2_051.078_377_826_071_6,
    1_230.339_354_797_997_2,
    2.153_115_354_744_038_5e-8,
];
const D: [f64; 8] = [
    15.744_926_110_709_835,
    117.693_950_891_312_5,
    537.181_101_862_009_9,
    1_621.389_574_566_690_2,
    3_290.799_235_733_459_7,
    4_362.619_090_143_247,
    3_439.367_674_143_721_6,
    1_230.339_354_803_749_4,
];
const P: [f64; 6] = [
    0.305_326_634_961_232_36,
    0.360_344_899_949_804_45,
    0.125_781_726_111_229_24,
    0.016_083_785_148_742_275,
    6.587_491_615_298_378e-4,
    0.016_315_387_137_302_097,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822,
    1.872_952_849_923_460_4,
    0.527_905_102_951_428_5,
    0.060_518_341_312_441_32,
    0.002_335_204_976_268_691_8,
];

/// erf(x)/x on |x| ≤ 0.46875, as a function of x².
fn erf_small_ratio(xsq: f64) -> f64 {
    let num = (((A[4] * xsq + A[0]) * xsq + A[1]) * xsq + A[2]) * xsq + A[3];
    let den = (((xsq + B[0]) * xsq + B[1]) * xsq + B[2]) * xsq + B[3];
    num / den
}

/// erfcx(y) for y > 0.46875.
fn erfcx_positive(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        (num + C[7]) / (den + D[7])
    } else if y < ERFCX_HUGE {
        let ysq = 1.0 / (y * y);
        let mut num = P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + P[i]) * ysq;
            den = (den + Q[i]) * ysq;
        }
        let r = ysq * (num + P[4]) / (den + Q[4]);
        (FRAC_1_SQRT_PI - r) / y
    } else {
        FRAC_1_SQRT_PI / y
    }
}

/// exp(-y²) with the argument split to keep relative accuracy for large y.
fn exp_neg_square(y: f64) -> f64 {
    let head = (y * 16.0).trunc() / 16.0;
    (-head * head).exp() * (-(y - head) * (y + head)).exp()
}

fn exp_square(x: f64) -> f64 {
    let head = (x * 16.0).trunc() / 16.0;
    (head * head).exp() * ((x - head) * (x + head)).exp()
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= SMALL {
        return 1.0 - x * erf_small_ratio(y * y);
    }
    let tail = if y >= ERFC_UNDERFLOW {
        0.0
    } else {
        erfcx_positive(y) * exp_neg_square(y)
    };
    if x < 0.0 {
        2.0 - tail
    } else {
        tail
    }
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// Saturates to `+∞` below x ≈ −26.63, where `exp(x²)` overflows.
pub fn erfcx(x: f64) -> f64 {
    let y = x.abs();
    if y <= SMALL {
        let xsq = y * y;
        return xsq.exp() * (1.0 - x * erf_small_ratio(xsq));
    }
    if x < 0.0 {
        if x < ERFCX_OVERFLOW {
            return f64::INFINITY;
        }
        2.0 * exp_square(x) - erfcx_positive(y)
    } else {
        erfcx_positive(y)
    }
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail 1 − Φ(z), accurate where Φ(z) rounds to 1.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// ln(1 − Φ(z)), finite for every finite z. The upper tail is formed in log
/// space from `erfcx`, so it never passes through an underflowed probability.
pub fn log_normal_sf(z: f64) -> f64 {
    let w = z * FRAC_1_SQRT_2;
    if w > 0.0 {
        erfcx(w).ln() - w * w - LN_2
    } else {
        (-0.5 * erfc(-w)).ln_1p()
    }
}

/// Inverse Mills ratio φ(z)/(1 − Φ(z)), evaluated as 2/(√(2π)·erfcx(z/√2)).
///
/// Where `erfcx` saturates (z < −37.66) the denominator 1 − Φ(z) is 1 to
/// machine precision and the density is used directly.
pub fn mills_ratio(z: f64) -> f64 {
    let w = z * FRAC_1_SQRT_2;
    if w < ERFCX_OVERFLOW {
        return normal_pdf(z) / normal_sf(z);
    }
    2.0 / ((2.0 * PI).sqrt() * erfcx(w))
}

/// A finite standardized argument `x·α / σ`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct StandardScore(f64);

impl StandardScore {
    pub fn new(z: f64) -> Result<Self> {
        if z.is_finite() {
            Ok(Self(z))
        } else {
            Err(Error::Domain(format!(
                "standard score must be finite, got {z}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn pdf(self) -> f64 {
        normal_pdf(self.0)
    }

    pub fn cdf(self) -> f64 {
        normal_cdf(self.0)
    }

    pub fn mills(self) -> f64 {
        mills_ratio(self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // exp(x²)·erfc(x) at 40 significant digits (mpmath).
    const ERFCX_REFERENCE: [(f64, f64); 16] = [
        (-5.5, 27_443_409_954_929.709_659),
        (-2.0, 108.940_904_389_977_97),
        (-0.3, 1.453_749_232_842_765_6),
        (0.1, 0.896_456_979_969_126_6),
        (0.46875, 0.632_069_689_249_556_1),
        (0.5, 0.615_690_344_192_925_9),
        (1.0, 0.427_583_576_155_807),
        (2.5, 0.210_806_364_061_143_58),
        (4.0, 0.136_999_457_625_061_4),
        (4.5, 0.122_484_804_273_841_42),
        (6.0, 0.092_776_567_800_538_35),
        (10.0, 0.056_140_992_743_822_59),
        (26.6, 0.021_195_178_159_166_13),
        (30.0, 0.018_795_888_861_416_75),
        (100.0, 0.005_641_613_782_989_433),
        (300.0, 0.001_880_621_497_378_064_5),
    ];

    fn asymptotic_erfcx(x: f64, terms: usize) -> f64 {
        let inv2 = 1.0 / (x * x);
        let coeffs = [1.0, -0.5, 0.75, -1.875];
        let series: f64 = coeffs[..terms]
            .iter()
            .enumerate()
            .map(|(k, c)| c * inv2.powi(k as i32))
            .sum();
        series / (x * PI.sqrt())
    }

    /// φ/(1 − Φ) with the subtraction done literally; loses ~eps/(1−Φ) relative.
    fn naive_mills(z: f64) -> f64 {
        normal_pdf(z) / (1.0 - normal_cdf(z))
    }

    /// φ divided by the directly evaluated upper tail.
    fn tail_mills(z: f64) -> f64 {
        normal_pdf(z) / normal_sf(z)
    }

    #[test]
    fn pdf_values() {
        assert_eq!(normal_pdf(0.0), 0.398_942_280_401_432_7);
        assert_eq!(normal_pdf(1.7), normal_pdf(-1.7));
        let far = normal_pdf(40.0);
        assert!(!far.is_nan() && far < 1e-300);
    }

    #[test]
    fn cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        let far = normal_cdf(-40.0);
        assert!((0.0..=1e-300).contains(&far));
        for i in -800..=800 {
            let z = i as f64 * 0.01;
            assert!(
                (normal_cdf(z) + normal_cdf(-z) - 1.0).abs() <= 1e-15,
                "z={z}"
            );
        }
    }

    #[test]
    fn cdf_is_monotone() {
        let mut prev = 0.0;
        for i in -4000..=4000 {
            let v = normal_cdf(i as f64 * 0.01);
            assert!(v >= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn erfcx_reference_points() {
        assert_eq!(erfcx(0.0), 1.0);
        for (x, want) in ERFCX_REFERENCE {
            let tol = if x.abs() <= 6.0 { 1e-12 } else { 1e-10 };
            assert_relative_eq!(erfcx(x), want, max_relative = tol);
        }
    }

    #[test]
    fn erfcx_matches_asymptotic_series_in_far_tail() {
        // At x = 30 the omitted 15/(8x⁶) term is 2.6e-9 relative, so the
        // three-term series needs one more term to serve as a 1e-10 oracle.
        assert_relative_eq!(erfcx(30.0), asymptotic_erfcx(30.0, 4), max_relative = 1e-10);
        assert_relative_eq!(erfcx(30.0), asymptotic_erfcx(30.0, 3), max_relative = 3e-9);
        for x in [60.0, 100.0, 300.0] {
            assert_relative_eq!(erfcx(x), asymptotic_erfcx(x, 3), max_relative = 1e-10);
        }
    }

    #[test]
    fn erfcx_negative_matches_naive_product() {
        let naive = (4.0f64).exp() * erfc(-2.0);
        assert_relative_eq!(erfcx(-2.0), naive, max_relative = 1e-14);
        assert_eq!(erfcx(-30.0), f64::INFINITY);
    }

    #[test]
    fn erfc_is_continuous_across_branches() {
        for x in [SMALL, 4.0] {
            let lo = erfc(x - 1e-12);
            let hi = erfc(x + 1e-12);
            assert_relative_eq!(lo, hi, max_relative = 1e-11);
        }
        assert_eq!(erfc(30.0), 0.0);
        assert_eq!(erfc(-30.0), 2.0);
    }

    #[test]
    fn mills_ratio_reference_points() {
        assert_relative_eq!(
            mills_ratio(0.0),
            0.797_884_560_802_865_4,
            max_relative = 1e-15
        );
        assert!((mills_ratio(-10.0) - normal_pdf(-10.0)).abs() < 1e-12);
        assert_relative_eq!(
            mills_ratio(-10.0),
            7.694_598_626_706_419e-23,
            max_relative = 1e-12
        );
        assert_relative_eq!(mills_ratio(40.0), 40.0 + 1.0 / 40.0, max_relative = 1e-3);
        for (z, want) in [
            (-3.0, 0.004_437_839_042_125_664),
            (1.5, 1.938_677_166_622_543_2),
            (3.0, 3.283_098_654_930_436_5),
            (8.0, 8.121_368_112_236_113),
            (20.0, 20.049_753_068_527_85),
            (100.0, 100.009_998_000_999_26),
            (300.0, 300.003_333_259_263_4),
        ] {
            assert_relative_eq!(mills_ratio(z), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn mills_matches_naive_ratio_where_naive_is_accurate() {
        for i in -800..=800 {
            let z = i as f64 * 0.01;
            assert_relative_eq!(mills_ratio(z), tail_mills(z), max_relative = 1e-9);
        }
        // Subtractive form: cancellation exceeds 1e-9 beyond z ≈ 5.2.
        for i in -800..=500 {
            let z = i as f64 * 0.01;
            assert_relative_eq!(mills_ratio(z), naive_mills(z), max_relative = 1e-9);
        }
    }

    #[test]
    fn mills_stays_finite_where_naive_breaks() {
        let mut z = 20.0;
        while z <= 300.0 {
            assert!(!naive_mills(z).is_finite(), "z={z}");
            assert!(mills_ratio(z).is_finite(), "z={z}");
            z += 0.5;
        }
    }

    #[test]
    fn mills_is_strictly_increasing() {
        let mut prev = mills_ratio(-30.0);
        for i in -2999..=30000 {
            let z = i as f64 * 0.01;
            let m = mills_ratio(z);
            assert!(m > prev, "z={z}");
            prev = m;
        }
    }

    #[test]
    fn log_sf_tracks_direct_evaluation_and_tail() {
        for i in -80..=80 {
            let z = i as f64 * 0.1;
            assert_relative_eq!(log_normal_sf(z), normal_sf(z).ln(), max_relative = 1e-12);
        }
        assert_eq!(log_normal_sf(0.0), -LN_2);
        // ln(1-Φ(z)) ≈ ln φ(z) − ln(mills)
        for z in [40.0, 300.0] {
            let want = -0.5 * z * z - HALF_LN_2PI - mills_ratio(z).ln();
            assert_relative_eq!(log_normal_sf(z), want, max_relative = 1e-13);
        }
        assert!(log_normal_sf(-300.0).abs() < 1e-300);
    }

    #[test]
    fn standard_score_rejects_non_finite() {
        assert!(StandardScore::new(f64::NAN).is_err());
        assert!(StandardScore::new(f64::INFINITY).is_err());
        let z = StandardScore::new(0.0).unwrap();
        assert_eq!(z.cdf(), 0.5);
        assert_eq!(z.mills(), mills_ratio(0.0));
    }

    fn trapezoid_pdf(lo: f64, hi: f64, steps: usize) -> f64 {
        let h = (hi - lo) / steps as f64;
        let inner: f64 = (1..steps).map(|k| normal_pdf(lo + k as f64 * h)).sum();
        h * (0.5 * (normal_pdf(lo) + normal_pdf(hi)) + inner)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn cdf_is_integral_of_pdf(z in -7.9f64..8.0) {
            let integral = trapezoid_pdf(-8.0, z, 20_000);
            prop_assert!((integral - normal_cdf(z)).abs() < 1e-6);
        }

        #[test]
        fn mills_exceeds_argument(z in -50.0f64..1e4) {
            prop_assert!(mills_ratio(z) > z);
            // φ(z) itself underflows below z ≈ −38.6.
            prop_assert!(mills_ratio(z) > 0.0 || z < -38.5);
        }
    }
}
