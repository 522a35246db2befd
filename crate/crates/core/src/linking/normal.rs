//! Standard normal distribution functions used by the probit link.
//!
//! `Φ(z) = ½·erfc(−z/√2)`. Going through the complementary error function
//! keeps the lower tail accurate to full relative precision, which a
//! `½(1 + erf(z/√2))` form loses below z ≈ −3.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;

/// Lower bound on tail probabilities inside log-likelihoods.
pub const TAIL_FLOOR: f64 = 1e-300;

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn log_normal_cdf(z: f64) -> f64 {
    normal_cdf(z).max(TAIL_FLOOR).ln()
}

/// `φ(z) / Φ(z)`, continued with its asymptotic series where `Φ` underflows.
pub fn inverse_mills(z: f64) -> f64 {
    let cdf = normal_cdf(z);
    if cdf > TAIL_FLOOR {
        return normal_pdf(z) / cdf;
    }
    let t = 1.0 / (z * z);
    -z / (1.0 - t + 3.0 * t * t - 15.0 * t * t * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values at 40 significant digits
    #[allow(clippy::excessive_precision)]
    const CDF: [(f64, f64, f64); 7] = [
        (-8.0, 6.220_960_574_271_784_123_5e-16, 5.052_271_083_536_892_288e-15),
        (-3.0, 1.349_898_031_630_094_526_7e-3, 4.431_848_411_938_007_175_6e-3),
        (-0.5, 0.308_537_538_725_986_896_36, 0.352_065_326_764_299_477_77),
        (0.0, 0.5, 0.398_942_280_401_432_677_94),
        (1.25, 0.894_350_226_333_144_742_31, 0.182_649_085_389_021_904_99),
        (5.0, 0.999_999_713_348_428_120_81, 1.486_719_514_734_297_707_9e-6),
        (8.0, 0.999_999_999_999_999_377_9, 5.052_271_083_536_892_288e-15),
    ];

    #[test]
    fn relative_accuracy() {
        for (z, cdf, pdf) in CDF {
            assert!(((normal_cdf(z) - cdf) / cdf).abs() < 1e-12, "cdf({z})");
            assert!(((normal_pdf(z) - pdf) / pdf).abs() < 1e-12, "pdf({z})");
        }
    }

    #[test]
    fn deep_tail_stays_finite() {
        assert_eq!(log_normal_cdf(-60.0), TAIL_FLOOR.ln());
        let r = inverse_mills(-60.0);
        assert!((r - 60.0166).abs() < 1e-3, "{r}");
        // continuity across the switch-over
        let (a, b) = (inverse_mills(-37.0), inverse_mills(-37.6));
        assert!(a < b && b - a < 0.7);
    }
}
