//! Error-function helpers that stay finite deep in the Gaussian tail.

use std::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Above this argument `erfcx` switches from `exp(x²)·erfc(x)` to a
/// continued fraction.
const ERFCX_CF_THRESHOLD: f64 = 4.0;

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < ERFCX_CF_THRESHOLD {
        return (x * x).exp() * erfc(x);
    }
    // erfc(x)·exp(x²)·√π = 1 / (x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
    let mut tail = x;
    for k in (1..=120).rev() {
        tail = x + (k as f64 * 0.5) / tail;
    }
    1.0 / (tail * PI.sqrt())
}

/// `ln erfc(x)`, finite for all finite `x`.
pub fn ln_erfc(x: f64) -> f64 {
    if x < ERFCX_CF_THRESHOLD {
        erfc(x).ln()
    } else {
        erfcx(x).ln() - x * x
    }
}

/// Inverse Mills ratio `φ(z)/Φ(z)` of the standard normal at an upper
/// truncation point `z`, i.e. `√(2/π)·exp(−z²/2) / (1 + erf(z/√2))`.
///
/// For `z < −deep_tail` the ratio is taken through `erfcx`, avoiding the
/// `0/0` of the direct form.
pub fn inverse_mills(z: f64, deep_tail: f64) -> f64 {
    if z < -deep_tail {
        // 1 + erf(z/√2) = erfc(−z/√2) = exp(−z²/2)·erfcx(−z/√2)
        let log_ratio = (FRAC_2_SQRT_PI / SQRT_2).ln() - erfcx(-z / SQRT_2).ln();
        log_ratio.exp()
    } else {
        // 1 + erf(z/√2) evaluated as erfc(−z/√2) to avoid cancellation
        FRAC_2_SQRT_PI / SQRT_2 * (-0.5 * z * z).exp() / erfc(-z / SQRT_2)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}
