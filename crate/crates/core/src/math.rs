//! Scalar special functions used by the denoisers and the output channel.
//!
//! Everything is evaluated through `libm` so the crate stays `no_std`.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

/// `ln(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
/// `sqrt(2/π)`.
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn exp_m1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// Finite for every `x` down to about `-26.6`, where `exp(x²)` overflows.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        if x < -26.7 {
            return f64::INFINITY;
        }
        // exp(x²) computed from the split x² = hi + lo keeps the doubling
        // relation accurate for moderately negative x.
        return 2.0 * exp_square(x) - erfcx(-x);
    }
    if x < 5.0 {
        return exp_square(x) * erfc(x);
    }
    erfcx_continued_fraction(x)
}

/// `exp(x*x)` without the rounding error of forming `x*x` first.
fn exp_square(x: f64) -> f64 {
    let hi = libm::trunc(x * 4096.0) / 4096.0;
    let lo = x - hi;
    // x² = hi² + lo·(2hi + lo), where hi² is exact.
    exp(hi * hi) * exp(lo * (2.0 * hi + lo))
}

// Lentz evaluation of the Laplace continued fraction, valid for x >= 5.
fn erfcx_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64 * 0.5;
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
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    FRAC_1_SQRT_PI / f
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    exp(-0.5 * z * z) / sqrt(2.0 * PI)
}

/// `ln Φ(z)` for the standard normal CDF, accurate in both tails.
pub fn ln_norm_cdf(z: f64) -> f64 {
    if z < -1.0 {
        let t = -z * FRAC_1_SQRT_2;
        ln(0.5 * erfcx(t)) - t * t
    } else {
        ln_1p(-0.5 * erfc(z * FRAC_1_SQRT_2))
    }
}

/// Inverse Mills ratio of the lower tail, `φ(z)/Φ(z)`.
#[inline]
pub fn mills_lower(z: f64) -> f64 {
    SQRT_2_OVER_PI / erfcx(-z * FRAC_1_SQRT_2)
}

/// Inverse Mills ratio of the upper tail, `φ(z)/(1 − Φ(z))`.
#[inline]
pub fn mills_upper(z: f64) -> f64 {
    SQRT_2_OVER_PI / erfcx(z * FRAC_1_SQRT_2)
}

/// Log density of `N(mean, var)` at `x`.
#[inline]
pub fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + ln(var)) - d * d / (2.0 * var)
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ln_1p(exp(-(a - b).abs()))
}

/// Logistic function `1 / (1 + e^{-x})` without overflow.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `ln(p / (1 − p))`, infinite at the endpoints.
#[inline]
pub fn logit(p: f64) -> f64 {
    ln(p) - ln_1p(-p)
}
