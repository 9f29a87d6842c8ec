//! Scalar math routed through `libm`, so results are bit-identical with and
//! without `std` and across platforms.

pub use core::f64::consts::PI;

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `|x|^p` with the convention `0^p = 0` for `p > 0`.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        0.0
    } else {
        pow(a, p)
    }
}

/// `E|N|^p` for a standard normal `N`: `2^{p/2} Γ((p+1)/2) / √π`.
pub fn normal_abs_moment(p: f64) -> f64 {
    pow(2.0, p / 2.0) * gamma((p + 1.0) / 2.0) / sqrt(PI)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / core::f64::consts::SQRT_2))
}

/// One-dimensional heat kernel `q_s(y) = (2πs)^{-1/2} exp(-y²/(2s))`.
pub fn heat_kernel(s: f64, y: f64) -> f64 {
    exp(-y * y / (2.0 * s)) / sqrt(2.0 * PI * s)
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    sqrt(x.iter().map(|v| v * v).sum())
}

pub(crate) fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}
