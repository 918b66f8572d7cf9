//! Thin wrappers over `libm` so the numerics read the same with or without std.

pub(crate) type Vec2 = [f64; 2];

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm2(a: Vec2) -> f64 {
    sqrt(dot(a, a))
}

#[inline]
pub(crate) fn all_finite(v: Vec2) -> bool {
    v[0].is_finite() && v[1].is_finite()
}

/// `|y|^{p-2} y`, zero at zero for every `p ≥ 2`.
#[inline]
pub(crate) fn signed_pow(y: f64, p: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        powf(y.abs(), p - 2.0) * y
    }
}
