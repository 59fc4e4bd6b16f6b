//! Finite-difference helpers for validating gradients.
//!
//! Reverse-mode gradients are exact up to floating-point error, so a central
//! difference with step `h = 1e-5` should agree to roughly `1e-8` relative
//! error on smooth functions; the test suites accept `1e-4` to leave margin.
//! Probe points must avoid the kink of the leaky rectifier (pre-activations
//! within `h` of zero), where a one-sided derivative makes the comparison
//! meaningless.

/// Central difference `(f(x + h) - f(x - h)) / (2h)` of a scalar function at
/// a single coordinate.
pub fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Symmetric relative error with an absolute floor of 1, so near-zero pairs
/// compare absolutely and large pairs compare relatively.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
}
