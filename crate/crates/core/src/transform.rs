//! The square-root transform pair between outcome space `[0, 1]` and the
//! angular domain `[0, pi]` used by the KL-calibration forecasters.

/// `theta(p) = 2 asin(sqrt(p))`, mapping `[0, 1]` onto `[0, pi]`.
pub fn theta(p: f64) -> f64 {
    2.0 * p.clamp(0.0, 1.0).sqrt().asin()
}

/// Inverse map `psi(z) = sin^2(z / 2)`.
pub fn psi(z: f64) -> f64 {
    let s = (z / 2.0).sin();
    s * s
}
