//! Two mirrored pairs at level 1/4: the run is rejected only when its
//! estimate is the largest of the four.

use crate::numeric::{normal_cdf, normal_pdf, simpson_refined};
use crate::{Error, Result};

/// `int_0^inf u phi(a u) phi(u - gamma) du` in closed form.
fn h_integral(a: f64, gamma: f64) -> f64 {
    let s = 1.0 + a * a;
    let two_pi = 2.0 * std::f64::consts::PI;
    (-0.5 * gamma * gamma).exp() / (two_pi * s)
        + gamma * (-0.5 * a * a * gamma * gamma / s).exp() / (two_pi.sqrt() * s.powf(1.5))
            * (1.0 - normal_cdf(-gamma / s.sqrt()))
}

/// `h(a) = a int_0^inf u phi(a u) phi(u - gamma) du`.
pub fn toy_h(a: f64, gamma: f64) -> f64 {
    a * h_integral(a, gamma)
}

/// `dG / d omega = (h(omega) - h(1 / omega)) / omega`.
pub fn toy_slope(omega: f64, gamma: f64) -> f64 {
    (toy_h(omega, gamma) - toy_h(1.0 / omega, gamma)) / omega
}

/// Power with `R = 2` and `alpha = 1/4`, through
/// `G(omega) = int_0^inf (Phi(u / omega) + Phi(u omega)) phi(u - gamma) du - Phi(gamma)`
/// with `omega = sqrt((1 + rho) / (1 - rho))`.
pub fn toy_power_r2(rho: f64, gamma: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("{rho} is outside [0, 1)")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma", format!("{gamma} must be finite and >= 0")));
    }
    let omega = ((1.0 + rho) / (1.0 - rho)).sqrt();
    let f = |u: f64| (normal_cdf(u / omega) + normal_cdf(u * omega)) * normal_pdf(u - gamma);
    let integral = simpson_refined(f, 0.0, gamma + 12.0, 512, 1e-12)?;
    Ok(integral - normal_cdf(gamma))
}
