use super::{QuadratureSpec, TheoryParams};
use crate::numeric::{bisect_decreasing, normal_cdf, normal_pdf_with, simpson_refined};
use crate::{Error, Result};

/// Root in `u` of `Phi(-u + a) + Phi(-u - a) = t` for `a >= 0`, `t` in `(0, 1]`.
pub fn solve_uat(a: f64, t: f64, tol: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid("t", format!("{t} is outside (0, 1]")));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::invalid("a", format!("{a} must be finite and >= 0")));
    }
    if t == 1.0 {
        return Ok(0.0);
    }
    let f = |u: f64| normal_cdf(-u + a) + normal_cdf(-u - a) - t;
    bisect_decreasing(f, 0.0, a + 1.0, tol)
}

/// Density of the beat probability `T` on `(0, 1)`:
///
/// `f_T(t) = exp(-gamma^2 / 2) int_0^inf exp(gamma sqrt(1 - rho) u(a, t)) phi(a; 0, rho / (1 - rho)) da`.
///
/// `T` also has an atom of mass `Phi(-gamma)` at 1. At `rho = 0` the
/// integral reduces to `exp(gamma u(0, t)) / 2`.
pub fn density_ft(t: f64, params: &TheoryParams, quad: &QuadratureSpec) -> Result<f64> {
    params.validate()?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid("t", format!("{t} is outside (0, 1)")));
    }
    let (gamma, rho) = (params.gamma, params.rho);
    let damp = (-0.5 * gamma * gamma).exp();
    if rho == 0.0 {
        let u = solve_uat(0.0, t, quad.root_tol)?;
        return Ok(0.5 * damp * (gamma * u).exp());
    }
    let var = rho / (1.0 - rho);
    let k = gamma * (1.0 - rho).sqrt();
    let tol = quad.root_tol;
    let integrand = |a: f64| match solve_uat(a, t, tol) {
        Ok(u) => (k * u).exp() * normal_pdf_with(a, 0.0, var),
        Err(_) => f64::NAN,
    };
    let upper = quad.extent * var.sqrt();
    Ok(damp * simpson_refined(integrand, 0.0, upper, 64, quad.refine_tol * 1e-2)?)
}

/// `Phi(-gamma) + int_0^1 f_T(t) dt`, which equals one. The integral is taken
/// in `w = -ln t` to resolve the integrable growth near `t = 0`.
pub fn density_ft_mass(params: &TheoryParams, quad: &QuadratureSpec) -> Result<f64> {
    const W_MAX: f64 = 60.0;
    let integrand = |w: f64| {
        let t = (-w).exp();
        if t >= 1.0 {
            // the density is continuous at t = 1
            return density_ft(1.0 - 1e-12, params, quad).unwrap_or(f64::NAN);
        }
        density_ft(t, params, quad).map(|f| f * t).unwrap_or(f64::NAN)
    };
    let mass = simpson_refined(integrand, 0.0, W_MAX, 120, quad.refine_tol)?;
    Ok(normal_cdf(-params.gamma) + mass)
}

/// Sign changes of `f_T(.; rho_1) - f_T(.; rho_2)` along `ts`, ignoring exact
/// zeros. A diagnostic for the single-crossing behavior of the density in
/// `rho`.
pub fn density_crossings(
    gamma: f64,
    rho_1: f64,
    rho_2: f64,
    ts: &[f64],
    quad: &QuadratureSpec,
) -> Result<usize> {
    let p1 = TheoryParams::new(gamma, rho_1, 2, 0.05)?;
    let p2 = TheoryParams::new(gamma, rho_2, 2, 0.05)?;
    let mut last = 0.0f64;
    let mut changes = 0;
    for &t in ts {
        let d = density_ft(t, &p1, quad)? - density_ft(t, &p2, quad)?;
        if d != 0.0 {
            if last != 0.0 && d.signum() != last.signum() {
                changes += 1;
            }
            last = d;
        }
    }
    Ok(changes)
}
