use super::{QuadratureSpec, TheoryParams};
use crate::numeric::{bisect_decreasing, normal_cdf, normal_pdf, normal_quantile, simpson_refined};
use crate::Result;

/// Conditional `1 - alpha` quantile `q(z)` of the null estimates given
/// `Z_0 = z`, the root in `q` of
///
/// `Phi((sqrt(rho) z + rho gamma - q) / sqrt(1 - rho)) + Phi(-(sqrt(rho) z + rho gamma + q) / sqrt(1 - rho)) = 2 alpha`.
pub fn solve_qz(z: f64, params: &TheoryParams, tol: f64) -> Result<f64> {
    params.validate()?;
    let s = (1.0 - params.rho).sqrt();
    let c = params.rho.sqrt() * z + params.rho * params.gamma;
    let target = 2.0 * params.alpha;
    let f = |q: f64| normal_cdf((c - q) / s) + normal_cdf(-(c + q) / s) - target;
    // the root is near the unconditional quantile shifted by the center
    let guess = c.abs() + s * normal_quantile(1.0 - params.alpha);
    bisect_decreasing(f, guess - 1.0, guess + 1.0, tol)
}

/// Power as `R` grows without bound:
/// `E_z[ Phi((gamma + sqrt(rho) z - q(z)) / sqrt(1 - rho)) ]`, integrated over
/// `z` in `[-extent, extent]`. `params.r` is ignored.
pub fn asymptotic_power(params: &TheoryParams, quad: &QuadratureSpec) -> Result<f64> {
    params.validate()?;
    let s = (1.0 - params.rho).sqrt();
    let sr = params.rho.sqrt();
    let integrand = |z: f64| match solve_qz(z, params, quad.root_tol) {
        Ok(q) => normal_cdf((params.gamma + sr * z - q) / s) * normal_pdf(z),
        Err(_) => f64::NAN,
    };
    simpson_refined(integrand, -quad.extent, quad.extent, quad.intervals, quad.refine_tol)
}
