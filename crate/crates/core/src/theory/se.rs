use super::{solve_qz, QuadratureSpec, TheoryParams};
use crate::numeric::{normal_cdf, normal_pdf};
use crate::{Error, Result};

/// Standard deviation of power across draws of `z`, with the integrals it is
/// built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerSe {
    /// At `params.r` mirrored pairs.
    pub se_finite: f64,
    /// As `R` grows: `sqrt(p_s - p^2)`.
    pub se_limit: f64,
    /// Rejection probability of a run.
    pub p: f64,
    /// Rejection probability of its mirror run.
    pub p_m: f64,
    /// Probability that both reject.
    pub p_b: f64,
    /// `E_z[((P(I | z) + P(I^m | z)) / 2)^2]`.
    pub p_s: f64,
}

/// Variance of power over `z` for a design of `R` mirrored pairs:
///
/// `Var = [(p + p_m + 2 p_b) / 4 - p_s] / R + p_s - p^2`,
///
/// with the conditional quantile `q(z)` in place of the finite-R count. Given
/// `Z_0 = z` a run rejects when `V_11 > q(z)`; its mirror sees `-z`. Fixed
/// Simpson rules on `[-extent, extent]` with `quad.intervals` subintervals
/// are compared against a doubled grid and must agree to `quad.refine_tol`.
pub fn power_se(params: &TheoryParams, quad: &QuadratureSpec) -> Result<PowerSe> {
    params.validate()?;
    let coarse = integrals(params, quad, quad.intervals)?;
    let fine = integrals(params, quad, 2 * quad.intervals)?;
    let drift = (0..4).map(|k| (coarse[k] - fine[k]).abs()).fold(0.0, f64::max);
    if drift > quad.refine_tol {
        return Err(Error::Numerical(format!(
            "power variance integrals moved by {drift} between grids"
        )));
    }
    let [p, p_m, p_b, p_s] = fine;
    let r = params.r as f64;
    let limit = (p_s - p * p).max(0.0);
    let var = (((p + p_m + 2.0 * p_b) / 4.0 - p_s) / r + p_s - p * p).max(0.0);
    Ok(PowerSe {
        se_finite: var.sqrt(),
        se_limit: limit.sqrt(),
        p,
        p_m,
        p_b,
        p_s,
    })
}

/// `[p, p_m, p_b, p_s]` on a symmetric grid, so that `q(-z)` is the quantile
/// at the mirrored node.
fn integrals(params: &TheoryParams, quad: &QuadratureSpec, intervals: usize) -> Result<[f64; 4]> {
    let m = intervals.div_ceil(2) * 2;
    let h = 2.0 * quad.extent / m as f64;
    let nodes: Vec<f64> = (0..=m).map(|i| -quad.extent + h * i as f64).collect();
    let qs = nodes
        .iter()
        .map(|&z| solve_qz(z, params, quad.root_tol))
        .collect::<Result<Vec<f64>>>()?;
    let s = (1.0 - params.rho).sqrt();
    let sr = params.rho.sqrt();
    let g = params.gamma;
    let mut sums = [0.0; 4];
    for (i, &z) in nodes.iter().enumerate() {
        let (q, q_mirror) = (qs[i], qs[m - i]);
        let run = normal_cdf((g + sr * z - q) / s);
        let mirror = normal_cdf((g - sr * z - q_mirror) / s);
        let lower = (q - g - sr * z) / s;
        let upper = (g - sr * z - q_mirror) / s;
        let both = (normal_cdf(upper) - normal_cdf(lower)).max(0.0);
        let half = 0.5 * (run + mirror);
        let w = normal_pdf(z)
            * if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
        sums[0] += w * run;
        sums[1] += w * mirror;
        sums[2] += w * both;
        sums[3] += w * half * half;
    }
    Ok(sums.map(|v| v * h / 3.0))
}

/// `E_z[P(I | z)]` by the generic Simpson rule; used to cross-check the
/// node-sharing integrals.
#[cfg(test)]
fn p_direct(params: &TheoryParams, quad: &QuadratureSpec) -> f64 {
    let s = (1.0 - params.rho).sqrt();
    let sr = params.rho.sqrt();
    crate::numeric::simpson(
        |z| {
            let q = solve_qz(z, params, quad.root_tol).unwrap_or(f64::NAN);
            normal_cdf((params.gamma + sr * z - q) / s) * normal_pdf(z)
        },
        -quad.extent,
        quad.extent,
        quad.intervals,
    )
}
