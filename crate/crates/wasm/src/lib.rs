//! Browser bindings: theoretical power curves, the beat-probability density
//! and design diagnostics.

use randpower::alloc::{allocation_stats, normal_quantile_covariate};
use randpower::designs::{calibrate_threshold, DesignGenerator};
use randpower::theory::{asymptotic_power, density_ft, finite_power, QuadratureSpec, TheoryParams};
use randpower::{Result, Strategy};
use wasm_bindgen::prelude::*;

/// Calibration draws for the rerandomization threshold in the browser.
const DEMO_CALIBRATION_DRAWS: usize = 100_000;

fn js(e: randpower::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Finite-`R` power at each entry of `r_values`, followed by its standard
/// error: `[p_1, ..., p_k, se_1, ..., se_k]`.
pub fn power_curve_values(
    gamma: f64,
    rho: f64,
    alpha: f64,
    r_values: &[u32],
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let quad = QuadratureSpec::with_mc(mc_samples)?;
    let mut power = Vec::with_capacity(2 * r_values.len());
    let mut se = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let params = TheoryParams::new(gamma, rho, r as usize, alpha)?;
        let e = finite_power(&params, &quad, seed)?;
        power.push(e.value);
        se.push(e.se);
    }
    power.extend(se);
    Ok(power)
}

#[wasm_bindgen(js_name = powerCurve)]
pub fn power_curve(
    gamma: f64,
    rho: f64,
    alpha: f64,
    r_values: Vec<u32>,
    mc_samples: usize,
    seed: u64,
) -> std::result::Result<Vec<f64>, JsError> {
    power_curve_values(gamma, rho, alpha, &r_values, mc_samples, seed).map_err(js)
}

pub fn asymptotic_value(gamma: f64, rho: f64, alpha: f64) -> Result<f64> {
    let params = TheoryParams::new(gamma, rho, 1, alpha)?;
    let quad = QuadratureSpec {
        intervals: 400,
        ..Default::default()
    };
    asymptotic_power(&params, &quad)
}

#[wasm_bindgen(js_name = asymptoticPower)]
pub fn asymptotic(gamma: f64, rho: f64, alpha: f64) -> std::result::Result<f64, JsError> {
    asymptotic_value(gamma, rho, alpha).map_err(js)
}

/// `f_T` at `points` evenly spaced interior points of `(0, 1)`.
pub fn density_values(gamma: f64, rho: f64, points: usize) -> Result<Vec<f64>> {
    let params = TheoryParams::new(gamma, rho, 2, 0.05)?;
    let quad = QuadratureSpec {
        refine_tol: 1e-4,
        ..Default::default()
    };
    (1..=points)
        .map(|k| density_ft(k as f64 / (points + 1) as f64, &params, &quad))
        .collect()
}

#[wasm_bindgen(js_name = densityCurve)]
pub fn density_curve(gamma: f64, rho: f64, points: usize) -> std::result::Result<Vec<f64>, JsError> {
    density_values(gamma, rho, points).map_err(js)
}

/// `[mean |r|, sd r, mean |B_x|, Datta lhs, Datta rhs]` for one design on
/// the normal-quantile covariate. Rerandomization keeps the best 1% of BCRD
/// draws.
pub fn design_stats_values(strategy: &str, n: usize, r: usize, seed: u64) -> Result<Vec<f64>> {
    let strategy: Strategy = strategy.parse()?;
    let x = normal_quantile_covariate(n)?;
    let threshold = if strategy == Strategy::Rerandomization {
        Some(calibrate_threshold(x.values(), DEMO_CALIBRATION_DRAWS, 0.01, seed ^ 0x5EED)?.a)
    } else {
        None
    };
    let design = DesignGenerator::new(strategy, x.values(), threshold)?.generate(r, seed)?;
    let s = allocation_stats(&design, x.values())?;
    Ok(vec![s.mean_abs_r, s.sd_r, s.mean_abs_bx, s.datta_lhs, s.datta_rhs])
}

#[wasm_bindgen(js_name = designStats)]
pub fn design_stats(strategy: &str, n: usize, r: usize, seed: u64) -> std::result::Result<Vec<f64>, JsError> {
    design_stats_values(strategy, n, r, seed).map_err(js)
}
