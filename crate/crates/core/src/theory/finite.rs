use rand_distr::{Distribution, StandardNormal};

use super::{QuadratureSpec, TheoryParams};
use crate::numeric::{binomial_cdf, normal_cdf};
use crate::randtest::rejection_budget;
use crate::seed::{self, stream};
use crate::{par, Result};

/// Samples per independently seeded chunk. Chunk `c` draws from
/// `derive(seed, [MONTE_CARLO, c])`, so results do not depend on the number
/// of workers.
const CHUNK: usize = 1 << 14;

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
    pub samples: usize,
}

/// Probability that a single null pair beats the run estimate given
/// `(U, S) = (u, s)`: `Phi(-(1 - rho) u + s) + Phi(-(1 + rho) u - s)`.
pub fn p_of_us(u: f64, s: f64, params: &TheoryParams) -> f64 {
    let rho = params.rho;
    normal_cdf(-(1.0 - rho) * u + s) + normal_cdf(-(1.0 + rho) * u - s)
}

/// Power with `R` mirrored pairs:
/// `E[ F_B(q; R - 1, p(U, S)) 1{U > 0} ]` with `q = floor(2 alpha R) - 1`,
/// `U ~ N(gamma / sqrt(1 - rho), 1 / (1 - rho))` and `S ~ N(0, rho)`
/// independent, estimated from `quad.mc_samples` draws.
pub fn finite_power(params: &TheoryParams, quad: &QuadratureSpec, seed: u64) -> Result<McEstimate> {
    params.validate()?;
    quad.validate()?;
    let samples = quad.mc_samples;
    let Some(q) = rejection_budget(params.r, params.alpha) else {
        return Ok(McEstimate {
            value: 0.0,
            se: 0.0,
            samples,
        });
    };
    let trials = (params.r - 1) as u64;
    let s_u = 1.0 / (1.0 - params.rho).sqrt();
    let mean_u = params.gamma * s_u;
    let s_s = params.rho.sqrt();

    let chunks = samples.div_ceil(CHUNK);
    let sums = par::map_indexed(chunks, |c| {
        let mut rng = seed::rng(seed::derive(seed, &[stream::MONTE_CARLO, c as u64]));
        let count = CHUNK.min(samples - c * CHUNK);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..count {
            let zu: f64 = StandardNormal.sample(&mut rng);
            let zs: f64 = StandardNormal.sample(&mut rng);
            let u = mean_u + s_u * zu;
            if u <= 0.0 {
                continue;
            }
            let v = binomial_cdf(q as i64, trials, p_of_us(u, s_s * zs, params));
            sum += v;
            sum_sq += v * v;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = sums
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (s, ss)| (a + s, b + ss));
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok(McEstimate {
        value: mean,
        se: (var / m).sqrt(),
        samples,
    })
}
