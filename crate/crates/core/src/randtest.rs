//! Response model, estimator and the randomization test.
//!
//! For a run allocation `w_i` the response is `y_i = beta w_i + beta_x x + z`
//! and the estimate recomputed under allocation `w_j` is
//! `m_ij = w_j . y_i / n = beta r_ij + beta_x B_{x,j} + B_{z,j}`.
//!
//! The test rejects for run `i` when at most `q = floor(2 alpha R) - 1` of the
//! other `2R - 1` estimates in row `i` are at least `m_ii`. Ties count against
//! rejection.

use rand_distr::{Distribution, StandardNormal};

use crate::alloc::{weighted_sum, AllocationVector, CovariateVector, PackedRows};
use crate::designs::{DesignGenerator, DesignSet, Strategy};
use crate::error::check_len;
use crate::seed::{self, stream};
use crate::table::format_real;
use crate::{par, Error, Result};

/// Response model and test level.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentScenario {
    pub beta: f64,
    pub beta_x: f64,
    pub sigma_z: f64,
    pub alpha: f64,
    pub x: CovariateVector,
}

impl ExperimentScenario {
    /// Scenario with `sigma_z = 1`.
    pub fn new(x: CovariateVector, beta: f64, beta_x: f64, alpha: f64) -> Result<Self> {
        let s = ExperimentScenario {
            beta,
            beta_x,
            sigma_z: 1.0,
            alpha,
            x,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_sigma_z(mut self, sigma_z: f64) -> Result<Self> {
        self.sigma_z = sigma_z;
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::invalid("alpha", format!("{} is outside (0, 0.5)", self.alpha)));
        }
        if !(self.sigma_z > 0.0 && self.sigma_z.is_finite()) {
            return Err(Error::invalid("sigma_z", format!("{} must be positive", self.sigma_z)));
        }
        if !self.beta.is_finite() || !self.beta_x.is_finite() {
            return Err(Error::invalid("beta", "effects must be finite"));
        }
        if self.x.len() % 2 == 1 {
            return Err(Error::OddLength(self.x.len()));
        }
        Ok(())
    }
}

/// `y = beta w + beta_x x + z`.
pub fn generate_response(
    w: &AllocationVector,
    scenario: &ExperimentScenario,
    z: &[f64],
) -> Result<Vec<f64>> {
    check_len(w.len(), scenario.n())?;
    check_len(w.len(), z.len())?;
    Ok(w.entries()
        .iter()
        .zip(scenario.x.values())
        .zip(z)
        .map(|((&s, &x), &z)| scenario.beta * s as f64 + scenario.beta_x * x + z)
        .collect())
}

/// Differences-in-means estimate `w . y / n`, i.e. half the difference of the
/// arm means.
pub fn estimate_effect(w: &AllocationVector, y: &[f64]) -> Result<f64> {
    check_len(w.len(), y.len())?;
    Ok(weighted_sum(w.entries(), y) / w.len() as f64)
}

/// Number of other estimates allowed to beat the run estimate,
/// `floor(2 alpha R) - 1`, or `None` when no rejection is possible.
pub fn rejection_budget(r: usize, alpha: f64) -> Option<usize> {
    let slots = (2.0 * alpha * r as f64 + 1e-9).floor();
    if slots >= 1.0 {
        Some(slots as usize - 1)
    } else {
        None
    }
}

/// Count-rule decision for run `i` in a row of `2R` estimates.
pub fn randomization_reject(row: &[f64], i: usize, alpha: f64) -> bool {
    let Some(q) = rejection_budget(row.len() / 2, alpha) else {
        return false;
    };
    let v = row[i];
    let beating = row
        .iter()
        .enumerate()
        .filter(|&(j, &m)| j != i && m >= v)
        .count();
    beating <= q
}

/// The full `2R x 2R` matrix of estimates `m_ij = w_j . y_i / n`, in the
/// design's mirrored row order.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateMatrix {
    size: usize,
    values: Vec<f64>,
}

impl EstimateMatrix {
    /// Direct computation from the responses.
    pub fn direct(design: &DesignSet, scenario: &ExperimentScenario, z: &[f64]) -> Result<Self> {
        check_len(design.n(), scenario.n())?;
        let ws = design.allocations();
        let mut values = Vec::with_capacity(ws.len() * ws.len());
        for wi in ws {
            let y = generate_response(wi, scenario, z)?;
            for wj in ws {
                values.push(estimate_effect(wj, &y)?);
            }
        }
        Ok(EstimateMatrix {
            size: ws.len(),
            values,
        })
    }

    /// `beta r_ij + beta_x B_{x,j} + B_{z,j}`.
    pub fn decomposed(design: &DesignSet, scenario: &ExperimentScenario, z: &[f64]) -> Result<Self> {
        check_len(design.n(), scenario.n())?;
        check_len(design.n(), z.len())?;
        let ws = design.allocations();
        let nf = design.n() as f64;
        let col: Vec<f64> = ws
            .iter()
            .map(|w| {
                scenario.beta_x * (weighted_sum(w.entries(), scenario.x.values()) / nf)
                    + weighted_sum(w.entries(), z) / nf
            })
            .collect();
        let mut values = Vec::with_capacity(ws.len() * ws.len());
        for wi in ws {
            for (wj, c) in ws.iter().zip(&col) {
                let r = wi.dot(wj)? as f64 / nf;
                values.push(scenario.beta * r + c);
            }
        }
        Ok(EstimateMatrix {
            size: ws.len(),
            values,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    /// Fraction of rows whose run estimate is rejected.
    pub fn power(&self, alpha: f64) -> f64 {
        let rejections = (0..self.size)
            .filter(|&i| randomization_reject(self.row(i), i, alpha))
            .count();
        rejections as f64 / self.size as f64
    }
}

/// Empirical power from the full estimate matrix. Quadratic in memory; meant
/// for checking [`empirical_power`].
pub fn empirical_power_direct(
    design: &DesignSet,
    scenario: &ExperimentScenario,
    z: &[f64],
) -> Result<f64> {
    scenario.validate()?;
    Ok(EstimateMatrix::direct(design, scenario, z)?.power(scenario.alpha))
}

/// Design quantities reused across `z` draws: pairwise dot products of the
/// unmirrored allocations and their `B_x`.
pub struct PreparedDesign<'a> {
    design: &'a DesignSet,
    r: usize,
    dots: Vec<i16>,
    bx: Vec<f64>,
}

impl<'a> PreparedDesign<'a> {
    pub fn new(design: &'a DesignSet, x: &[f64]) -> Result<Self> {
        check_len(design.n(), x.len())?;
        let n = design.n();
        if n > i16::MAX as usize {
            return Err(Error::invalid("n", format!("{n} is too large")));
        }
        let r = design.r();
        let packed = PackedRows::new(n, design.unmirrored());
        let mut dots = vec![0i16; r * r];
        for i in 0..r {
            dots[i * r + i] = n as i16;
            for k in (i + 1)..r {
                let d = packed.dot(i, k) as i16;
                dots[i * r + k] = d;
                dots[k * r + i] = d;
            }
        }
        let nf = n as f64;
        let bx = design
            .unmirrored()
            .map(|w| weighted_sum(w.entries(), x) / nf)
            .collect();
        Ok(PreparedDesign {
            design,
            r,
            dots,
            bx,
        })
    }

    /// Mean `|r_ij|` over distinct unmirrored pairs; NaN when `R = 1`.
    pub fn mean_abs_r(&self) -> f64 {
        let r = self.r;
        let mut sum = 0i64;
        for i in 0..r {
            for k in (i + 1)..r {
                sum += (self.dots[i * r + k] as i64).abs();
            }
        }
        let pairs = (r * (r.saturating_sub(1)) / 2) as f64;
        sum as f64 / self.design.n() as f64 / pairs
    }

    pub fn mean_abs_bx(&self) -> f64 {
        self.bx.iter().map(|b| b.abs()).sum::<f64>() / self.r as f64
    }

    /// Number of rejecting rows among the `2R` for one draw of `z`.
    pub fn rejections(&self, beta: f64, beta_x: f64, alpha: f64, z: &[f64]) -> Result<usize> {
        check_len(self.design.n(), z.len())?;
        let Some(q) = rejection_budget(self.r, alpha) else {
            return Ok(0);
        };
        let nf = self.design.n() as f64;
        let c: Vec<f64> = self
            .design
            .unmirrored()
            .zip(&self.bx)
            .map(|(w, &bx)| beta_x * bx + weighted_sum(w.entries(), z) / nf)
            .collect();
        if beta == 0.0 {
            Ok(null_rejections(&c, q))
        } else {
            Ok(self.effect_rejections(&c, beta / nf, beta, q))
        }
    }

    fn effect_rejections(&self, c: &[f64], scale: f64, beta: f64, q: usize) -> usize {
        const BLOCK: usize = 64;
        let r = self.r;
        let mut total = 0;
        for i in 0..r {
            let dots = &self.dots[i * r..(i + 1) * r];
            // row i runs w_i, row i' runs its mirror
            let v = beta + c[i];
            let vm = beta - c[i];
            let mut count = (-beta - c[i] >= v) as usize;
            let mut count_m = (-beta + c[i] >= vm) as usize;
            let mut start = 0;
            while start < r && (count <= q || count_m <= q) {
                let end = (start + BLOCK).min(r);
                for k in start..end {
                    if k == i {
                        continue;
                    }
                    let t = dots[k] as f64 * scale;
                    let a = t + c[k];
                    let am = c[k] - t;
                    count += (a >= v) as usize + (-a >= v) as usize;
                    count_m += (am >= vm) as usize + (-am >= vm) as usize;
                }
                start = end;
            }
            total += (count <= q) as usize + (count_m <= q) as usize;
        }
        total
    }

    /// Empirical power for one draw of `z`.
    pub fn power(&self, scenario: &ExperimentScenario, z: &[f64]) -> Result<f64> {
        let k = self.rejections(scenario.beta, scenario.beta_x, scenario.alpha, z)?;
        Ok(k as f64 / (2 * self.r) as f64)
    }
}

/// With no effect every row holds the same values `{+-c_k}`, so one sort
/// answers all rows.
fn null_rejections(c: &[f64], q: usize) -> usize {
    let mut all: Vec<f64> = c.iter().flat_map(|&v| [v, -v]).collect();
    all.sort_unstable_by(f64::total_cmp);
    let at_least = |v: f64| all.len() - all.partition_point(|&u| u < v);
    c.iter()
        .flat_map(|&v| [v, -v])
        .filter(|&v| at_least(v) - 1 <= q)
        .count()
}

/// Fraction of the `2R` runs for which the test rejects, for one fixed `z`.
pub fn empirical_power(design: &DesignSet, scenario: &ExperimentScenario, z: &[f64]) -> Result<f64> {
    scenario.validate()?;
    PreparedDesign::new(design, scenario.x.values())?.power(scenario, z)
}

/// Averaged empirical power with its standard error and design diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerResult {
    pub design: Strategy,
    pub n: usize,
    pub r: usize,
    pub beta: f64,
    pub beta_x: f64,
    pub alpha: f64,
    pub power: f64,
    pub se: f64,
    pub n_designs: usize,
    pub n_z: usize,
    pub mean_abs_r: f64,
    pub mean_abs_bx: f64,
    pub seed: u64,
}

pub const POWER_HEADER: &str =
    "design,n,R,beta,beta_x,alpha,power,se,n_designs,n_z,mean_abs_r,mean_abs_Bx,seed";

impl PowerResult {
    /// CSV fields in [`POWER_HEADER`] order.
    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.design,
            self.n,
            self.r,
            format_real(self.beta),
            format_real(self.beta_x),
            format_real(self.alpha),
            format_real(self.power),
            format_real(self.se),
            self.n_designs,
            self.n_z,
            format_real(self.mean_abs_r),
            format_real(self.mean_abs_bx),
            self.seed
        )
    }
}

/// Draws `z ~ N(0, sigma_z^2)^n` from its own stream.
pub fn draw_z(n: usize, sigma_z: f64, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            sigma_z * e
        })
        .collect()
}

/// Power averaged over `n_designs` independent designs and `n_z` draws of `z`
/// per design.
///
/// Design `d` uses seed `derive(seed, [DESIGN, d])` and its `k`-th draw of `z`
/// uses `derive(seed, [NOISE, d, k])`. A deterministic generator (the best
/// design) is run once. The standard error follows the law of total
/// variance: the spread of the per-design means over `sqrt(n_designs)`, or
/// the within-design spread over `sqrt(n_z)` for a single design.
pub fn power_metric(
    generator: &DesignGenerator,
    scenario: &ExperimentScenario,
    r: usize,
    n_designs: usize,
    n_z: usize,
    seed: u64,
) -> Result<PowerResult> {
    scenario.validate()?;
    check_len(generator.x.len(), scenario.n())?;
    if n_designs == 0 || n_z == 0 {
        return Err(Error::invalid("replicates", "n_designs and n_z must be at least 1"));
    }
    let n_designs = if generator.is_deterministic() { 1 } else { n_designs };
    let n = scenario.n();
    let per_design = par::map_indexed(n_designs, |d| -> Result<(Vec<f64>, f64, f64)> {
        let design = generator.generate(r, seed::derive(seed, &[stream::DESIGN, d as u64]))?;
        let prepared = PreparedDesign::new(&design, scenario.x.values())?;
        let powers = (0..n_z)
            .map(|k| {
                let zs = seed::derive(seed, &[stream::NOISE, d as u64, k as u64]);
                prepared.power(scenario, &draw_z(n, scenario.sigma_z, zs))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((powers, prepared.mean_abs_r(), prepared.mean_abs_bx()))
    });
    let per_design = per_design.into_iter().collect::<Result<Vec<_>>>()?;

    let means: Vec<f64> = per_design
        .iter()
        .map(|(p, _, _)| p.iter().sum::<f64>() / n_z as f64)
        .collect();
    let power = means.iter().sum::<f64>() / n_designs as f64;
    let se = if n_designs > 1 {
        (sample_variance(&means) / n_designs as f64).sqrt()
    } else {
        (sample_variance(&per_design[0].0) / n_z as f64).sqrt()
    };
    let mean_of = |f: fn(&(Vec<f64>, f64, f64)) -> f64| {
        per_design.iter().map(f).sum::<f64>() / n_designs as f64
    };
    Ok(PowerResult {
        design: generator.strategy,
        n,
        r,
        beta: scenario.beta,
        beta_x: scenario.beta_x,
        alpha: scenario.alpha,
        power,
        se,
        n_designs,
        n_z,
        mean_abs_r: mean_of(|d| d.1),
        mean_abs_bx: mean_of(|d| d.2),
        seed,
    })
}

fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}
