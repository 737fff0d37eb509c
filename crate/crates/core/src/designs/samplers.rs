use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{DesignSet, Strategy};
use crate::alloc::{weighted_sum, AllocationVector};
use crate::numeric::binomial_coefficient;
use crate::seed::{self, Rng};
use crate::{Error, Result};

/// Duplicate rejections allowed per requested pair before a sampler gives up.
pub const DUPLICATE_ATTEMPT_FACTOR: u64 = 100;

/// Threshold-draw cap per requested pair for rerandomization.
const REJECTION_DRAWS_PER_PAIR: u64 = 20_000;

/// Accumulates distinct allocations, up to mirroring.
struct Distinct {
    seen: HashSet<AllocationVector>,
    kept: Vec<AllocationVector>,
    requested: usize,
    duplicates: u64,
    attempts: u64,
}

impl Distinct {
    fn new(requested: usize) -> Self {
        Distinct {
            seen: HashSet::with_capacity(requested),
            kept: Vec::with_capacity(requested),
            requested,
            duplicates: 0,
            attempts: 0,
        }
    }

    fn done(&self) -> bool {
        self.kept.len() >= self.requested
    }

    /// Offers a candidate; errors once the duplicate budget is spent.
    fn offer(&mut self, w: AllocationVector) -> Result<()> {
        self.attempts += 1;
        if self.seen.insert(w.canonical()) {
            self.kept.push(w);
            return Ok(());
        }
        self.duplicates += 1;
        if self.duplicates > DUPLICATE_ATTEMPT_FACTOR * self.requested as u64 {
            return Err(self.exhausted());
        }
        Ok(())
    }

    fn exhausted(&self) -> Error {
        Error::SamplerExhausted {
            attempts: self.attempts,
            achieved: self.kept.len(),
            requested: self.requested,
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::invalid("n", format!("{n} must be even and at least 2")));
    }
    Ok(())
}

fn check_r(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::invalid("R", "must be at least 1"));
    }
    Ok(())
}

fn check_covariate(x: &[f64]) -> Result<()> {
    check_n(x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariate", "contains non-finite values"));
    }
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Err(Error::DegenerateCovariate);
    }
    Ok(())
}

/// Uniform balanced allocation, written into `buf`.
fn draw_balanced(rng: &mut Rng, buf: &mut Vec<i8>, n: usize) {
    buf.clear();
    buf.extend(std::iter::repeat_n(1i8, n / 2));
    buf.extend(std::iter::repeat_n(-1i8, n / 2));
    buf.shuffle(rng);
}

/// Balanced complete randomization: `R` distinct mirrored pairs drawn
/// uniformly from all `C(n, n/2)` balanced allocations.
pub fn sample_bcrd(n: usize, r: usize, seed: u64) -> Result<DesignSet> {
    check_n(n)?;
    check_r(r)?;
    let capacity = binomial_coefficient(n as u64, (n / 2) as u64) / 2;
    if r as u128 > capacity {
        return Err(Error::CapacityExceeded {
            requested: r,
            capacity,
        });
    }
    let mut rng = seed::rng(seed);
    let mut acc = Distinct::new(r);
    let mut buf = Vec::with_capacity(n);
    while !acc.done() {
        draw_balanced(&mut rng, &mut buf, n);
        acc.offer(AllocationVector::from_trusted(buf.clone()))?;
    }
    DesignSet::from_unmirrored(Strategy::Bcrd, acc.kept, None, seed)
}

/// Rerandomization threshold in `B_x` units, with its calibration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RerandThreshold {
    pub a: f64,
    pub calibration_draws: usize,
    pub calibration_quantile: f64,
}

/// Empirical `quantile` of `|B_x|` over `draws` BCRD allocations.
///
/// The quantile is the `ceil(quantile * draws)`-th smallest value, so
/// `quantile = 1` returns the largest observed imbalance.
pub fn calibrate_threshold(
    x: &[f64],
    draws: usize,
    quantile: f64,
    seed: u64,
) -> Result<RerandThreshold> {
    check_covariate(x)?;
    if draws < 1000 {
        return Err(Error::invalid("calibration_draws", format!("{draws} < 1000")));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::invalid(
            "calibration_quantile",
            format!("{quantile} is outside (0, 1]"),
        ));
    }
    let n = x.len();
    let mut rng = seed::rng(seed);
    let mut buf = Vec::with_capacity(n);
    let mut values: Vec<f64> = (0..draws)
        .map(|_| {
            draw_balanced(&mut rng, &mut buf, n);
            (weighted_sum(&buf, x) / n as f64).abs()
        })
        .collect();
    let k = ((quantile * draws as f64).ceil() as usize).clamp(1, draws);
    let (_, a, _) = values.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(RerandThreshold {
        a: *a,
        calibration_draws: draws,
        calibration_quantile: quantile,
    })
}

/// Rejection sampling from BCRD, keeping allocations with `|B_x| <= a`.
pub fn sample_rerandomization(x: &[f64], a: f64, r: usize, seed: u64) -> Result<DesignSet> {
    sample_rerandomization_with(x, a, r, seed, REJECTION_DRAWS_PER_PAIR * r as u64)
}

/// As [`sample_rerandomization`], with an explicit cap on total draws.
pub fn sample_rerandomization_with(
    x: &[f64],
    a: f64,
    r: usize,
    seed: u64,
    max_draws: u64,
) -> Result<DesignSet> {
    check_n(x.len())?;
    check_r(r)?;
    if a.is_nan() || a < 0.0 {
        return Err(Error::invalid("threshold", format!("{a} must be nonnegative")));
    }
    let n = x.len();
    let capacity = binomial_coefficient(n as u64, (n / 2) as u64) / 2;
    if r as u128 > capacity {
        return Err(Error::CapacityExceeded {
            requested: r,
            capacity,
        });
    }
    let mut rng = seed::rng(seed);
    let mut acc = Distinct::new(r);
    let mut buf = Vec::with_capacity(n);
    let mut draws = 0u64;
    while !acc.done() {
        if draws == max_draws {
            return Err(Error::SamplerExhausted {
                attempts: draws,
                achieved: acc.kept.len(),
                requested: r,
            });
        }
        draws += 1;
        draw_balanced(&mut rng, &mut buf, n);
        if (weighted_sum(&buf, x) / n as f64).abs() <= a {
            acc.offer(AllocationVector::from_trusted(buf.clone()))?;
        }
    }
    let threshold = if a.is_finite() { Some(a) } else { None };
    DesignSet::from_unmirrored(Strategy::Rerandomization, acc.kept, threshold, seed)
}

/// Subjects paired by adjacency in sorted `x`: ranks (1,2), (3,4), ...
fn matched_pairs(x: &[f64]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
    order.chunks_exact(2).map(|p| (p[0], p[1])).collect()
}

/// A priori pairwise matching: within each matched pair one subject is
/// treated, chosen by a fair coin independently across pairs.
pub fn sample_matching(x: &[f64], r: usize, seed: u64) -> Result<DesignSet> {
    check_n(x.len())?;
    check_r(r)?;
    let n = x.len();
    let pairs = matched_pairs(x);
    let half = (n / 2) as u32;
    let capacity: u128 = if half > 127 {
        u128::MAX
    } else {
        1u128 << (half - 1)
    };
    if r as u128 > capacity {
        return Err(Error::CapacityExceeded {
            requested: r,
            capacity,
        });
    }
    let mut rng = seed::rng(seed);
    let mut acc = Distinct::new(r);
    while !acc.done() {
        let mut entries = vec![0i8; n];
        for &(a, b) in &pairs {
            let s: i8 = if rng.random::<bool>() { 1 } else { -1 };
            entries[a] = s;
            entries[b] = -s;
        }
        acc.offer(AllocationVector::from_trusted(entries))?;
    }
    DesignSet::from_unmirrored(Strategy::Matching, acc.kept, None, seed)
}

/// Best-improvement pair switching from `start`.
///
/// Each step scans every (treated, control) pair, applies the swap giving the
/// smallest `|w.x|` and stops when no swap strictly improves it. Ties go to
/// the first pair in scan order (treated index, then control index).
pub fn switch_to_local_optimum(start: &AllocationVector, x: &[f64]) -> AllocationVector {
    let mut w = start.entries().to_vec();
    let mut s = weighted_sum(&w, x);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        let mut best_abs = s.abs();
        for t in (0..w.len()).filter(|&i| w[i] > 0) {
            for c in (0..w.len()).filter(|&i| w[i] < 0) {
                let cand = s - 2.0 * x[t] + 2.0 * x[c];
                if cand.abs() < best_abs {
                    best_abs = cand.abs();
                    best = Some((t, c, cand));
                }
            }
        }
        match best {
            Some((t, c, cand)) => {
                w[t] = -1;
                w[c] = 1;
                s = cand;
            }
            None => break,
        }
    }
    AllocationVector::from_trusted(w)
}

/// Greedy pair switching: each allocation is the local optimum reached from a
/// fresh BCRD start by [`switch_to_local_optimum`].
pub fn greedy_pair_switch(x: &[f64], r: usize, seed: u64) -> Result<DesignSet> {
    check_covariate(x)?;
    check_r(r)?;
    let n = x.len();
    let capacity = binomial_coefficient(n as u64, (n / 2) as u64) / 2;
    if r as u128 > capacity {
        return Err(Error::CapacityExceeded {
            requested: r,
            capacity,
        });
    }
    let mut rng = seed::rng(seed);
    let mut acc = Distinct::new(r);
    let mut buf = Vec::with_capacity(n);
    while !acc.done() {
        draw_balanced(&mut rng, &mut buf, n);
        let start = AllocationVector::from_trusted(buf.clone());
        acc.offer(switch_to_local_optimum(&start, x))?;
    }
    DesignSet::from_unmirrored(Strategy::GreedyPairSwitch, acc.kept, None, seed)
}
