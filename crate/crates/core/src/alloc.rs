//! Allocation vectors and their algebra.
//!
//! An allocation assigns each of `n` subjects to treatment (`+1`) or control
//! (`-1`) with exactly `n / 2` subjects per arm. Correlations and imbalances
//! are normalized by `n`: `r(w, v) = w.v / n`, `B(w, v) = w.v / n`.

use std::fmt;

use crate::designs::DesignSet;
use crate::error::check_len;
use crate::numeric::normal_quantile;
use crate::{Error, Result};

/// A balanced vector of +-1 treatment assignments.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AllocationVector(Vec<i8>);

impl AllocationVector {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.len() % 2 == 1 {
            return Err(Error::OddLength(entries.len()));
        }
        if entries.is_empty() {
            return Err(Error::invalid("allocation", "must have at least two entries"));
        }
        if let Some((index, &v)) = entries.iter().enumerate().find(|(_, &v)| v != 1 && v != -1) {
            return Err(Error::InvalidEntry {
                index,
                value: v as i64,
            });
        }
        let sum: i64 = entries.iter().map(|&v| v as i64).sum();
        if sum != 0 {
            return Err(Error::Unbalanced(sum));
        }
        Ok(AllocationVector(entries))
    }

    /// Builds from entries already known to be a valid allocation.
    pub(crate) fn from_trusted(entries: Vec<i8>) -> Self {
        debug_assert!(entries.iter().map(|&v| v as i64).sum::<i64>() == 0);
        AllocationVector(entries)
    }

    /// Builds from the set of treated subject indices.
    pub(crate) fn from_treated(n: usize, treated: impl IntoIterator<Item = usize>) -> Self {
        let mut entries = vec![-1i8; n];
        for i in treated {
            entries[i] = 1;
        }
        Self::from_trusted(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn mirror(&self) -> Self {
        AllocationVector(self.0.iter().map(|&v| -v).collect())
    }

    /// The member of `{w, -w}` whose first entry is +1.
    pub fn canonical(&self) -> Self {
        if self.0[0] == 1 {
            self.clone()
        } else {
            self.mirror()
        }
    }

    pub fn dot(&self, other: &Self) -> Result<i64> {
        check_len(self.len(), other.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a * b) as i64)
            .sum())
    }

    /// `+`/`-` string, one character per subject.
    pub fn to_sign_string(&self) -> String {
        self.0.iter().map(|&v| if v > 0 { '+' } else { '-' }).collect()
    }

    pub fn parse_signs(s: &str) -> Result<Self> {
        let entries = s
            .chars()
            .enumerate()
            .map(|(index, c)| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::invalid(
                    "allocation",
                    format!("character {other:?} at position {index} is not + or -"),
                )),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::new(entries)
    }
}

impl fmt::Debug for AllocationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AllocationVector({})", self.to_sign_string())
    }
}

/// Validates a sequence of signed units.
pub fn make_allocation(entries: &[i8]) -> Result<AllocationVector> {
    AllocationVector::new(entries.to_vec())
}

/// Entrywise negation.
pub fn mirror(w: &AllocationVector) -> AllocationVector {
    w.mirror()
}

/// Pairwise allocation correlation `w_i . w_j / n`.
pub fn correlation(wi: &AllocationVector, wj: &AllocationVector) -> Result<f64> {
    Ok(wi.dot(wj)? as f64 / wi.len() as f64)
}

/// Imbalance of `w` against a covariate or response component: `w . v / n`.
pub fn imbalance(w: &AllocationVector, v: &[f64]) -> Result<f64> {
    check_len(w.len(), v.len())?;
    Ok(weighted_sum(w.entries(), v) / w.len() as f64)
}

/// `sum_i w_i v_i`, accumulated in index order.
pub(crate) fn weighted_sum(w: &[i8], v: &[f64]) -> f64 {
    w.iter()
        .zip(v)
        .fold(0.0, |acc, (&s, &x)| if s > 0 { acc + x } else { acc - x })
}

/// A covariate centered to mean zero and scaled to unit sample standard
/// deviation (denominator `n - 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct CovariateVector(Vec<f64>);

impl CovariateVector {
    pub fn standardize(raw: &[f64]) -> Result<Self> {
        let n = raw.len();
        if n < 2 {
            return Err(Error::invalid("covariate", "needs at least two values"));
        }
        let mean = raw.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = raw.iter().map(|v| v - mean).collect();
        let ss: f64 = centered.iter().map(|v| v * v).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::DegenerateCovariate);
        }
        Ok(CovariateVector(centered.into_iter().map(|v| v / sd).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for CovariateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Standard normal quantiles at `i / (n + 1)`, `i = 1..=n`, standardized.
pub fn normal_quantile_covariate(n: usize) -> Result<CovariateVector> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::invalid("n", format!("{n} must be even and at least 2")));
    }
    let raw: Vec<f64> = (1..=n)
        .map(|i| normal_quantile(i as f64 / (n + 1) as f64))
        .collect();
    // Symmetrize so that x_i = -x_{n+1-i} holds exactly; the mean is then
    // zero and only the scaling remains.
    let raw: Vec<f64> = (0..n).map(|i| 0.5 * (raw[i] - raw[n - 1 - i])).collect();
    let sd = (raw.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64).sqrt();
    Ok(CovariateVector(raw.into_iter().map(|v| v / sd).collect()))
}

/// Allocations packed as bit rows (bit set = treated), for fast dot products.
#[derive(Clone, Debug)]
pub(crate) struct PackedRows {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl PackedRows {
    pub(crate) fn new<'a>(n: usize, rows: impl IntoIterator<Item = &'a AllocationVector>) -> Self {
        let words = n.div_ceil(64);
        let mut bits = Vec::new();
        for w in rows {
            let start = bits.len();
            bits.resize(start + words, 0u64);
            for (i, &v) in w.entries().iter().enumerate() {
                if v > 0 {
                    bits[start + i / 64] |= 1u64 << (i % 64);
                }
            }
        }
        PackedRows { n, words, bits }
    }

    /// `w_i . w_k` = agreements - disagreements.
    pub(crate) fn dot(&self, i: usize, k: usize) -> i64 {
        let a = &self.bits[i * self.words..(i + 1) * self.words];
        let b = &self.bits[k * self.words..(k + 1) * self.words];
        let disagree: u32 = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum();
        self.n as i64 - 2 * disagree as i64
    }
}

/// Dependence and balance summaries of a design.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AllocationStats {
    /// Mean `|r_ij|` over unordered pairs of distinct unmirrored allocations.
    pub mean_abs_r: f64,
    /// Standard deviation of `r_ij` over the same pairs.
    pub sd_r: f64,
    /// Mean `|B_x|` over the allocations.
    pub mean_abs_bx: f64,
    /// `sum_{i != j} |w_i . w_j|^2 / (R (R - 1))` over the unmirrored allocations.
    pub datta_lhs: f64,
    /// `n (R - n) / (R - 1)`; nonpositive, hence vacuous, when `R <= n`.
    pub datta_rhs: f64,
}

impl AllocationStats {
    pub fn datta_bound_holds(&self) -> bool {
        self.datta_lhs >= self.datta_rhs
    }
}

/// Pair statistics over the `R` unmirrored allocations of a design.
///
/// Self pairs and mirror pairs (always `+1` / `-1`) are excluded.
pub fn allocation_stats(design: &DesignSet, x: &[f64]) -> Result<AllocationStats> {
    let unmirrored: Vec<&AllocationVector> = design.unmirrored().collect();
    let r = unmirrored.len();
    if r < 2 {
        return Err(Error::invalid(
            "design",
            format!("allocation statistics need R >= 2 unmirrored allocations, got {r}"),
        ));
    }
    let n = design.n();
    check_len(n, x.len())?;
    let packed = PackedRows::new(n, unmirrored.iter().copied());
    let nf = n as f64;

    let mut sum_abs = 0.0;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut sum_dot_sq = 0.0;
    for i in 0..r {
        for k in (i + 1)..r {
            let d = packed.dot(i, k);
            let rik = d as f64 / nf;
            sum_abs += rik.abs();
            sum += rik;
            sum_sq += rik * rik;
            sum_dot_sq += (d * d) as f64;
        }
    }
    let pairs = (r * (r - 1) / 2) as f64;
    let mean = sum / pairs;
    let var = if pairs > 1.0 {
        ((sum_sq - pairs * mean * mean) / (pairs - 1.0)).max(0.0)
    } else {
        0.0
    };
    let mean_abs_bx = unmirrored
        .iter()
        .map(|w| (weighted_sum(w.entries(), x) / nf).abs())
        .sum::<f64>()
        / r as f64;
    let rf = r as f64;
    Ok(AllocationStats {
        mean_abs_r: sum_abs / pairs,
        sd_r: var.sqrt(),
        mean_abs_bx,
        // each unordered pair appears twice in the ordered sum
        datta_lhs: 2.0 * sum_dot_sq / (rf * (rf - 1.0)),
        datta_rhs: nf * (rf - nf) / (rf - 1.0),
    })
}
