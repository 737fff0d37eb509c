use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{DesignSet, Strategy};
use crate::alloc::AllocationVector;
use crate::numeric::binomial_coefficient;
use crate::{Error, Result};

/// Largest `n` accepted by [`best_design`].
pub const BEST_MAX_N: usize = 26;

/// Canonical allocation as a bit mask (bit `i` set = subject `i` treated;
/// bit 0 always set) with its `|B_x|`.
#[derive(Clone, Copy)]
struct Candidate {
    abs_bx: f64,
    mask: u32,
}

impl Candidate {
    /// Entry order with -1 < +1: at the first differing index, the vector
    /// holding +1 is larger.
    fn lex_cmp(&self, other: &Self) -> Ordering {
        let diff = self.mask ^ other.mask;
        if diff == 0 {
            return Ordering::Equal;
        }
        let low = diff & diff.wrapping_neg();
        if self.mask & low != 0 {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.abs_bx
            .total_cmp(&other.abs_bx)
            .then_with(|| self.lex_cmp(other))
    }
}

/// Next integer with the same number of set bits (Gosper's hack).
fn next_combination(v: u32) -> u32 {
    let c = v & v.wrapping_neg();
    let r = v + c;
    (((r ^ v) >> 2) / c) | r
}

fn abs_bx(mask: u32, x: &[f64]) -> f64 {
    let s = x.iter().enumerate().fold(0.0, |acc, (i, &v)| {
        if mask >> i & 1 == 1 {
            acc + v
        } else {
            acc - v
        }
    });
    (s / x.len() as f64).abs()
}

/// The `R` mirrored pairs with the smallest `|B_x|` among all balanced
/// allocations, found by exhaustive enumeration.
///
/// Allocations are ranked by `|B_x|`, ties by entry order with `-1 < +1`.
/// Each pair is emitted as the member with first entry `+1`, then its mirror,
/// in ascending rank.
pub fn best_design(x: &[f64], r: usize) -> Result<DesignSet> {
    let n = x.len();
    if n < 2 || n % 2 == 1 {
        return Err(Error::invalid("n", format!("{n} must be even and at least 2")));
    }
    if n > BEST_MAX_N {
        return Err(Error::invalid(
            "n",
            format!("{n} exceeds the enumeration limit of {BEST_MAX_N}"),
        ));
    }
    if r == 0 {
        return Err(Error::invalid("R", "must be at least 1"));
    }
    let capacity = binomial_coefficient(n as u64, (n / 2) as u64) / 2;
    if r as u128 > capacity {
        return Err(Error::CapacityExceeded {
            requested: r,
            capacity,
        });
    }

    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(r + 1);
    let mut offer = |mask: u32| {
        let c = Candidate {
            abs_bx: abs_bx(mask, x),
            mask,
        };
        if heap.len() < r {
            heap.push(c);
        } else if c < *heap.peek().expect("heap is full") {
            heap.pop();
            heap.push(c);
        }
    };

    // Remaining n/2 - 1 treated subjects chosen among indices 1..n.
    let k = n / 2 - 1;
    if k == 0 {
        offer(1);
    } else {
        let limit = 1u32 << (n - 1);
        let mut g = (1u32 << k) - 1;
        while g < limit {
            offer((g << 1) | 1);
            g = next_combination(g);
        }
    }

    let unmirrored = heap
        .into_sorted_vec()
        .into_iter()
        .map(|c| AllocationVector::from_treated(n, (0..n).filter(|&i| c.mask >> i & 1 == 1)))
        .collect();
    DesignSet::from_unmirrored(Strategy::Best, unmirrored, None, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::{imbalance, normal_quantile_covariate};

    /// Every balanced allocation, sorted by the documented key.
    fn brute_force(x: &[f64]) -> Vec<AllocationVector> {
        let n = x.len();
        let mut all: Vec<AllocationVector> = (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == n / 2)
            .map(|m| AllocationVector::from_treated(n, (0..n).filter(|&i| m >> i & 1 == 1)))
            .collect();
        all.sort_by(|a, b| {
            imbalance(a, x)
                .unwrap()
                .abs()
                .total_cmp(&imbalance(b, x).unwrap().abs())
                .then_with(|| a.entries().cmp(b.entries()))
        });
        all
    }

    #[test]
    fn exhaustion_returns_all_of_w_fb() {
        let x = normal_quantile_covariate(8).unwrap();
        let d = best_design(x.values(), 35).unwrap();
        assert_eq!(d.allocations().len(), 70);
        let b: Vec<f64> = d
            .unmirrored()
            .map(|w| imbalance(w, x.values()).unwrap().abs())
            .collect();
        assert!(b.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn matches_sorted_brute_force() {
        let x = [0.3, -1.1, 2.2, 0.05, -0.7, 0.9, -1.4, -0.25];
        let expected: Vec<AllocationVector> = brute_force(&x)
            .into_iter()
            .filter(|w| w.entries()[0] == 1)
            .take(12)
            .collect();
        let d = best_design(&x, 12).unwrap();
        let got: Vec<AllocationVector> = d.unmirrored().cloned().collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn ties_break_by_entry_order() {
        // every allocation has |B_x| = 0
        let x = [0.0; 6];
        let d = best_design(&x, 3).unwrap();
        let s: Vec<String> = d.unmirrored().map(|w| w.to_sign_string()).collect();
        assert_eq!(s, ["+---++", "+--+-+", "+--++-"]);
    }

    #[test]
    fn guards() {
        assert!(best_design(&[0.0; 28], 1).is_err());
        assert!(matches!(
            best_design(&[0.1, -0.1, 0.2, -0.2], 4),
            Err(Error::CapacityExceeded { .. })
        ));
        let d = best_design(&[0.5, -0.5], 1).unwrap();
        assert_eq!(d.allocations()[0].to_sign_string(), "+-");
    }

    #[test]
    fn gosper_walks_all_combinations() {
        let mut g = 0b111u32;
        let mut count = 0;
        while g < 1 << 7 {
            assert_eq!(g.count_ones(), 3);
            count += 1;
            g = next_combination(g);
        }
        assert_eq!(count, 35);
    }
}
