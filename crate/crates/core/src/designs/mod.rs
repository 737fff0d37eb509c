//! Restricted randomization designs.
//!
//! Every sampler returns a [`DesignSet`] of `R` distinct unmirrored balanced
//! allocations, each followed by its mirror: `(w_1, -w_1, w_2, -w_2, ...)`.
//! No allocation equals another one or another one's mirror. Duplicates are
//! rejected during sampling; a sampler gives up after `100 R` rejected
//! duplicates.
//!
//! Imbalance thresholds are expressed in `B_x = w.x / n` units.

mod best;
mod csv;
pub use csv::DESIGN_HEADER;
mod samplers;

use std::fmt;
use std::str::FromStr;

use crate::alloc::AllocationVector;
use crate::{Error, Result};

pub use best::{best_design, BEST_MAX_N};
pub use samplers::{
    calibrate_threshold, greedy_pair_switch, sample_bcrd, sample_matching,
    sample_rerandomization, sample_rerandomization_with, switch_to_local_optimum,
    RerandThreshold, DUPLICATE_ATTEMPT_FACTOR,
};

/// Design strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Bcrd,
    Rerandomization,
    Matching,
    GreedyPairSwitch,
    Best,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Bcrd,
        Strategy::Rerandomization,
        Strategy::Matching,
        Strategy::GreedyPairSwitch,
        Strategy::Best,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Bcrd => "bcrd",
            Strategy::Rerandomization => "rerandomization",
            Strategy::Matching => "matching",
            Strategy::GreedyPairSwitch => "greedy_pair_switch",
            Strategy::Best => "best",
        }
    }

    /// Stable integer id used in seed derivation.
    pub fn id(self) -> u64 {
        match self {
            Strategy::Bcrd => 0,
            Strategy::Rerandomization => 1,
            Strategy::Matching => 2,
            Strategy::GreedyPairSwitch => 3,
            Strategy::Best => 4,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::invalid(
                    "strategy",
                    format!(
                        "{s:?}; expected one of bcrd, rerandomization, matching, greedy_pair_switch, best"
                    ),
                )
            })
    }
}

/// `2R` allocations laid out as mirrored pairs, with their provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSet {
    strategy: Strategy,
    allocations: Vec<AllocationVector>,
    threshold: Option<f64>,
    seed: u64,
}

impl DesignSet {
    /// Builds the mirrored layout from `R` unmirrored allocations and checks
    /// every invariant.
    pub fn from_unmirrored(
        strategy: Strategy,
        unmirrored: Vec<AllocationVector>,
        threshold: Option<f64>,
        seed: u64,
    ) -> Result<Self> {
        let mut allocations = Vec::with_capacity(2 * unmirrored.len());
        for w in unmirrored {
            let m = w.mirror();
            allocations.push(w);
            allocations.push(m);
        }
        Self::from_allocations(strategy, allocations, threshold, seed)
    }

    /// Takes a full `2R` layout and checks every invariant.
    pub fn from_allocations(
        strategy: Strategy,
        allocations: Vec<AllocationVector>,
        threshold: Option<f64>,
        seed: u64,
    ) -> Result<Self> {
        let d = DesignSet {
            strategy,
            allocations,
            threshold,
            seed,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("design", reason));
        if self.allocations.is_empty() || self.allocations.len() % 2 == 1 {
            return bad(format!(
                "needs a positive even number of allocations, got {}",
                self.allocations.len()
            ));
        }
        let n = self.allocations[0].len();
        if let Some(w) = self.allocations.iter().find(|w| w.len() != n) {
            return bad(format!("allocation lengths differ: {} vs {n}", w.len()));
        }
        let mut seen = std::collections::HashSet::with_capacity(self.r());
        for (k, pair) in self.allocations.chunks_exact(2).enumerate() {
            if pair[1] != pair[0].mirror() {
                return bad(format!("row {} is not the mirror of row {}", 2 * k + 1, 2 * k));
            }
            if !seen.insert(pair[0].canonical()) {
                return bad(format!(
                    "allocation {} repeats an earlier allocation or its mirror",
                    2 * k
                ));
            }
        }
        if let Some(a) = self.threshold {
            if a.is_nan() || a < 0.0 {
                return bad(format!("threshold {a} must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of subjects.
    pub fn n(&self) -> usize {
        self.allocations[0].len()
    }

    /// Number of mirrored pairs.
    pub fn r(&self) -> usize {
        self.allocations.len() / 2
    }

    pub fn allocations(&self) -> &[AllocationVector] {
        &self.allocations
    }

    /// `w_1, w_2, ..., w_R` (the even rows).
    pub fn unmirrored(&self) -> impl Iterator<Item = &AllocationVector> + '_ {
        self.allocations.iter().step_by(2)
    }
}

/// A strategy bound to its covariate and (for rerandomization) its threshold,
/// ready to produce designs for any seed.
#[derive(Clone, Debug)]
pub struct DesignGenerator {
    pub strategy: Strategy,
    pub x: Vec<f64>,
    /// Rerandomization threshold in `B_x` units.
    pub threshold: Option<f64>,
}

impl DesignGenerator {
    pub fn new(strategy: Strategy, x: &[f64], threshold: Option<f64>) -> Result<Self> {
        if strategy == Strategy::Rerandomization && threshold.is_none() {
            return Err(Error::invalid(
                "threshold",
                "rerandomization needs a calibrated threshold",
            ));
        }
        Ok(DesignGenerator {
            strategy,
            x: x.to_vec(),
            threshold,
        })
    }

    pub fn generate(&self, r: usize, seed: u64) -> Result<DesignSet> {
        let n = self.x.len();
        match self.strategy {
            Strategy::Bcrd => sample_bcrd(n, r, seed),
            Strategy::Rerandomization => {
                sample_rerandomization(&self.x, self.threshold.unwrap_or(f64::INFINITY), r, seed)
            }
            Strategy::Matching => sample_matching(&self.x, r, seed),
            Strategy::GreedyPairSwitch => greedy_pair_switch(&self.x, r, seed),
            Strategy::Best => best_design(&self.x, r),
        }
    }

    /// Whether the generator ignores its seed.
    pub fn is_deterministic(&self) -> bool {
        self.strategy == Strategy::Best
    }
}
