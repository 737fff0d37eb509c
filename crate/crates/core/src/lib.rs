//! Restricted randomization designs for two-arm experiments and the power of
//! the randomization test.
//!
//! The crate is organized bottom-up:
//!
//! * [`alloc`]: allocation vectors, their correlations and imbalances.
//! * [`designs`]: samplers producing mirrored sets of allocations (BCRD,
//!   rerandomization, pairwise matching, greedy pair switching and the
//!   exhaustive "best" design), plus their CSV encoding.
//! * [`randtest`]: the response model, the differences-in-means estimator,
//!   the count-rule randomization test and empirical power.
//! * [`theory`]: asymptotic and finite-R power under the equicorrelated
//!   normal model, the density of the beat probability, the R = 2 toy case
//!   and the variability of power.
//! * [`sim`]: grid runners producing CSV tables and SVG charts.

pub mod alloc;
pub mod designs;
mod error;
pub mod numeric;
mod par;
pub mod randtest;
pub mod seed;
pub mod sim;
pub mod table;
pub mod theory;

pub use alloc::{AllocationVector, CovariateVector};
pub use designs::{DesignSet, Strategy};
pub use error::{Error, Result};
pub use randtest::{ExperimentScenario, PowerResult};
pub use theory::{QuadratureSpec, TheoryParams};
