//! Power of the randomization test under the equicorrelated normal model.
//!
//! With `gamma = sqrt(n) beta`, unmirrored estimates in one row are
//!
//! ```text
//! V_11 = sqrt(rho) Z_0 + sqrt(1 - rho) Z_1 + gamma
//! V_1j = sqrt(rho) Z_0 + sqrt(1 - rho) Z_j + rho gamma,   j = 2..R
//! ```
//!
//! each accompanied by its negation, with `Z_0, ..., Z_R` iid standard normal.

mod asymptotic;
mod density;
mod finite;
mod se;
mod toy;

pub use asymptotic::{asymptotic_power, solve_qz};
pub use density::{density_crossings, density_ft, density_ft_mass, solve_uat};
pub use finite::{finite_power, p_of_us, McEstimate};
pub use se::{power_se, PowerSe};
pub use toy::{toy_h, toy_power_r2, toy_slope};

use crate::table::format_real;
use crate::{Error, Result};

/// Standardized effect, uniform absolute allocation correlation, number of
/// mirrored pairs and test level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryParams {
    pub gamma: f64,
    pub rho: f64,
    pub r: usize,
    pub alpha: f64,
}

impl TheoryParams {
    pub fn new(gamma: f64, rho: f64, r: usize, alpha: f64) -> Result<Self> {
        let p = TheoryParams { gamma, rho, r, alpha };
        p.validate()?;
        Ok(p)
    }

    /// `gamma = sqrt(n) beta`.
    pub fn from_effect(n: usize, beta: f64, rho: f64, r: usize, alpha: f64) -> Result<Self> {
        Self::new((n as f64).sqrt() * beta, rho, r, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("{} must be finite and >= 0", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid("rho", format!("{} is outside [0, 1)", self.rho)));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::invalid("alpha", format!("{} is outside (0, 0.5)", self.alpha)));
        }
        if self.r == 0 {
            return Err(Error::invalid("R", "must be at least 1"));
        }
        Ok(())
    }
}

/// Monte Carlo size and quadrature settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub mc_samples: usize,
    /// Root tolerance on the argument.
    pub root_tol: f64,
    /// Half-width of truncated normal domains, in standard deviations.
    pub extent: f64,
    /// Initial Simpson subintervals.
    pub intervals: usize,
    /// Simpson refinement stops when successive halvings differ by less.
    pub refine_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            mc_samples: 1_000_000,
            root_tol: 1e-12,
            extent: 8.0,
            intervals: 2000,
            refine_tol: 1e-6,
        }
    }
}

impl QuadratureSpec {
    pub fn with_mc(mc_samples: usize) -> Result<Self> {
        let q = QuadratureSpec {
            mc_samples,
            ..Default::default()
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_samples < 10_000 {
            return Err(Error::invalid(
                "mc_samples",
                format!("{} < 10000", self.mc_samples),
            ));
        }
        if !(self.root_tol > 0.0 && self.root_tol <= 1e-10) {
            return Err(Error::invalid("root_tol", format!("{} is outside (0, 1e-10]", self.root_tol)));
        }
        if !(self.extent > 0.0) || self.intervals < 2 || !(self.refine_tol > 0.0) {
            return Err(Error::invalid("quadrature", "extent, intervals and refine_tol must be positive"));
        }
        Ok(())
    }
}

/// Kind of theoretical computation in a [`TheoryRow`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TheoryMode {
    Finite,
    Asymptotic,
    ToyR2,
    Se,
}

impl TheoryMode {
    pub fn name(self) -> &'static str {
        match self {
            TheoryMode::Finite => "finite",
            TheoryMode::Asymptotic => "asymptotic",
            TheoryMode::ToyR2 => "toy_r2",
            TheoryMode::Se => "se",
        }
    }
}

impl std::str::FromStr for TheoryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [TheoryMode::Finite, TheoryMode::Asymptotic, TheoryMode::ToyR2, TheoryMode::Se]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid("mode", format!("unknown theory mode {s:?}")))
    }
}

pub const THEORY_HEADER: &str = "mode,R,rho,gamma,alpha,power,se,mc_samples,seed";

/// One line of theory output. `r` is empty for R-free quantities; `se` rows
/// carry the standard deviation of power in the `se` column and the
/// asymptotic power in the `power` column.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryRow {
    pub mode: TheoryMode,
    pub r: Option<usize>,
    pub rho: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub power: f64,
    pub se: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl TheoryRow {
    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.mode.name(),
            self.r.map(|r| r.to_string()).unwrap_or_default(),
            format_real(self.rho),
            format_real(self.gamma),
            format_real(self.alpha),
            format_real(self.power),
            format_real(self.se),
            self.mc_samples,
            self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(TheoryParams::new(1.0, 1.0, 10, 0.05).is_err());
        assert!(TheoryParams::new(-1.0, 0.1, 10, 0.05).is_err());
        assert!(TheoryParams::new(1.0, 0.1, 10, 0.5).is_err());
        assert!(TheoryParams::new(1.0, 0.1, 0, 0.05).is_err());
        let p = TheoryParams::from_effect(26, 0.25, 0.0, 10, 0.05).unwrap();
        assert!((p.gamma - 1.2747548783981961).abs() < 1e-12);
    }

    #[test]
    fn quadrature_validation() {
        assert!(QuadratureSpec::with_mc(9999).is_err());
        assert!(QuadratureSpec::default().validate().is_ok());
        let q = QuadratureSpec {
            root_tol: 1e-8,
            ..Default::default()
        };
        assert!(q.validate().is_err());
    }

    #[test]
    fn modes_round_trip() {
        for m in [TheoryMode::Finite, TheoryMode::Asymptotic, TheoryMode::ToyR2, TheoryMode::Se] {
            assert_eq!(m.name().parse::<TheoryMode>().unwrap(), m);
        }
    }
}
