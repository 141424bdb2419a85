//! Shared data types: outcome domains, covariate spaces, observation tables,
//! finite populations, intervals and cell selectors.

mod covariates;
mod discrete;
mod population;
mod table;

pub use covariates::{check_cell_cap, CovariateRole, CovariateSpace, CovariateValue, MAX_COVARIATE_CELLS};
pub use discrete::Discrete;
pub use population::{validate_population, FinitePopulation, PopCell};
pub use table::{cell_partition, empirical_cond, CellPartition, ObservationRecord, ObservationTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total probability mass.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Tolerance for equalities between derived population quantities.
pub const DERIVED_TOL: f64 = 1e-9;

/// Which variable is subject to nonresponse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `y` may be missing, covariates always observed.
    Outcome,
    /// `w` may be missing, `(y, x)` always observed.
    Covariate,
}

/// Closed outcome domain `[lo, hi]`, optionally restricted to `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDomain {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub binary: bool,
}

impl OutcomeDomain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidDomain(format!("[{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, binary: false })
    }

    pub fn binary() -> Self {
        Self {
            lo: 0.0,
            hi: 1.0,
            binary: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.binary && (self.lo != 0.0 || self.hi != 1.0) {
            return Err(Error::InvalidDomain("binary domain must be [0, 1]".into()));
        }
        Self::new(self.lo, self.hi).map(|_| ())
    }

    pub fn contains(&self, y: f64) -> bool {
        if self.binary {
            y == 0.0 || y == 1.0
        } else {
            y >= self.lo && y <= self.hi
        }
    }

    pub fn check(&self, y: f64) -> Result<()> {
        if self.contains(y) {
            Ok(())
        } else {
            Err(Error::OutcomeOutOfDomain { value: y, line: None })
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn as_interval(&self) -> Interval {
        Interval {
            lo: self.lo,
            hi: self.hi,
        }
    }
}

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Membership with absolute slack `tol` on both ends.
    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn is_subset_of(&self, other: &Interval, tol: f64) -> bool {
        self.lo >= other.lo - tol && self.hi <= other.hi + tol
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Largest squared distance from `c` to a point of the interval, i.e. the
    /// worst-case squared bias of reporting `c` when the estimand may be
    /// anywhere in the interval.
    pub fn max_squared_bias(&self, c: f64) -> f64 {
        (c - self.lo).powi(2).max((c - self.hi).powi(2))
    }
}

/// Target cell `x = xi` and, for covariate-missing analyses, `w = omega`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSelector {
    pub xi: CovariateValue,
    pub omega: Option<CovariateValue>,
}

impl CellSelector {
    pub fn at(xi: CovariateValue) -> Self {
        Self { xi, omega: None }
    }

    pub fn long(xi: CovariateValue, omega: CovariateValue) -> Self {
        Self { xi, omega: Some(omega) }
    }

    pub(crate) fn require_omega(&self) -> Result<CovariateValue> {
        self.omega
            .ok_or_else(|| Error::RegimeMismatch("selector needs a w value for covariate analyses".into()))
    }

    pub fn describe(&self, x: &CovariateSpace, w: &CovariateSpace) -> String {
        match self.omega {
            None => format!("x[{}]", x.label(self.xi)),
            Some(o) => format!("x[{}] w[{}]", x.label(self.xi), w.label(o)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_validation() {
        assert!(OutcomeDomain::new(1.0, 1.0).is_err());
        assert!(OutcomeDomain::new(0.0, f64::INFINITY).is_err());
        let b = OutcomeDomain::binary();
        assert!(b.contains(1.0) && !b.contains(0.5));
        assert!(OutcomeDomain::new(0.0, 1.0).unwrap().contains(0.5));
    }

    #[test]
    fn interval_basics() {
        assert!(Interval::new(1.0, 0.0).is_err());
        let i = Interval::new(0.35, 0.85).unwrap();
        assert!((i.midpoint() - 0.6).abs() < 1e-15);
        assert!((i.width() - 0.5).abs() < 1e-15);
        assert!(i.contains(0.8, 0.0) && !i.contains(0.9, 0.0));
        assert_eq!(i.max_squared_bias(0.35), (0.5f64).powi(2));
    }
}
