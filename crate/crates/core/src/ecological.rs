//! Ecological inference for a binary outcome: bounds on the long
//! probability `P(y = 1 | x = xi, w = omega)` from the short distributions
//! `P(y | x)` and `P(w | x)`, and the probability limit of imputing `w`
//! from `P(w | x)` when `w` is never observed.

use serde::{Deserialize, Serialize};

use crate::domain::{CellSelector, FinitePopulation, Interval};
use crate::error::{Error, Result};
use crate::missing_covariate::{covariate_regime, plim_imputed_long_mean};
use crate::rmi::ImputationModel;

/// The two observable short probabilities at `x = xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortDistributions {
    p_y1: f64,
    p_w: f64,
}

impl ShortDistributions {
    /// `p_y1 = P(y = 1 | x = xi)`, `p_w = P(w = omega | x = xi)`.
    pub fn new(p_y1: f64, p_w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_y1) {
            return Err(Error::ProbabilityOutOfRange(format!("P(y=1|x) = {p_y1}")));
        }
        if !(p_w > 0.0 && p_w <= 1.0) {
            return Err(Error::ProbabilityOutOfRange(format!(
                "P(w=omega|x) = {p_w} must lie in (0, 1]"
            )));
        }
        Ok(Self { p_y1, p_w })
    }

    pub fn p_y1(&self) -> f64 {
        self.p_y1
    }

    pub fn p_w(&self) -> f64 {
        self.p_w
    }
}

/// Assumption-free interval for `P(y = 1 | x = xi, w = omega)`.
pub fn duncan_davis_bounds(sd: &ShortDistributions) -> Interval {
    let hi = (sd.p_y1 / sd.p_w).min(1.0);
    let lo = ((sd.p_y1 - (1.0 - sd.p_w)) / sd.p_w).max(0.0).min(hi);
    Interval { lo, hi }
}

/// Reference computation of [`duncan_davis_bounds`]: enumerates the
/// vertices of the set of 2x2 joint distributions of `(y, 1[w = omega])`
/// with the given margins and returns the range of `P(y = 1 | w = omega)`.
pub fn duncan_davis_oracle(sd: &ShortDistributions) -> Interval {
    let (py, pw) = (sd.p_y1, sd.p_w);
    // joint table parameterized by t = P(y = 1, w = omega)
    let cells = |t: f64| [t, pw - t, py - t, 1.0 - py - pw + t];
    let feasible = |t: f64| cells(t).iter().all(|&m| m >= -1e-15);
    // each vertex makes one cell of the table vanish
    let candidates = [0.0, pw, py, py + pw - 1.0];
    let (lo, hi) = candidates
        .iter()
        .copied()
        .filter(|&t| feasible(t))
        .map(|t| (t.max(0.0) / pw).clamp(0.0, 1.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Interval { lo, hi }
}

/// Probability limit of the long-mean imputation estimate when `w` is
/// never observed and imputations are drawn from `P(w | x)`. Since the
/// imputations are independent of `y` given `x`, the limit is the short
/// mean `E(y | x = xi)` whatever `omega` is.
pub fn ecological_plim(pop: &FinitePopulation, sel: &CellSelector) -> Result<f64> {
    covariate_regime(pop)?;
    if pop.mass_where(|c| c.z) > 0.0 {
        return Err(Error::RegimeMismatch(
            "ecological setting requires every w to be unobserved".into(),
        ));
    }
    plim_imputed_long_mean(pop, &ImputationModel::Ecological, sel)
}
