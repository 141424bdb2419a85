//! Exhaustive reference for the binary-outcome long-mean bounds.
//!
//! Every unit with a missing covariate belongs to a `(y, x)` stratum whose
//! mass may be spread over `W` in any way. The long mean at `(xi, omega)` is
//! a ratio of two functions that are affine in these allocations, so over
//! the box of allocations its extrema sit at vertices: each stratum puts all
//! of its mass on `omega` or all of it elsewhere. Vertices where the target
//! cell is empty are skipped; near such a vertex the ratio is a mediant of
//! the ratios along its edges, hence bounded by neighbouring vertex values.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use rayon::prelude::*;

use super::covariate_regime;
use crate::domain::{CellSelector, CovariateValue, FinitePopulation, Interval};
use crate::error::{Error, Result};

/// Largest number of missing-covariate strata the oracle will enumerate.
pub const ORACLE_MAX_STRATA: usize = 12;

/// Range of `E(y | x = xi, w = omega)` over all completions of the
/// population's missing covariates, by vertex enumeration.
pub fn binary_bounds_oracle(pop: &FinitePopulation, sel: &CellSelector) -> Result<Interval> {
    covariate_regime(pop)?;
    if !pop.is_binary() {
        return Err(Error::NonBinaryOutcome);
    }
    let omega = sel.require_omega()?;
    let elsewhere = pop.w_space().values().find(|&w| w != omega);

    let mut strata: BTreeMap<(OrderedFloat<f64>, CovariateValue), f64> = BTreeMap::new();
    let mut observed: BTreeMap<(OrderedFloat<f64>, CovariateValue, CovariateValue), f64> = BTreeMap::new();
    for c in pop.cells().iter().filter(|c| c.mass > 0.0) {
        if c.z {
            *observed.entry((OrderedFloat(c.y), c.x, c.w)).or_default() += c.mass;
        } else {
            *strata.entry((OrderedFloat(c.y), c.x)).or_default() += c.mass;
        }
    }
    if strata.len() > ORACLE_MAX_STRATA {
        return Err(Error::TooManyStrata {
            strata: strata.len(),
            cap: ORACLE_MAX_STRATA,
        });
    }
    let strata: Vec<_> = strata.into_iter().collect();

    let evaluate = |mask: u32| -> Option<f64> {
        let mut joint = observed.clone();
        for (bit, &((y, x), mass)) in strata.iter().enumerate() {
            let w = if mask & (1 << bit) != 0 { omega } else { elsewhere? };
            *joint.entry((y, x, w)).or_default() += mass;
        }
        let (m, ym) = joint
            .iter()
            .filter(|((_, x, w), _)| *x == sel.xi && *w == omega)
            .fold((0.0, 0.0), |(m, ym), ((y, _, _), &mass)| (m + mass, ym + y.0 * mass));
        (m > 0.0).then(|| ym / m)
    };

    let (lo, hi) = (0..1u32 << strata.len())
        .into_par_iter()
        .filter_map(evaluate)
        .fold(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), v| (lo.min(v), hi.max(v)),
        )
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        );
    if lo > hi {
        return Err(Error::ZeroDenominator(sel.describe(pop.x_space(), pop.w_space())));
    }
    Interval::new(lo, hi)
}
