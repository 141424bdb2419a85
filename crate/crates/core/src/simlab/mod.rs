//! Populations, missingness mechanisms, sampling and Monte Carlo
//! experiments that check probability limits and bias gaps numerically.

mod experiment;
pub mod fixtures;
mod generate;

pub use experiment::{
    convergence_experiment, estimand, ConvergenceReport, ConvergenceRow, Experiment, ExperimentSpec, ModelSpec,
    PopulationRef, Replication, SimEstimator,
};
pub use generate::{
    apply_mechanism, random_base, random_mar_population, random_population, sample_auxiliary_with, sample_table,
    sample_table_with, BaseCell, BaseDistribution, MissingnessMechanism, RandomPopulationSpec,
};

use serde::Serialize;

use crate::domain::{CellSelector, FinitePopulation, Interval, Regime, DERIVED_TOL};
use crate::error::{Error, Result};
use crate::missing_covariate::{binary_bounds_closed_form, binary_bounds_oracle, matching_conditions, BoundsSource};
use crate::missing_outcome::{consistency_condition, identification_interval_pop};
use crate::rmi::ImputationModel;

/// Exact comparison of an imputation estimate's limit with the estimand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasGapReport {
    pub plim: f64,
    pub truth: f64,
    /// `plim - truth`.
    pub gap: f64,
    /// Assumption-free identification interval for the estimand.
    pub interval: Interval,
    pub truth_covered: bool,
    pub imputation_point_in_interval: bool,
    /// Whether the model's consistency conditions hold on `pop`.
    pub conditions_hold: bool,
}

impl BiasGapReport {
    pub fn is_consistent(&self) -> bool {
        self.gap.abs() <= DERIVED_TOL
    }
}

/// Probability limit, truth and identification interval for `model` on
/// `pop`. In the covariate regime the interval comes from the exhaustive
/// oracle, or the closed form when there are too many strata to enumerate.
pub fn bias_gap(pop: &FinitePopulation, model: &ImputationModel, sel: &CellSelector) -> Result<BiasGapReport> {
    if model.regime() != pop.regime() {
        return Err(Error::RegimeMismatch(format!(
            "model {} does not match the population",
            model.name()
        )));
    }
    let (plim, interval, conditions_hold) = match pop.regime() {
        Regime::Outcome => (
            SimEstimator::ImputationMean.plim(pop, model, sel)?,
            identification_interval_pop(pop, sel, pop.domain())?,
            consistency_condition(pop, model, sel)?,
        ),
        Regime::Covariate => {
            let interval = match binary_bounds_oracle(pop, sel) {
                Err(Error::TooManyStrata { .. }) => binary_bounds_closed_form(BoundsSource::Population(pop), sel)?,
                other => other?,
            };
            let (mass, mean) = matching_conditions(pop, model, sel)?;
            (
                SimEstimator::ImputedLongMean.plim(pop, model, sel)?,
                interval,
                mass && mean,
            )
        }
    };
    let truth = estimand(pop, pop.regime(), sel)?;
    Ok(BiasGapReport {
        plim,
        truth,
        gap: plim - truth,
        interval,
        truth_covered: interval.contains(truth, DERIVED_TOL),
        imputation_point_in_interval: interval.contains(plim, DERIVED_TOL),
        conditions_hold,
    })
}
