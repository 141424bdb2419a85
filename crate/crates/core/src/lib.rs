//! Conditional means with missing outcomes or covariates: assumption-free
//! identification intervals, the probability limits of imputation
//! estimates, and a simulation harness that checks them.
//!
//! * [`missing_outcome`]: `E(y | x)` when `y` is sometimes unobserved.
//! * [`missing_covariate`]: `E(y | x, w)` when `w` is sometimes unobserved.
//! * [`ecological`]: long probabilities from short distributions.
//! * [`rmi`]: imputation models, random completions and multiple imputation.
//! * [`simlab`]: populations, missingness mechanisms, sampling, experiments.
//! * [`cli`]: the `imputation-audit` command-line program.

pub mod cli;
pub mod domain;
pub mod ecological;
pub mod error;
pub mod missing_covariate;
pub mod missing_outcome;
pub mod rmi;
pub mod rng;
pub mod simlab;

pub use domain::{
    CellSelector, CovariateSpace, CovariateValue, FinitePopulation, Interval, ObservationRecord, ObservationTable,
    OutcomeDomain, Regime,
};
pub use error::{Error, Result};

/// Crate version, embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
