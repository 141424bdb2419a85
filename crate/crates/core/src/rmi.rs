//! Imputation models, random completion of tables, and the multiple
//! imputation runner.
//!
//! A model is used in two ways. Against a [`FinitePopulation`] it is
//! evaluated exactly (the fill distribution the model converges to as the
//! sample grows), which is what the probability-limit formulas consume.
//! Against an [`ObservationTable`] it is first fitted into a [`FittedModel`]
//! and then used to draw completed tables.

use std::collections::BTreeMap;
use std::path::Path;

use ordered_float::OrderedFloat;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    CellSelector, CovariateSpace, CovariateValue, Discrete, FinitePopulation, ObservationRecord, ObservationTable,
    OutcomeDomain, Regime,
};
use crate::error::{Error, Result};
use crate::missing_covariate::{self, QCovariateModel};
use crate::missing_outcome;
use crate::rng::{stream_rng, StreamRng};

/// Assumed distribution of missing outcomes, `Q(y | x, z = 0)`, per `x` stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeQModel {
    strata: BTreeMap<CovariateValue, Discrete<f64>>,
}

impl OutcomeQModel {
    pub fn new(strata: BTreeMap<CovariateValue, Discrete<f64>>) -> Self {
        Self { strata }
    }

    /// The same distribution in every `x` stratum of `x_space`.
    pub fn uniform_over(x_space: &CovariateSpace, dist: Discrete<f64>) -> Self {
        Self {
            strata: x_space.values().map(|x| (x, dist.clone())).collect(),
        }
    }

    pub fn get(&self, x: CovariateValue) -> Option<&Discrete<f64>> {
        self.strata.get(&x)
    }

    pub fn strata(&self) -> &BTreeMap<CovariateValue, Discrete<f64>> {
        &self.strata
    }

    /// Parses `{"strata": [{"x": "name=level", "y": [[value, mass], ...]}]}`.
    pub fn from_json_str(text: &str, x_space: &CovariateSpace) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            strata: Vec<Stratum>,
        }
        #[derive(Deserialize)]
        struct Stratum {
            #[serde(default)]
            x: String,
            y: Vec<(f64, f64)>,
        }
        let file: File = serde_json::from_str(text)?;
        let mut strata = BTreeMap::new();
        for s in file.strata {
            let x = x_space.parse(&s.x)?;
            if strata.insert(x, Discrete::new(s.y)?).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate stratum x[{}]", s.x)));
            }
        }
        Ok(Self { strata })
    }

    pub fn from_path(path: impl AsRef<Path>, x_space: &CovariateSpace) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?, x_space)
    }
}

/// How imputations `u` are generated.
#[derive(Debug, Clone, PartialEq)]
pub enum ImputationModel {
    /// Missing `y` drawn from the observed `y` distribution in the same `x` stratum.
    MarOutcome,
    /// Missing `w` drawn from the observed `w` distribution in the same `(y, x)` stratum.
    MarCovariate,
    /// Missing `y` drawn from an assumed distribution.
    ExplicitOutcomeQ(OutcomeQModel),
    /// Missing `w` drawn from an assumed distribution.
    ExplicitCovariateQ(QCovariateModel),
    /// Missing `w` drawn from the distribution of `w` given `x` alone, ignoring `y`.
    Ecological,
}

impl ImputationModel {
    pub fn regime(&self) -> Regime {
        match self {
            Self::MarOutcome | Self::ExplicitOutcomeQ(_) => Regime::Outcome,
            Self::MarCovariate | Self::ExplicitCovariateQ(_) | Self::Ecological => Regime::Covariate,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MarOutcome => "mar",
            Self::MarCovariate => "marcov",
            Self::ExplicitOutcomeQ(_) | Self::ExplicitCovariateQ(_) => "q",
            Self::Ecological => "ecological",
        }
    }

    /// Explicit model equal to the population's true missing-outcome
    /// distribution `P(y | x, z = 0)`, on every `x` with missing mass.
    pub fn true_outcome(pop: &FinitePopulation) -> Result<Self> {
        let mut strata = BTreeMap::new();
        for x in pop.x_space().values() {
            let atoms: Vec<(f64, f64)> = pop
                .support()
                .iter()
                .map(|&y| (y, pop.mass_where(|c| c.x == x && !c.z && c.y == y)))
                .collect();
            if atoms.iter().any(|a| a.1 > 0.0) {
                strata.insert(x, Discrete::from_weights(atoms)?);
            }
        }
        Ok(Self::ExplicitOutcomeQ(OutcomeQModel { strata }))
    }

    /// Explicit model equal to the population's true missing-covariate
    /// distribution `P(w | y, x, z = 0)`.
    pub fn true_covariate(pop: &FinitePopulation) -> Result<Self> {
        let mut strata = BTreeMap::new();
        for x in pop.x_space().values() {
            for &y in pop.support() {
                let atoms: Vec<(CovariateValue, f64)> = pop
                    .w_space()
                    .values()
                    .map(|w| (w, pop.mass_where(|c| c.x == x && c.y == y && c.w == w && !c.z)))
                    .collect();
                if atoms.iter().any(|a| a.1 > 0.0) {
                    strata.insert((OrderedFloat(y), x), Discrete::from_weights(atoms)?);
                }
            }
        }
        Ok(Self::ExplicitCovariateQ(QCovariateModel::new(strata)))
    }

    fn expect_regime(&self, regime: Regime) -> Result<()> {
        if self.regime() == regime {
            Ok(())
        } else {
            Err(Error::RegimeMismatch(format!(
                "model {} does not fill the {regime:?} variable",
                self.name()
            )))
        }
    }

    /// `E(u | x = xi, z = 0)` for the model applied to `pop`.
    pub fn population_fill_mean(&self, pop: &FinitePopulation, xi: CovariateValue) -> Result<f64> {
        self.expect_regime(Regime::Outcome)?;
        let undefined = || Error::ModelUndefinedOnCell(format!("x[{}]", pop.x_space().label(xi)));
        match self {
            Self::MarOutcome => pop.mean_where(|c| c.x == xi && c.z).ok_or_else(undefined),
            Self::ExplicitOutcomeQ(q) => q.get(xi).map(Discrete::mean).ok_or_else(undefined),
            _ => unreachable!("regime checked"),
        }
    }

    /// `P(u = omega | y, x = xi, z = 0)` for the model applied to `pop`.
    pub fn population_fill_prob(
        &self,
        pop: &FinitePopulation,
        y: f64,
        xi: CovariateValue,
        omega: CovariateValue,
    ) -> Result<f64> {
        self.expect_regime(Regime::Covariate)?;
        let undefined = || Error::ModelUndefinedOnCell(format!("y={y} x[{}]", pop.x_space().label(xi)));
        match self {
            Self::MarCovariate => {
                let base = pop.mass_where(|c| c.x == xi && c.y == y && c.z);
                if base <= 0.0 {
                    return Err(undefined());
                }
                Ok(pop.mass_where(|c| c.x == xi && c.y == y && c.z && c.w == omega) / base)
            }
            Self::ExplicitCovariateQ(q) => q.get(y, xi).map(|d| d.prob_of(omega)).ok_or_else(undefined),
            Self::Ecological => {
                let base = pop.mass_where(|c| c.x == xi);
                if base <= 0.0 {
                    return Err(undefined());
                }
                Ok(pop.mass_where(|c| c.x == xi && c.w == omega) / base)
            }
            _ => unreachable!("regime checked"),
        }
    }
}

/// A model fitted to data, ready to draw imputations.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    /// Distribution of `u` given `x`, filling `y`.
    Outcome(BTreeMap<CovariateValue, Discrete<f64>>),
    /// Distribution of `u` given `(y, x)`, filling `w`.
    Covariate(BTreeMap<(OrderedFloat<f64>, CovariateValue), Discrete<CovariateValue>>),
    /// Distribution of `u` given `x` alone, filling `w`.
    CovariateGivenX(BTreeMap<CovariateValue, Discrete<CovariateValue>>),
}

impl FittedModel {
    pub fn regime(&self) -> Regime {
        match self {
            Self::Outcome(_) => Regime::Outcome,
            _ => Regime::Covariate,
        }
    }

    /// Mean of the fill distribution for missing outcomes at `x`.
    pub fn outcome_mean(&self, x: CovariateValue) -> Option<f64> {
        match self {
            Self::Outcome(m) => m.get(&x).map(Discrete::mean),
            _ => None,
        }
    }

    /// Fill distribution over `W` for a record with outcome `y` at `x`.
    pub fn covariate_dist(&self, y: f64, x: CovariateValue) -> Option<&Discrete<CovariateValue>> {
        match self {
            Self::Covariate(m) => m.get(&(OrderedFloat(y), x)),
            Self::CovariateGivenX(m) => m.get(&x),
            Self::Outcome(_) => None,
        }
    }
}

fn frequencies<K: Ord + Copy, V: Ord + Copy>(pairs: impl Iterator<Item = (K, V)>) -> BTreeMap<K, BTreeMap<V, usize>> {
    let mut out: BTreeMap<K, BTreeMap<V, usize>> = BTreeMap::new();
    for (k, v) in pairs {
        *out.entry(k).or_default().entry(v).or_default() += 1;
    }
    out
}

fn to_distributions<K: Ord, V: Copy>(freq: BTreeMap<K, BTreeMap<V, usize>>) -> BTreeMap<K, Discrete<V>> {
    freq.into_iter()
        .map(|(k, counts)| {
            let n: usize = counts.values().sum();
            let atoms = counts.into_iter().map(|(v, c)| (v, c as f64 / n as f64)).collect();
            (k, Discrete::from_weights(atoms).expect("counts are positive"))
        })
        .collect()
}

/// Fits `model` to `table`. MAR and ecological models become empirical
/// conditional distributions; explicit models pass through.
///
/// For [`ImputationModel::Ecological`] the table only has to carry observed
/// `(x, w)` pairs, so an auxiliary `(x, w)` sample can be fitted directly.
pub fn fit_model(model: &ImputationModel, table: &ObservationTable) -> Result<FittedModel> {
    let xs = table.x_space();
    match model {
        ImputationModel::MarOutcome => {
            require_regime(table, Regime::Outcome)?;
            let fitted = to_distributions(frequencies(
                table
                    .records()
                    .iter()
                    .filter_map(|r| r.y.map(|y| (r.x, OrderedFloat(y)))),
            ));
            let fitted: BTreeMap<_, _> = fitted
                .into_iter()
                .map(|(x, d)| {
                    (
                        x,
                        Discrete::new(d.atoms().map(|(v, p)| (v.0, p)).collect()).expect("normalized"),
                    )
                })
                .collect();
            if let Some(r) = table
                .records()
                .iter()
                .find(|r| r.y.is_none() && !fitted.contains_key(&r.x))
            {
                return Err(Error::UnfittableStratum(format!("x[{}]", xs.label(r.x))));
            }
            Ok(FittedModel::Outcome(fitted))
        }
        ImputationModel::ExplicitOutcomeQ(q) => {
            require_regime(table, Regime::Outcome)?;
            Ok(FittedModel::Outcome(q.strata.clone()))
        }
        ImputationModel::MarCovariate => {
            require_regime(table, Regime::Covariate)?;
            let fitted = to_distributions(frequencies(
                table
                    .records()
                    .iter()
                    .filter_map(|r| Some(((OrderedFloat(r.y?), r.x), r.w?))),
            ));
            if let Some(r) = table
                .records()
                .iter()
                .find(|r| r.w.is_none() && !fitted.contains_key(&(OrderedFloat(r.y.unwrap_or(f64::NAN)), r.x)))
            {
                return Err(Error::UnfittableStratum(format!(
                    "y={} x[{}]",
                    r.y.unwrap_or(f64::NAN),
                    xs.label(r.x)
                )));
            }
            Ok(FittedModel::Covariate(fitted))
        }
        ImputationModel::ExplicitCovariateQ(q) => {
            require_regime(table, Regime::Covariate)?;
            Ok(FittedModel::Covariate(q.strata().clone()))
        }
        ImputationModel::Ecological => {
            let fitted = to_distributions(frequencies(table.records().iter().filter_map(|r| Some((r.x, r.w?)))));
            if let Some(r) = table
                .records()
                .iter()
                .find(|r| r.w.is_none() && !fitted.contains_key(&r.x))
            {
                return Err(Error::UnfittableStratum(format!("x[{}]", xs.label(r.x))));
            }
            Ok(FittedModel::CovariateGivenX(fitted))
        }
    }
}

fn require_regime(table: &ObservationTable, regime: Regime) -> Result<()> {
    if table.supports(regime) {
        Ok(())
    } else {
        Err(Error::RegimeMismatch(format!(
            "table is not in the {regime:?}-missing regime"
        )))
    }
}

/// Replaces every missing value of `table` by an independent draw from the
/// fitted model, using stream 0 of `seed`.
pub fn draw_completion(table: &ObservationTable, fitted: &FittedModel, seed: u64) -> Result<ObservationTable> {
    draw_completion_with(table, fitted, &mut stream_rng(seed, 0))
}

/// [`draw_completion`] with a caller-supplied generator.
pub fn draw_completion_with<R: Rng + ?Sized>(
    table: &ObservationTable,
    fitted: &FittedModel,
    rng: &mut R,
) -> Result<ObservationTable> {
    require_regime(table, fitted.regime())?;
    let domain: &OutcomeDomain = table.domain();
    let xs = table.x_space();
    let mut records = Vec::with_capacity(table.len());
    for r in table.records() {
        let filled = match (r.y, r.w) {
            (None, _) => {
                let FittedModel::Outcome(m) = fitted else {
                    unreachable!("regime checked")
                };
                let dist = m
                    .get(&r.x)
                    .ok_or_else(|| Error::ModelUndefinedOnCell(format!("x[{}]", xs.label(r.x))))?;
                let u = dist.sample(rng);
                if !domain.contains(u) {
                    return Err(Error::ImputedValueOutOfDomain(u));
                }
                ObservationRecord { y: Some(u), ..*r }
            }
            (Some(y), None) => {
                let dist = fitted
                    .covariate_dist(y, r.x)
                    .ok_or_else(|| Error::ModelUndefinedOnCell(format!("y={y} x[{}]", xs.label(r.x))))?;
                let u = dist.sample(rng);
                if !table.w_space().contains(u) {
                    return Err(Error::CovariateOutOfDomain(format!("imputed w code {}", u.0)));
                }
                ObservationRecord { w: Some(u), ..*r }
            }
            _ => *r,
        };
        records.push(filled);
    }
    Ok(table.with_records(records))
}

/// Complete-data estimators that can be applied to each completed table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Mean of `y` at `x = xi` after filling missing outcomes.
    ImputationMean,
    /// Mean of `y` at `(x, w) = (xi, omega)` after filling missing covariates.
    ImputedLongMean,
}

impl Estimator {
    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::Outcome => Self::ImputationMean,
            Regime::Covariate => Self::ImputedLongMean,
        }
    }

    pub fn apply(&self, completed: &ObservationTable, sel: &CellSelector) -> Result<f64> {
        match self {
            Self::ImputationMean => missing_outcome::completed_cell_mean(completed, sel),
            Self::ImputedLongMean => missing_covariate::imputed_long_mean(completed, sel),
        }
    }
}

/// Per-draw and pooled estimates from `m` random completions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultipleImputationResult {
    pub per_draw_estimates: Vec<f64>,
    pub pooled_mean: f64,
    /// Across-draw sample standard deviation (zero when `m = 1`).
    pub pooled_dispersion: f64,
    pub m: usize,
    pub seed: u64,
}

impl MultipleImputationResult {
    fn from_draws(per_draw_estimates: Vec<f64>, seed: u64) -> Self {
        let m = per_draw_estimates.len();
        let pooled_mean = per_draw_estimates.iter().sum::<f64>() / m as f64;
        let pooled_dispersion = if m > 1 {
            let ss: f64 = per_draw_estimates.iter().map(|e| (e - pooled_mean).powi(2)).sum();
            (ss / (m - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            per_draw_estimates,
            pooled_mean,
            pooled_dispersion,
            m,
            seed,
        }
    }
}

/// Fits `model` to `table` and runs `m` completions; see [`run_multiple_imputation_fitted`].
pub fn run_multiple_imputation(
    table: &ObservationTable,
    model: &ImputationModel,
    m: usize,
    estimator: Estimator,
    sel: &CellSelector,
    seed: u64,
) -> Result<MultipleImputationResult> {
    let fitted = fit_model(model, table)?;
    run_multiple_imputation_fitted(table, &fitted, m, estimator, sel, seed)
}

/// Applies `estimator` to `m` independent completions of `table`. Draw `k`
/// uses stream `k` of `seed`; draws run in parallel and are collected by
/// index, so the result depends only on the inputs.
pub fn run_multiple_imputation_fitted(
    table: &ObservationTable,
    fitted: &FittedModel,
    m: usize,
    estimator: Estimator,
    sel: &CellSelector,
    seed: u64,
) -> Result<MultipleImputationResult> {
    if m == 0 {
        return Err(Error::InvalidExperiment(
            "number of imputations m must be at least 1".into(),
        ));
    }
    let outcomes: Vec<Result<f64>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let mut rng: StreamRng = stream_rng(seed, k as u64);
            let completed = draw_completion_with(table, fitted, &mut rng)?;
            estimator.apply(&completed, sel)
        })
        .collect();
    let mut estimates = Vec::with_capacity(m);
    for (index, o) in outcomes.into_iter().enumerate() {
        estimates.push(o.map_err(|e| Error::Draw {
            index,
            source: Box::new(e),
        })?);
    }
    Ok(MultipleImputationResult::from_draws(estimates, seed))
}
