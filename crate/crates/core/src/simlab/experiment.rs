use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_auxiliary_with, sample_table_with};
use crate::domain::{CellSelector, CovariateSpace, FinitePopulation, Regime};
use crate::error::{Error, Result};
use crate::missing_covariate::{
    binary_bounds_closed_form, mixture_conditional_mean, mixture_joint_estimate, plim_imputed_long_mean, q_from_fitted,
    true_long_mean, BoundsSource, QCovariateModel,
};
use crate::missing_outcome::{
    identification_interval_pop, plim_imputation_mean, q_mean_estimate, sample_interval, true_mean,
};
use crate::rmi::{draw_completion_with, fit_model, Estimator, FittedModel, ImputationModel, OutcomeQModel};
use crate::rng::{replication_stream, stream_rng, StreamRng};

/// Textual model choice: `mar`, `marcov`, `ecological`, `true`, `q` (with
/// an inline distribution) or `q:FILE`.
///
/// `mar` means missing at random for whichever variable the data leave
/// missing; `true` (populations only) imputes from the population's own
/// missing-data distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Mar,
    MarCovariate,
    Ecological,
    True,
    QInline,
    QFile(PathBuf),
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mar" => Ok(Self::Mar),
            "marcov" => Ok(Self::MarCovariate),
            "ecological" => Ok(Self::Ecological),
            "true" => Ok(Self::True),
            "q" => Ok(Self::QInline),
            _ => match s.strip_prefix("q:") {
                Some(path) if !path.is_empty() => Ok(Self::QFile(PathBuf::from(path))),
                _ => Err(Error::InvalidConfig(format!(
                    "unknown model {s:?} (expected mar, marcov, ecological, true, q:FILE)"
                ))),
            },
        }
    }
}

impl ModelSpec {
    /// Builds the model for data in `regime`. `q` is the inline distribution
    /// for [`ModelSpec::QInline`]; relative `q:FILE` paths resolve against `base`.
    pub fn resolve(
        &self,
        regime: Regime,
        x_space: &CovariateSpace,
        w_space: &CovariateSpace,
        pop: Option<&FinitePopulation>,
        q: Option<&serde_json::Value>,
        base: &Path,
    ) -> Result<ImputationModel> {
        let parse_q = |text: &str| -> Result<ImputationModel> {
            Ok(match regime {
                Regime::Outcome => ImputationModel::ExplicitOutcomeQ(OutcomeQModel::from_json_str(text, x_space)?),
                Regime::Covariate => {
                    ImputationModel::ExplicitCovariateQ(QCovariateModel::from_json_str(text, x_space, w_space)?)
                }
            })
        };
        let model = match self {
            Self::Mar => match regime {
                Regime::Outcome => ImputationModel::MarOutcome,
                Regime::Covariate => ImputationModel::MarCovariate,
            },
            Self::MarCovariate => ImputationModel::MarCovariate,
            Self::Ecological => ImputationModel::Ecological,
            Self::True => {
                let pop = pop.ok_or_else(|| Error::InvalidConfig("model `true` needs a population".into()))?;
                match regime {
                    Regime::Outcome => ImputationModel::true_outcome(pop)?,
                    Regime::Covariate => ImputationModel::true_covariate(pop)?,
                }
            }
            Self::QInline => {
                let q = q.ok_or_else(|| Error::InvalidConfig("model `q` needs an inline `q` distribution".into()))?;
                parse_q(&q.to_string())?
            }
            Self::QFile(path) => parse_q(&std::fs::read_to_string(base.join(path))?)?,
        };
        if model.regime() != regime {
            return Err(Error::RegimeMismatch(format!(
                "model {} does not match the {regime:?}-missing data",
                model.name()
            )));
        }
        Ok(model)
    }
}

/// Estimators the simulation harness can run on a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimEstimator {
    /// Single random imputation, then the cell mean of `y`.
    ImputationMean,
    /// Missing outcomes replaced by the model's mean.
    QMean,
    /// Midpoint of the sample identification interval.
    Midpoint,
    /// Single random imputation of `w`, then the long-cell mean.
    ImputedLongMean,
    /// Midpoint of the sample binary long-mean bounds.
    MidpointLong,
    /// Long mean of the mixture joint estimate.
    Mixture,
}

impl SimEstimator {
    pub fn regime(&self) -> Regime {
        match self {
            Self::ImputationMean | Self::QMean | Self::Midpoint => Regime::Outcome,
            Self::ImputedLongMean | Self::MidpointLong | Self::Mixture => Regime::Covariate,
        }
    }

    fn uses_model(&self) -> bool {
        !matches!(self, Self::Midpoint | Self::MidpointLong)
    }

    /// Probability limit of the estimator on `pop`.
    pub fn plim(&self, pop: &FinitePopulation, model: &ImputationModel, sel: &CellSelector) -> Result<f64> {
        match self {
            // replacing by the fill mean has the same limit as drawing from the fill distribution
            Self::ImputationMean | Self::QMean => plim_imputation_mean(pop, model, sel),
            Self::Midpoint => Ok(identification_interval_pop(pop, sel, pop.domain())?.midpoint()),
            // the mixture measure is the expectation of the completed empirical measure
            Self::ImputedLongMean | Self::Mixture => plim_imputed_long_mean(pop, model, sel),
            Self::MidpointLong => Ok(binary_bounds_closed_form(BoundsSource::Population(pop), sel)?.midpoint()),
        }
    }

    /// One estimate from a fresh sample of size `n`.
    pub fn estimate_once(
        &self,
        pop: &FinitePopulation,
        model: &ImputationModel,
        sel: &CellSelector,
        n: usize,
        rng: &mut StreamRng,
    ) -> Result<Replication> {
        let table = sample_table_with(pop, n, rng)?;
        let fitted = if !self.uses_model() {
            None
        } else if matches!(model, ImputationModel::Ecological) {
            Some(fit_model(model, &sample_auxiliary_with(pop, n, rng)?)?)
        } else {
            Some(fit_model(model, &table)?)
        };
        let mut endpoints = None;
        let estimate = match (self, fitted.as_ref()) {
            (Self::ImputationMean | Self::ImputedLongMean, Some(f)) => {
                let completed = draw_completion_with(&table, f, rng)?;
                Estimator::for_regime(self.regime()).apply(&completed, sel)?
            }
            (Self::QMean, Some(f)) => {
                let e_q = f
                    .outcome_mean(sel.xi)
                    .ok_or_else(|| Error::UnfittableStratum(sel.describe(pop.x_space(), pop.w_space())))?;
                q_mean_estimate(&table, sel, e_q)?
            }
            (Self::Midpoint, _) => {
                let iv = sample_interval(&table, sel)?;
                endpoints = Some((iv.lo, iv.hi));
                iv.midpoint()
            }
            (Self::MidpointLong, _) => {
                let iv = binary_bounds_closed_form(BoundsSource::Sample(&table), sel)?;
                endpoints = Some((iv.lo, iv.hi));
                iv.midpoint()
            }
            (Self::Mixture, Some(f)) => {
                let q = mixture_q(f, pop)?;
                mixture_conditional_mean(&mixture_joint_estimate(&table, &q)?, sel)?
            }
            _ => unreachable!("fitted model present for model-based estimators"),
        };
        Ok(Replication { estimate, endpoints })
    }
}

fn mixture_q(fitted: &FittedModel, pop: &FinitePopulation) -> Result<QCovariateModel> {
    q_from_fitted(fitted, pop.x_space(), pop.support())
        .ok_or_else(|| Error::RegimeMismatch("mixture estimate needs a covariate model".into()))
}

/// Output of one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication {
    pub estimate: f64,
    /// Sample interval endpoints, for interval-based estimators.
    pub endpoints: Option<(f64, f64)>,
}

/// Where an experiment's population comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PopulationRef {
    Path(PathBuf),
    Inline(serde_json::Value),
}

/// Experiment file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub population: PopulationRef,
    pub model: String,
    /// Inline distribution for `"model": "q"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<serde_json::Value>,
    pub estimator: SimEstimator,
    pub xi: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl ExperimentSpec {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Loads referenced files (relative to `base`), validates the spec and
    /// returns the runnable experiment together with a self-contained copy
    /// of the spec in which the population and any `q` file are inlined.
    pub fn resolve(&self, base: &Path) -> Result<(Experiment, ExperimentSpec)> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidExperiment(
                "n_grid must be nonempty and strictly increasing".into(),
            ));
        }
        if self.n_grid[0] == 0 {
            return Err(Error::InvalidExperiment("sample sizes must be positive".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidExperiment("reps must be at least 1".into()));
        }
        if !self.tolerance.is_finite() || self.tolerance < 0.0 {
            return Err(Error::InvalidExperiment(format!(
                "tolerance {} must be nonnegative",
                self.tolerance
            )));
        }
        let (pop, pop_json) = match &self.population {
            PopulationRef::Path(p) => {
                let text = std::fs::read_to_string(base.join(p))?;
                (FinitePopulation::from_json_str(&text)?, serde_json::from_str(&text)?)
            }
            PopulationRef::Inline(v) => (FinitePopulation::from_json_str(&v.to_string())?, v.clone()),
        };
        let regime = pop.regime();
        if self.estimator.regime() != regime {
            return Err(Error::RegimeMismatch(format!(
                "estimator {:?} does not apply to the {regime:?}-missing population",
                self.estimator
            )));
        }
        let xi = pop.x_space().parse(&self.xi)?;
        let sel = match (&self.omega, regime) {
            (Some(o), Regime::Covariate) => CellSelector::long(xi, pop.w_space().parse(o)?),
            (None, Regime::Outcome) => CellSelector::at(xi),
            (Some(_), Regime::Outcome) => {
                return Err(Error::InvalidExperiment(
                    "omega is only meaningful for covariate-missing populations".into(),
                ))
            }
            (None, Regime::Covariate) => {
                return Err(Error::InvalidExperiment("covariate experiments need omega".into()))
            }
        };
        let model_spec: ModelSpec = self.model.parse()?;
        let model = model_spec.resolve(regime, pop.x_space(), pop.w_space(), Some(&pop), self.q.as_ref(), base)?;

        let mut resolved = self.clone();
        resolved.population = PopulationRef::Inline(pop_json);
        if let ModelSpec::QFile(path) = &model_spec {
            resolved.model = "q".into();
            resolved.q = Some(serde_json::from_str(&std::fs::read_to_string(base.join(path))?)?);
        }
        let experiment = Experiment {
            pop,
            model,
            estimator: self.estimator,
            sel,
            n_grid: self.n_grid.clone(),
            reps: self.reps,
            seed: self.seed,
            tolerance: self.tolerance,
        };
        Ok((experiment, resolved))
    }
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub pop: FinitePopulation,
    pub model: ImputationModel,
    pub estimator: SimEstimator,
    pub sel: CellSelector,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub tolerance: f64,
}

/// Deviation summary at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub reps: usize,
    pub skipped: usize,
    pub mean_estimate: f64,
    pub sd_estimate: f64,
    /// Mean of `|estimate - plim|` over completed replications.
    pub mean_abs_dev: f64,
    pub max_abs_dev: f64,
    /// Mean of `|estimate - truth|`.
    pub mean_abs_dev_truth: f64,
    /// Standard deviations of the sample interval endpoints, when the
    /// estimator is interval based.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_sd: Option<(f64, f64)>,
    /// `max_abs_dev <= tolerance`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub plim: f64,
    pub truth: f64,
    pub tolerance: f64,
    pub rows: Vec<ConvergenceRow>,
    pub pass: bool,
}

/// Errors that mean "the sample happened to miss a cell" rather than a
/// problem with the experiment.
fn is_skip(e: &Error) -> bool {
    matches!(
        e,
        Error::EmptyCell(_) | Error::UnfittableStratum(_) | Error::ZeroDenominator(_)
    )
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Truth targeted by `estimator` on `pop`.
pub fn estimand(pop: &FinitePopulation, regime: Regime, sel: &CellSelector) -> Result<f64> {
    match regime {
        Regime::Outcome => true_mean(pop, sel),
        Regime::Covariate => true_long_mean(pop, sel),
    }
}

/// Runs `reps` replications at every sample size and compares each
/// estimate with the exact probability limit. Replication `r` at grid index
/// `i` uses stream [`replication_stream`]`(i, r)` of the master seed.
///
/// Replications whose sample leaves the target cell (or a stratum the model
/// must be fitted on) empty are recorded as skipped; more than 5% skips at
/// any sample size is an error.
pub fn convergence_experiment(exp: &Experiment) -> Result<ConvergenceReport> {
    let plim = exp.estimator.plim(&exp.pop, &exp.model, &exp.sel)?;
    let truth = estimand(&exp.pop, exp.estimator.regime(), &exp.sel)?;
    let mut rows = Vec::with_capacity(exp.n_grid.len());
    for (i, &n) in exp.n_grid.iter().enumerate() {
        let outcomes: Vec<Result<Replication>> = (0..exp.reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(exp.seed, replication_stream(i, r));
                exp.estimator.estimate_once(&exp.pop, &exp.model, &exp.sel, n, &mut rng)
            })
            .collect();
        let mut done = Vec::with_capacity(exp.reps);
        let mut skipped = 0;
        for o in outcomes {
            match o {
                Ok(rep) => done.push(rep),
                Err(e) if is_skip(&e) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if skipped * 20 > exp.reps || done.is_empty() {
            return Err(Error::TooManySkips {
                n,
                skipped,
                reps: exp.reps,
            });
        }
        let estimates: Vec<f64> = done.iter().map(|r| r.estimate).collect();
        let devs: Vec<f64> = estimates.iter().map(|e| (e - plim).abs()).collect();
        let (mean_estimate, sd_estimate) = mean_sd(&estimates);
        let max_abs_dev = devs.iter().copied().fold(0.0, f64::max);
        let endpoint_sd = done
            .iter()
            .map(|r| r.endpoints)
            .collect::<Option<Vec<_>>>()
            .map(|ends| {
                let lo: Vec<f64> = ends.iter().map(|e| e.0).collect();
                let hi: Vec<f64> = ends.iter().map(|e| e.1).collect();
                (mean_sd(&lo).1, mean_sd(&hi).1)
            });
        rows.push(ConvergenceRow {
            n,
            reps: exp.reps,
            skipped,
            mean_estimate,
            sd_estimate,
            mean_abs_dev: devs.iter().sum::<f64>() / devs.len() as f64,
            max_abs_dev,
            mean_abs_dev_truth: estimates.iter().map(|e| (e - truth).abs()).sum::<f64>() / estimates.len() as f64,
            endpoint_sd,
            pass: max_abs_dev <= exp.tolerance,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ConvergenceReport {
        plim,
        truth,
        tolerance: exp.tolerance,
        rows,
        pass,
    })
}
