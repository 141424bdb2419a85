//! Long conditional means `E(y | x = xi, w = omega)` when the covariate `w`
//! is missing for some units.
//!
//! For binary outcomes the assumption-free identification region is an
//! interval with a closed form; [`binary_bounds_oracle`] recomputes it by
//! exhaustive search over allocations of the missing-covariate mass and is
//! the reference the closed form is tested against.
//!
//! The closed form conditions the observed (`z = 1`) events on both
//! `x = xi` and `w = omega`, and the missing (`z = 0`) events on `x = xi`.
//! A looser conditioning, which drops `w = omega` from the observed events
//! and `x = xi` from the missing ones, is available as
//! [`BoundsReading::Loose`] for diagnostics only; it disagrees with the
//! oracle in general.

mod oracle;

pub use oracle::{binary_bounds_oracle, ORACLE_MAX_STRATA};

use std::collections::BTreeMap;
use std::path::Path;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::domain::{
    CellSelector, CovariateSpace, CovariateValue, Discrete, FinitePopulation, Interval, ObservationTable, Regime,
    DERIVED_TOL,
};
use crate::error::{Error, Result};
use crate::rmi::ImputationModel;

/// Assumed distribution of a missing covariate, `Q(w | y, x, z = 0)`,
/// keyed by `(y, x)` stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct QCovariateModel {
    strata: BTreeMap<(OrderedFloat<f64>, CovariateValue), Discrete<CovariateValue>>,
}

impl QCovariateModel {
    pub fn new(strata: BTreeMap<(OrderedFloat<f64>, CovariateValue), Discrete<CovariateValue>>) -> Self {
        Self { strata }
    }

    pub fn get(&self, y: f64, x: CovariateValue) -> Option<&Discrete<CovariateValue>> {
        self.strata.get(&(OrderedFloat(y), x))
    }

    pub fn strata(&self) -> &BTreeMap<(OrderedFloat<f64>, CovariateValue), Discrete<CovariateValue>> {
        &self.strata
    }

    /// Parses `{"strata": [{"y": 1, "x": "name=level", "w": {"name=level": mass, ...}}]}`.
    pub fn from_json_str(text: &str, x_space: &CovariateSpace, w_space: &CovariateSpace) -> Result<Self> {
        let file: QFile = serde_json::from_str(text)?;
        let mut strata = BTreeMap::new();
        for s in file.strata {
            let x = x_space.parse(&s.x)?;
            let atoms =
                s.w.iter()
                    .map(|(label, &mass)| Ok((w_space.parse(label)?, mass)))
                    .collect::<Result<Vec<_>>>()?;
            if strata.insert((OrderedFloat(s.y), x), Discrete::new(atoms)?).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate stratum y={} x[{}]", s.y, s.x)));
            }
        }
        Ok(Self { strata })
    }

    pub fn from_path(path: impl AsRef<Path>, x_space: &CovariateSpace, w_space: &CovariateSpace) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?, x_space, w_space)
    }

    pub fn to_json_string(&self, x_space: &CovariateSpace, w_space: &CovariateSpace) -> Result<String> {
        let file = QFile {
            strata: self
                .strata
                .iter()
                .map(|((y, x), d)| QStratum {
                    y: y.0,
                    x: x_space.label(*x),
                    w: d.atoms().map(|(w, p)| (w_space.label(w), p)).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

#[derive(Serialize, Deserialize)]
struct QFile {
    strata: Vec<QStratum>,
}

#[derive(Serialize, Deserialize)]
struct QStratum {
    y: f64,
    #[serde(default)]
    x: String,
    w: BTreeMap<String, f64>,
}

/// Nonnegative joint measure over `(y, x, w)` atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedJointMeasure {
    atoms: Vec<JointAtom>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointAtom {
    pub y: f64,
    pub x: CovariateValue,
    pub w: CovariateValue,
    pub mass: f64,
}

impl WeightedJointMeasure {
    pub fn atoms(&self) -> &[JointAtom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }
}

pub(crate) fn covariate_regime(pop: &FinitePopulation) -> Result<()> {
    if pop.regime() != Regime::Covariate {
        return Err(Error::RegimeMismatch(
            "population is not in the covariate-missing regime".into(),
        ));
    }
    Ok(())
}

fn label(pop: &FinitePopulation, sel: &CellSelector) -> String {
    sel.describe(pop.x_space(), pop.w_space())
}

/// `E(y | x = xi, w = omega)` over all units, observed or not.
pub fn true_long_mean(pop: &FinitePopulation, sel: &CellSelector) -> Result<f64> {
    let omega = sel.require_omega()?;
    pop.mean_where(|c| c.x == sel.xi && c.w == omega)
        .ok_or_else(|| Error::ZeroCellMass(label(pop, sel)))
}

/// Components of the long cell `(xi, omega)` by observability, all
/// conditional on `x = xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LongCell {
    /// `P(z = 1, w = omega | x = xi)`.
    pub p_observed: f64,
    /// `E(y | x = xi, w = omega, z = 1)`.
    pub observed_mean: Option<f64>,
    /// `P(z = 0, w = omega | x = xi)`.
    pub p_missing: f64,
    /// `E(y | x = xi, w = omega, z = 0)`.
    pub missing_mean: Option<f64>,
}

pub fn long_cell(pop: &FinitePopulation, sel: &CellSelector) -> Result<LongCell> {
    let omega = sel.require_omega()?;
    let p_x = pop.mass_where(|c| c.x == sel.xi);
    if p_x <= 0.0 {
        return Err(Error::ZeroCellMass(label(pop, sel)));
    }
    let (m1, ym1) = pop.moments_where(|c| c.x == sel.xi && c.w == omega && c.z);
    let (m0, ym0) = pop.moments_where(|c| c.x == sel.xi && c.w == omega && !c.z);
    Ok(LongCell {
        p_observed: m1 / p_x,
        observed_mean: (m1 > 0.0).then(|| ym1 / m1),
        p_missing: m0 / p_x,
        missing_mean: (m0 > 0.0).then(|| ym0 / m0),
    })
}

/// Imputation estimate on a completed table: mean of `y` over `(xi, omega)`.
pub fn imputed_long_mean(completed: &ObservationTable, sel: &CellSelector) -> Result<f64> {
    let omega = sel.require_omega()?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in completed.records().iter().filter(|r| r.x == sel.xi) {
        let w =
            r.w.ok_or_else(|| Error::RegimeMismatch("table still has missing covariates at the target x".into()))?;
        if w == omega {
            sum +=
                r.y.ok_or_else(|| Error::RegimeMismatch("covariate regime requires observed outcomes".into()))?;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyCell(sel.describe(completed.x_space(), completed.w_space())));
    }
    Ok(sum / n as f64)
}

/// Probability-limit components of the long-mean imputation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LongPlim {
    /// Share of the pooled cell made of genuinely observed `w = omega` units.
    pub pi: f64,
    /// `P(z = 0, u = omega | x = xi)`.
    pub p_imputed: f64,
    /// `E(y | x = xi, u = omega, z = 0)`.
    pub imputed_mean: Option<f64>,
    pub cell: LongCell,
    pub plim: f64,
}

/// Probability limit of the imputation estimate of the long mean under `model`.
pub fn long_plim(pop: &FinitePopulation, model: &ImputationModel, sel: &CellSelector) -> Result<LongPlim> {
    covariate_regime(pop)?;
    let omega = sel.require_omega()?;
    let cell = long_cell(pop, sel)?;
    let p_x = pop.mass_where(|c| c.x == sel.xi);
    let mut p_imputed = 0.0;
    let mut y_imputed = 0.0;
    for &y in pop.support() {
        let stratum = pop.mass_where(|c| c.x == sel.xi && c.y == y && !c.z) / p_x;
        if stratum > 0.0 {
            let q = model.population_fill_prob(pop, y, sel.xi, omega)?;
            p_imputed += stratum * q;
            y_imputed += y * stratum * q;
        }
    }
    let denom = cell.p_observed + p_imputed;
    if denom <= 0.0 {
        return Err(Error::ZeroCellMass(label(pop, sel)));
    }
    let pi = cell.p_observed / denom;
    let imputed_mean = (p_imputed > 0.0).then(|| y_imputed / p_imputed);
    let plim = cell.observed_mean.unwrap_or(0.0) * pi + imputed_mean.unwrap_or(0.0) * (1.0 - pi);
    Ok(LongPlim {
        pi,
        p_imputed,
        imputed_mean,
        cell,
        plim,
    })
}

pub fn plim_imputed_long_mean(pop: &FinitePopulation, model: &ImputationModel, sel: &CellSelector) -> Result<f64> {
    Ok(long_plim(pop, model, sel)?.plim)
}

/// Whether the imputed and true missing-covariate cells agree in mass
/// (first flag) and in mean outcome (second flag), within [`DERIVED_TOL`].
/// Together they make the imputation estimate consistent.
pub fn matching_conditions(
    pop: &FinitePopulation,
    model: &ImputationModel,
    sel: &CellSelector,
) -> Result<(bool, bool)> {
    let lp = long_plim(pop, model, sel)?;
    let mass_match = (lp.p_imputed - lp.cell.p_missing).abs() <= DERIVED_TOL;
    let mean_match = match (lp.imputed_mean, lp.cell.missing_mean) {
        (Some(a), Some(b)) => (a - b).abs() <= DERIVED_TOL,
        (None, None) => true,
        // an empty side matches only when the other side carries no mass either
        (Some(_), None) => lp.p_imputed <= DERIVED_TOL,
        (None, Some(_)) => lp.cell.p_missing <= DERIVED_TOL,
    };
    Ok((mass_match, mean_match))
}

/// Where the binary bounds read their masses from.
#[derive(Debug, Clone, Copy)]
pub enum BoundsSource<'a> {
    Population(&'a FinitePopulation),
    Sample(&'a ObservationTable),
}

/// Which conditioning of the closed-form bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsReading {
    /// Observed events conditioned on `(x, w) = (xi, omega)`, missing events on `x = xi`.
    #[default]
    Corrected,
    /// Observed events conditioned on `x = xi` only, missing events unconditioned.
    Loose,
}

/// Masses (probabilities or counts) entering the binary-outcome bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryBoundMasses {
    pub observed_y1: f64,
    pub observed_total: f64,
    pub missing_y1: f64,
    pub missing_y0: f64,
}

impl BinaryBoundMasses {
    pub fn interval(&self, what: &str) -> Result<Interval> {
        let lo_den = self.observed_total + self.missing_y0;
        let hi_den = self.observed_total + self.missing_y1;
        if lo_den <= 0.0 || hi_den <= 0.0 {
            return Err(Error::ZeroDenominator(what.to_string()));
        }
        let lo = self.observed_y1 / lo_den;
        let hi = (self.observed_y1 + self.missing_y1) / hi_den;
        Interval::new(lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
    }
}

/// Collects the masses for `reading` from a population or a sample.
pub fn binary_bound_masses(
    source: BoundsSource<'_>,
    sel: &CellSelector,
    reading: BoundsReading,
) -> Result<BinaryBoundMasses> {
    let omega = sel.require_omega()?;
    let xi = sel.xi;
    // (y, x, w, z) tuples with weights
    let rows: Box<dyn Iterator<Item = (f64, CovariateValue, Option<CovariateValue>, f64)> + '_> = match source {
        BoundsSource::Population(pop) => {
            covariate_regime(pop)?;
            if !pop.is_binary() {
                return Err(Error::NonBinaryOutcome);
            }
            Box::new(pop.cells().iter().map(|c| (c.y, c.x, c.z.then_some(c.w), c.mass)))
        }
        BoundsSource::Sample(table) => {
            if !table.supports(Regime::Covariate) {
                return Err(Error::RegimeMismatch(
                    "table is not in the covariate-missing regime".into(),
                ));
            }
            let mut out = Vec::with_capacity(table.len());
            for r in table.records() {
                let y =
                    r.y.ok_or_else(|| Error::RegimeMismatch("covariate regime requires observed outcomes".into()))?;
                if y != 0.0 && y != 1.0 {
                    return Err(Error::NonBinaryOutcome);
                }
                out.push((y, r.x, r.w, 1.0));
            }
            Box::new(out.into_iter())
        }
    };
    let mut m = BinaryBoundMasses {
        observed_y1: 0.0,
        observed_total: 0.0,
        missing_y1: 0.0,
        missing_y0: 0.0,
    };
    for (y, x, w, mass) in rows {
        match (reading, w) {
            (BoundsReading::Corrected, Some(w)) if x == xi && w == omega => {
                m.observed_total += mass;
                m.observed_y1 += y * mass;
            }
            (BoundsReading::Corrected, None) if x == xi => {
                if y == 1.0 {
                    m.missing_y1 += mass
                } else {
                    m.missing_y0 += mass
                }
            }
            (BoundsReading::Loose, Some(_)) if x == xi => {
                m.observed_total += mass;
                m.observed_y1 += y * mass;
            }
            (BoundsReading::Loose, None) => {
                if y == 1.0 {
                    m.missing_y1 += mass
                } else {
                    m.missing_y0 += mass
                }
            }
            _ => {}
        }
    }
    Ok(m)
}

/// Closed-form identification interval (population) or its sample analog
/// for the long mean of a binary outcome.
pub fn binary_bounds_closed_form(source: BoundsSource<'_>, sel: &CellSelector) -> Result<Interval> {
    binary_bounds_with_reading(source, sel, BoundsReading::Corrected)
}

pub fn binary_bounds_with_reading(
    source: BoundsSource<'_>,
    sel: &CellSelector,
    reading: BoundsReading,
) -> Result<Interval> {
    let what = match source {
        BoundsSource::Population(p) => label(p, sel),
        BoundsSource::Sample(t) => sel.describe(t.x_space(), t.w_space()),
    };
    binary_bound_masses(source, sel, reading)?.interval(&what)
}

/// Midpoint of the sample-analog binary bounds.
pub fn midpoint_long_estimate(table: &ObservationTable, sel: &CellSelector) -> Result<f64> {
    Ok(binary_bounds_closed_form(BoundsSource::Sample(table), sel)?.midpoint())
}

fn push_atom(
    acc: &mut BTreeMap<(OrderedFloat<f64>, CovariateValue, CovariateValue), f64>,
    y: f64,
    x: CovariateValue,
    w: CovariateValue,
    mass: f64,
) {
    if mass > 0.0 {
        *acc.entry((OrderedFloat(y), x, w)).or_default() += mass;
    }
}

fn into_measure(acc: BTreeMap<(OrderedFloat<f64>, CovariateValue, CovariateValue), f64>) -> WeightedJointMeasure {
    WeightedJointMeasure {
        atoms: acc
            .into_iter()
            .map(|((y, x, w), mass)| JointAtom { y: y.0, x, w, mass })
            .collect(),
    }
}

/// Estimate of the joint distribution of `(y, x, w)` that mixes the
/// empirical observed-covariate distribution with the assumed distribution
/// `q` of the missing covariates, weighted by the empirical response rate.
pub fn mixture_joint_estimate(table: &ObservationTable, q: &QCovariateModel) -> Result<WeightedJointMeasure> {
    if !table.supports(Regime::Covariate) {
        return Err(Error::RegimeMismatch(
            "table is not in the covariate-missing regime".into(),
        ));
    }
    if table.is_empty() {
        return Err(Error::EmptyCell("table".into()));
    }
    let unit = 1.0 / table.len() as f64;
    let mut acc = BTreeMap::new();
    let mut missing: BTreeMap<(OrderedFloat<f64>, CovariateValue), f64> = BTreeMap::new();
    for r in table.records() {
        let y =
            r.y.ok_or_else(|| Error::RegimeMismatch("covariate regime requires observed outcomes".into()))?;
        match r.w {
            Some(w) => push_atom(&mut acc, y, r.x, w, unit),
            None => *missing.entry((OrderedFloat(y), r.x)).or_default() += unit,
        }
    }
    for ((y, x), mass) in missing {
        let dist = q
            .get(y.0, x)
            .ok_or_else(|| Error::QUndefinedForStratum(format!("y={} x[{}]", y.0, table.x_space().label(x))))?;
        for (w, p) in dist.atoms() {
            push_atom(&mut acc, y.0, x, w, mass * p);
        }
    }
    Ok(into_measure(acc))
}

/// Population counterpart of [`mixture_joint_estimate`]: the limit the
/// mixture estimate converges to.
pub fn mixture_joint_population(pop: &FinitePopulation, q: &QCovariateModel) -> Result<WeightedJointMeasure> {
    covariate_regime(pop)?;
    let mut acc = BTreeMap::new();
    let mut missing: BTreeMap<(OrderedFloat<f64>, CovariateValue), f64> = BTreeMap::new();
    for c in pop.cells() {
        if c.z {
            push_atom(&mut acc, c.y, c.x, c.w, c.mass);
        } else if c.mass > 0.0 {
            *missing.entry((OrderedFloat(c.y), c.x)).or_default() += c.mass;
        }
    }
    for ((y, x), mass) in missing {
        let dist = q
            .get(y.0, x)
            .ok_or_else(|| Error::QUndefinedForStratum(format!("y={} x[{}]", y.0, pop.x_space().label(x))))?;
        for (w, p) in dist.atoms() {
            push_atom(&mut acc, y.0, x, w, mass * p);
        }
    }
    Ok(into_measure(acc))
}

/// Mass-weighted mean of `y` on the `(xi, omega)` slice of `measure`.
pub fn mixture_conditional_mean(measure: &WeightedJointMeasure, sel: &CellSelector) -> Result<f64> {
    let omega = sel.require_omega()?;
    let (m, ym) = measure
        .atoms
        .iter()
        .filter(|a| a.x == sel.xi && a.w == omega)
        .fold((0.0, 0.0), |(m, ym), a| (m + a.mass, ym + a.mass * a.y));
    if m <= 0.0 {
        return Err(Error::ZeroCellMass(format!("x={} w={}", sel.xi.0, omega.0)));
    }
    Ok(ym / m)
}

/// Expands a fitted covariate model into an explicit `(y, x)`-keyed model
/// over the outcome values `support`.
pub fn q_from_fitted(
    fitted: &crate::rmi::FittedModel,
    x_space: &CovariateSpace,
    support: &[f64],
) -> Option<QCovariateModel> {
    use crate::rmi::FittedModel;
    match fitted {
        FittedModel::Covariate(m) => Some(QCovariateModel::new(m.clone())),
        FittedModel::CovariateGivenX(m) => Some(QCovariateModel::new(
            x_space
                .values()
                .filter_map(|x| m.get(&x).map(|d| (x, d)))
                .flat_map(|(x, d)| support.iter().map(move |&y| ((OrderedFloat(y), x), d.clone())))
                .collect(),
        )),
        FittedModel::Outcome(_) => None,
    }
}
