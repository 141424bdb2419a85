//! Conditional means `E(y | x = xi)` when outcomes are missing: the
//! assumption-free identification interval, its sample analog, imputation
//! estimates with their probability limits, the assumed-mean estimate, and
//! the midpoint estimate.

use serde::Serialize;

use crate::domain::{
    cell_partition, CellSelector, FinitePopulation, Interval, ObservationTable, OutcomeDomain, Regime, DERIVED_TOL,
};
use crate::error::{Error, Result};
use crate::rmi::ImputationModel;

/// Interval restriction on the unobservable mean `E(y | x = xi, z = 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestrictionGamma {
    lo: f64,
    hi: f64,
}

impl RestrictionGamma {
    pub fn new(lo: f64, hi: f64, dom: &OutcomeDomain) -> Result<Self> {
        if !(dom.lo <= lo && lo <= hi && hi <= dom.hi) {
            return Err(Error::InvalidRestriction { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Population quantities of one `x` cell in the outcome regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeCell {
    pub p_x: f64,
    /// `P(z = 1 | x = xi)`.
    pub p_observed: f64,
    /// `E(y | x = xi, z = 1) P(z = 1 | x = xi)`.
    pub observed_part: f64,
    /// `E(y | x = xi, z = 0)`, when the missing sub-cell has mass.
    pub missing_mean: Option<f64>,
}

impl OutcomeCell {
    pub fn p_missing(&self) -> f64 {
        1.0 - self.p_observed
    }

    pub fn observed_mean(&self) -> Option<f64> {
        (self.p_observed > 0.0).then(|| self.observed_part / self.p_observed)
    }
}

/// Decomposes the cell `x = xi` of `pop` by observability.
pub fn outcome_cell(pop: &FinitePopulation, sel: &CellSelector) -> Result<OutcomeCell> {
    let xi = sel.xi;
    let (p_x, _) = pop.moments_where(|c| c.x == xi);
    if p_x <= 0.0 {
        return Err(Error::ZeroCellMass(format!("x[{}]", pop.x_space().label(xi))));
    }
    let (m1, ym1) = pop.moments_where(|c| c.x == xi && c.z);
    let (m0, ym0) = pop.moments_where(|c| c.x == xi && !c.z);
    Ok(OutcomeCell {
        p_x,
        p_observed: m1 / p_x,
        observed_part: ym1 / p_x,
        missing_mean: (m0 > 0.0).then(|| ym0 / m0),
    })
}

fn outcome_regime(pop: &FinitePopulation) -> Result<()> {
    if pop.regime() == Regime::Outcome {
        Ok(())
    } else {
        Err(Error::RegimeMismatch(
            "population is not in the outcome-missing regime".into(),
        ))
    }
}

/// `E(y | x = xi)` by iterated expectations over `z`.
pub fn true_mean(pop: &FinitePopulation, sel: &CellSelector) -> Result<f64> {
    let cell = outcome_cell(pop, sel)?;
    Ok(cell.observed_part + cell.missing_mean.unwrap_or(0.0) * cell.p_missing())
}

/// Assumption-free identification interval for `E(y | x = xi)`.
pub fn identification_interval_pop(
    pop: &FinitePopulation,
    sel: &CellSelector,
    dom: &OutcomeDomain,
) -> Result<Interval> {
    outcome_regime(pop)?;
    let cell = outcome_cell(pop, sel)?;
    let p0 = cell.p_missing();
    Interval::new(cell.observed_part + dom.lo * p0, cell.observed_part + dom.hi * p0)
}

/// Identification interval when `E(y | x = xi, z = 0)` is known to lie in `gamma`.
pub fn restricted_interval_pop(
    pop: &FinitePopulation,
    sel: &CellSelector,
    gamma: &RestrictionGamma,
) -> Result<Interval> {
    outcome_regime(pop)?;
    let cell = outcome_cell(pop, sel)?;
    let p0 = cell.p_missing();
    Interval::new(cell.observed_part + gamma.lo * p0, cell.observed_part + gamma.hi * p0)
}

/// Sample-analog summary of one cell: observed fraction and observed mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleCell {
    pub n_observed: usize,
    pub n_missing: usize,
    pub pi: f64,
    pub observed_mean: Option<f64>,
}

impl SampleCell {
    /// `pi * m_N`, with the observed term dropped when nothing is observed.
    pub fn observed_part(&self) -> f64 {
        self.observed_mean.map_or(0.0, |m| self.pi * m)
    }
}

pub fn sample_cell(table: &ObservationTable, sel: &CellSelector) -> Result<SampleCell> {
    if sel.omega.is_some() {
        return Err(Error::RegimeMismatch(
            "outcome estimators take a selector without w".into(),
        ));
    }
    if !table.supports(Regime::Outcome) {
        return Err(Error::RegimeMismatch(
            "table is not in the outcome-missing regime".into(),
        ));
    }
    let part = cell_partition(table, sel)?;
    Ok(SampleCell {
        n_observed: part.observed.len(),
        n_missing: part.missing.len(),
        pi: part.pi,
        observed_mean: part.observed_mean(),
    })
}

/// Sample analog of the identification interval, using the table's
/// declared outcome domain. With no observed outcomes it is the whole domain.
pub fn sample_interval(table: &ObservationTable, sel: &CellSelector) -> Result<Interval> {
    let cell = sample_cell(table, sel)?;
    let dom = table.domain();
    let base = cell.observed_part();
    Interval::new(base + (1.0 - cell.pi) * dom.lo, base + (1.0 - cell.pi) * dom.hi)
}

/// Imputation estimate from the observed outcomes of a cell and the values
/// imputed for its missing outcomes.
pub fn imputation_mean(observed: &[f64], imputed: &[f64], dom: &OutcomeDomain) -> Result<f64> {
    if let Some(&u) = imputed.iter().find(|&&u| !dom.contains(u)) {
        return Err(Error::ImputedValueOutOfDomain(u));
    }
    let n = observed.len() + imputed.len();
    if n == 0 {
        return Err(Error::EmptyCell("imputation cell".into()));
    }
    Ok((observed.iter().sum::<f64>() + imputed.iter().sum::<f64>()) / n as f64)
}

/// Imputation estimate on a completed table: the mean of `y` at `x = xi`.
pub fn completed_cell_mean(table: &ObservationTable, sel: &CellSelector) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in table.records().iter().filter(|r| r.x == sel.xi) {
        sum +=
            r.y.ok_or_else(|| Error::RegimeMismatch("table still has missing outcomes at the target cell".into()))?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyCell(sel.describe(table.x_space(), table.w_space())));
    }
    Ok(sum / n as f64)
}

/// Probability limit of the imputation estimate under `model`.
pub fn plim_imputation_mean(pop: &FinitePopulation, model: &ImputationModel, sel: &CellSelector) -> Result<f64> {
    outcome_regime(pop)?;
    let cell = outcome_cell(pop, sel)?;
    if cell.p_missing() <= 0.0 {
        return Ok(cell.observed_part);
    }
    let fill_mean = model.population_fill_mean(pop, sel.xi)?;
    Ok(cell.observed_part + fill_mean * cell.p_missing())
}

/// Whether the imputation mean in the missing sub-cell equals the true
/// missing-data mean (within [`DERIVED_TOL`]), the condition for the
/// imputation estimate to be consistent. Vacuously true without missing mass.
pub fn consistency_condition(pop: &FinitePopulation, model: &ImputationModel, sel: &CellSelector) -> Result<bool> {
    outcome_regime(pop)?;
    let cell = outcome_cell(pop, sel)?;
    let Some(missing_mean) = cell.missing_mean else {
        return Ok(true);
    };
    let fill_mean = model.population_fill_mean(pop, sel.xi)?;
    Ok((fill_mean - missing_mean).abs() <= DERIVED_TOL)
}

/// Replaces missing outcomes by the assumed missing-data mean `e_q`.
pub fn q_mean_estimate(table: &ObservationTable, sel: &CellSelector, e_q: f64) -> Result<f64> {
    let dom = table.domain();
    if !(e_q >= dom.lo && e_q <= dom.hi) {
        return Err(Error::MeanOutOfDomain(e_q));
    }
    let cell = sample_cell(table, sel)?;
    Ok(cell.observed_part() + (1.0 - cell.pi) * e_q)
}

/// Midpoint of the sample interval: the point estimate whose probability
/// limit minimizes the maximum asymptotic squared bias.
pub fn midpoint_estimate(table: &ObservationTable, sel: &CellSelector) -> Result<f64> {
    Ok(sample_interval(table, sel)?.midpoint())
}

/// `max(c - bound)^2` over the two endpoints of `interval`, tabulated on
/// `points` equally spaced candidates spanning it.
pub fn squared_bias_profile(interval: &Interval, points: usize) -> Vec<(f64, f64)> {
    let steps = points.saturating_sub(1).max(1) as f64;
    (0..points)
        .map(|i| {
            let c = interval.lo + interval.width() * i as f64 / steps;
            (c, interval.max_squared_bias(c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::sync::Arc;

    use super::*;
    use crate::domain::{CovariateSpace, CovariateValue, Discrete, ObservationRecord, PopCell};
    use crate::rmi::OutcomeQModel;
    use crate::simlab::fixtures;

    const XI: CellSelector = CellSelector {
        xi: CovariateValue(0),
        omega: None,
    };

    /// Independent oracle: `E(y | x)` as a ratio of full-table sums.
    fn full_table_mean(pop: &FinitePopulation, xi: CovariateValue) -> f64 {
        let (num, den) = pop
            .cells()
            .iter()
            .filter(|c| c.x == xi)
            .fold((0.0, 0.0), |(n, d), c| (n + c.y * c.mass, d + c.mass));
        num / den
    }

    /// Independent oracle: the interval endpoints obtained by moving all
    /// missing mass of the cell to `y_lo` and then to `y_hi`.
    fn extreme_allocation(pop: &FinitePopulation, xi: CovariateValue, dom: &OutcomeDomain) -> (f64, f64) {
        let at = |fill: f64| {
            let (num, den) = pop.cells().iter().filter(|c| c.x == xi).fold((0.0, 0.0), |(n, d), c| {
                let y = if c.z { c.y } else { fill };
                (n + y * c.mass, d + c.mass)
            });
            num / den
        };
        (at(dom.lo), at(dom.hi))
    }

    fn table(ys: &[Option<f64>]) -> ObservationTable {
        let xs = Arc::new(CovariateSpace::single("g", &["a", "b"]).unwrap());
        ObservationTable::outcome_only(OutcomeDomain::binary(), xs, ys.iter().map(|&y| (y, CovariateValue(0)))).unwrap()
    }

    #[test]
    fn true_mean_worked_example() {
        let pop = fixtures::mnar_outcome_population();
        let cell = outcome_cell(&pop, &XI).unwrap();
        assert!((cell.observed_mean().unwrap() - 0.7).abs() < 1e-12);
        assert!((cell.p_observed - 0.5).abs() < 1e-12);
        assert!((cell.missing_mean.unwrap() - 0.9).abs() < 1e-12);
        let m = true_mean(&pop, &XI).unwrap();
        assert!((m - 0.80).abs() < 1e-12);
        assert!((m - full_table_mean(&pop, CovariateValue(0))).abs() < 1e-12);
    }

    #[test]
    fn true_mean_guards() {
        let xs = Arc::new(CovariateSpace::single("g", &["a", "b"]).unwrap());
        let unit = Arc::new(CovariateSpace::unit());
        let cells = vec![
            PopCell {
                y: 1.0,
                x: CovariateValue(0),
                w: CovariateValue(0),
                z: true,
                mass: 0.6,
            },
            PopCell {
                y: 0.0,
                x: CovariateValue(0),
                w: CovariateValue(0),
                z: true,
                mass: 0.4,
            },
        ];
        let pop = FinitePopulation::new(
            OutcomeDomain::binary(),
            vec![0.0, 1.0],
            xs,
            unit,
            Regime::Outcome,
            cells,
        )
        .unwrap();
        assert!((true_mean(&pop, &XI).unwrap() - 0.6).abs() < 1e-15);
        let iv = identification_interval_pop(&pop, &XI, pop.domain()).unwrap();
        assert_eq!(iv.width(), 0.0);
        assert!(matches!(
            true_mean(&pop, &CellSelector::at(CovariateValue(1))),
            Err(Error::ZeroCellMass(_))
        ));
    }

    #[test]
    fn identification_interval_worked_example() {
        let pop = fixtures::mnar_outcome_population();
        let dom = *pop.domain();
        let iv = identification_interval_pop(&pop, &XI, &dom).unwrap();
        let (lo, hi) = extreme_allocation(&pop, CovariateValue(0), &dom);
        assert!((iv.lo - 0.35).abs() < 1e-12 && (iv.hi - 0.85).abs() < 1e-12);
        assert!((iv.lo - lo).abs() < 1e-12 && (iv.hi - hi).abs() < 1e-12);
    }

    #[test]
    fn nothing_observed_gives_domain() {
        let xs = Arc::new(CovariateSpace::unit());
        let cells = vec![
            PopCell {
                y: 2.0,
                x: CovariateValue(0),
                w: CovariateValue(0),
                z: false,
                mass: 0.5,
            },
            PopCell {
                y: 5.0,
                x: CovariateValue(0),
                w: CovariateValue(0),
                z: false,
                mass: 0.5,
            },
        ];
        let dom = OutcomeDomain::new(0.0, 10.0).unwrap();
        let pop = FinitePopulation::new(dom, vec![2.0, 5.0], xs.clone(), xs, Regime::Outcome, cells).unwrap();
        assert_eq!(
            identification_interval_pop(&pop, &XI, &dom).unwrap(),
            Interval { lo: 0.0, hi: 10.0 }
        );
    }

    #[test]
    fn restricted_interval_examples() {
        let pop = fixtures::mnar_outcome_population();
        let dom = *pop.domain();
        let g = RestrictionGamma::new(0.4, 0.6, &dom).unwrap();
        let iv = restricted_interval_pop(&pop, &XI, &g).unwrap();
        assert!((iv.lo - 0.55).abs() < 1e-12 && (iv.hi - 0.65).abs() < 1e-12);
        let vacuous = RestrictionGamma::new(0.0, 1.0, &dom).unwrap();
        assert_eq!(
            restricted_interval_pop(&pop, &XI, &vacuous).unwrap(),
            identification_interval_pop(&pop, &XI, &dom).unwrap()
        );
        let point = RestrictionGamma::new(0.3, 0.3, &dom).unwrap();
        assert_eq!(restricted_interval_pop(&pop, &XI, &point).unwrap().width(), 0.0);
        assert!(RestrictionGamma::new(0.6, 0.4, &dom).is_err());
        assert!(RestrictionGamma::new(-0.1, 0.4, &dom).is_err());
    }

    #[test]
    fn sample_interval_examples() {
        let t = table(&[Some(1.0), Some(0.0), Some(1.0), Some(1.0), None]);
        let iv = sample_interval(&t, &XI).unwrap();
        assert!((iv.lo - 0.6).abs() < 1e-12 && (iv.hi - 0.8).abs() < 1e-12);
        assert!((midpoint_estimate(&t, &XI).unwrap() - 0.7).abs() < 1e-12);

        let full = table(&[Some(1.0), Some(0.0), Some(1.0), Some(1.0)]);
        let iv = sample_interval(&full, &XI).unwrap();
        assert_eq!((iv.lo, iv.hi), (0.75, 0.75));
        assert_eq!(midpoint_estimate(&full, &XI).unwrap(), 0.75);

        let none = table(&[None, None]);
        assert_eq!(sample_interval(&none, &XI).unwrap(), Interval { lo: 0.0, hi: 1.0 });
        assert_eq!(midpoint_estimate(&none, &XI).unwrap(), 0.5);

        assert!(matches!(
            sample_interval(&t, &CellSelector::at(CovariateValue(1))),
            Err(Error::EmptyCell(_))
        ));
    }

    #[test]
    fn imputation_mean_examples() {
        let dom = OutcomeDomain::binary();
        assert_eq!(imputation_mean(&[1.0, 0.0, 1.0], &[0.0], &dom).unwrap(), 0.5);
        let cont = OutcomeDomain::new(0.0, 1.0).unwrap();
        let obs = [0.2, 0.4, 0.9];
        let m = obs.iter().sum::<f64>() / 3.0;
        assert!((imputation_mean(&obs, &[m, m], &cont).unwrap() - m).abs() < 1e-15);
        assert!(matches!(
            imputation_mean(&[1.0], &[1.5], &dom),
            Err(Error::ImputedValueOutOfDomain(_))
        ));
        assert!(matches!(imputation_mean(&[], &[], &dom), Err(Error::EmptyCell(_))));
    }

    #[test]
    fn plim_worked_example() {
        let pop = fixtures::mnar_outcome_population();
        let q = ImputationModel::ExplicitOutcomeQ(OutcomeQModel::uniform_over(
            pop.x_space(),
            Discrete::new(vec![(0.0, 0.9), (1.0, 0.1)]).unwrap(),
        ));
        assert!((plim_imputation_mean(&pop, &q, &XI).unwrap() - 0.40).abs() < 1e-12);
        assert!(!consistency_condition(&pop, &q, &XI).unwrap());

        let truth = ImputationModel::true_outcome(&pop).unwrap();
        assert!((plim_imputation_mean(&pop, &truth, &XI).unwrap() - true_mean(&pop, &XI).unwrap()).abs() < 1e-12);
        assert!(consistency_condition(&pop, &truth, &XI).unwrap());

        // MAR fill on an MNAR population: observed mean 0.7 vs missing mean 0.9
        assert!((plim_imputation_mean(&pop, &ImputationModel::MarOutcome, &XI).unwrap() - 0.70).abs() < 1e-12);
        assert!(!consistency_condition(&pop, &ImputationModel::MarOutcome, &XI).unwrap());
    }

    #[test]
    fn mar_population_is_consistent_under_mar_fill() {
        let pop = fixtures::mar_outcome_population();
        let plim = plim_imputation_mean(&pop, &ImputationModel::MarOutcome, &XI).unwrap();
        assert!((plim - true_mean(&pop, &XI).unwrap()).abs() < 1e-12);
        assert!(consistency_condition(&pop, &ImputationModel::MarOutcome, &XI).unwrap());
    }

    #[test]
    fn mean_matched_model_is_consistent() {
        // missing mean 0.9 in the worked population; a three-point fill with the same mean
        let pop = fixtures::mnar_outcome_population();
        let mut strata = BTreeMap::new();
        strata.insert(
            CovariateValue(0),
            Discrete::new(vec![(0.0, 0.05), (0.5, 0.1), (1.0, 0.85)]).unwrap(),
        );
        let model = ImputationModel::ExplicitOutcomeQ(OutcomeQModel::new(strata));
        assert!(consistency_condition(&pop, &model, &XI).unwrap());
        assert!((plim_imputation_mean(&pop, &model, &XI).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn model_undefined() {
        let pop = fixtures::mnar_outcome_population();
        let model = ImputationModel::ExplicitOutcomeQ(OutcomeQModel::new(BTreeMap::new()));
        assert!(matches!(
            plim_imputation_mean(&pop, &model, &XI),
            Err(Error::ModelUndefinedOnCell(_))
        ));
        assert!(matches!(
            consistency_condition(&pop, &model, &XI),
            Err(Error::ModelUndefinedOnCell(_))
        ));
    }

    #[test]
    fn q_mean_examples() {
        // pi = 0.5, observed mean 0.7
        let mut ys: Vec<Option<f64>> = vec![Some(1.0); 7];
        ys.extend(vec![Some(0.0); 3]);
        ys.extend(vec![None; 10]);
        let xs = Arc::new(CovariateSpace::single("g", &["a", "b"]).unwrap());
        let t = ObservationTable::outcome_only(
            OutcomeDomain::new(0.0, 1.0).unwrap(),
            xs,
            ys.iter().map(|&y| (y, CovariateValue(0))),
        )
        .unwrap();
        assert!((q_mean_estimate(&t, &XI, 0.9).unwrap() - 0.80).abs() < 1e-12);
        assert!((q_mean_estimate(&t, &XI, 0.7).unwrap() - 0.7).abs() < 1e-12);
        assert!(matches!(q_mean_estimate(&t, &XI, 1.2), Err(Error::MeanOutOfDomain(_))));

        let full = table(&[Some(1.0), Some(0.0)]);
        assert_eq!(q_mean_estimate(&full, &XI, 0.0).unwrap(), 0.5);
        assert_eq!(q_mean_estimate(&full, &XI, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn completed_mean_requires_completion() {
        let t = table(&[Some(1.0), None]);
        assert!(matches!(completed_cell_mean(&t, &XI), Err(Error::RegimeMismatch(_))));
        let done = t.with_records(vec![
            ObservationRecord::outcome(Some(1.0), CovariateValue(0)),
            ObservationRecord::outcome(Some(0.0), CovariateValue(0)),
        ]);
        assert_eq!(completed_cell_mean(&done, &XI).unwrap(), 0.5);
    }

    #[test]
    fn midpoint_minimizes_worst_case_bias_on_grid() {
        let pop = fixtures::mnar_outcome_population();
        let iv = identification_interval_pop(&pop, &XI, pop.domain()).unwrap();
        let profile = squared_bias_profile(&iv, 101);
        let (best, _) = profile.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert!((best - iv.midpoint()).abs() < 1e-12);
        assert!((iv.midpoint() - 0.6).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Any completion of the missing outcomes lands inside the sample interval,
            /// whose width is (y_hi - y_lo)(1 - pi).
            #[test]
            fn sandwich_and_width(
                obs in prop::collection::vec(0.0f64..=1.0, 0..30),
                fills in prop::collection::vec(0.0f64..=1.0, 0..30),
            ) {
                prop_assume!(!(obs.is_empty() && fills.is_empty()));
                let dom = OutcomeDomain::new(0.0, 1.0).unwrap();
                let xs = Arc::new(CovariateSpace::unit());
                let rows = obs.iter().map(|&y| (Some(y), CovariateValue(0)))
                    .chain(fills.iter().map(|_| (None, CovariateValue(0))));
                let t = ObservationTable::outcome_only(dom, xs, rows).unwrap();
                let iv = sample_interval(&t, &XI).unwrap();
                let est = imputation_mean(&obs, &fills, &dom).unwrap();
                prop_assert!(iv.contains(est, 1e-12));
                let pi = obs.len() as f64 / (obs.len() + fills.len()) as f64;
                prop_assert!((iv.width() - (1.0 - pi)).abs() < 1e-12);
            }
        }
    }
}
