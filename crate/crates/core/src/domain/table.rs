use std::sync::Arc;

use super::{check_cell_cap, CellSelector, CovariateSpace, CovariateValue, OutcomeDomain, Regime};
use crate::error::{Error, Result};

/// One sampled unit. `x` is always observed; `y` or `w` may be missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationRecord {
    pub y: Option<f64>,
    pub x: CovariateValue,
    pub w: Option<CovariateValue>,
}

impl ObservationRecord {
    pub fn outcome(y: Option<f64>, x: CovariateValue) -> Self {
        Self {
            y,
            x,
            w: Some(CovariateValue(0)),
        }
    }

    pub fn z_y(&self) -> bool {
        self.y.is_some()
    }

    pub fn z_w(&self) -> bool {
        self.w.is_some()
    }
}

/// An in-memory sample with its declared domains.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    domain: OutcomeDomain,
    x_space: Arc<CovariateSpace>,
    w_space: Arc<CovariateSpace>,
    records: Vec<ObservationRecord>,
}

impl ObservationTable {
    pub fn new(
        domain: OutcomeDomain,
        x_space: Arc<CovariateSpace>,
        w_space: Arc<CovariateSpace>,
        records: Vec<ObservationRecord>,
    ) -> Result<Self> {
        domain.validate()?;
        check_cell_cap(&x_space, &w_space)?;
        let mut any_y_missing = false;
        let mut any_w_missing = false;
        for r in &records {
            if !x_space.contains(r.x) {
                return Err(Error::CovariateOutOfDomain(format!("x code {}", r.x.0)));
            }
            match r.w {
                Some(w) if !w_space.contains(w) => return Err(Error::CovariateOutOfDomain(format!("w code {}", w.0))),
                None => any_w_missing = true,
                _ => {}
            }
            match r.y {
                Some(y) => domain.check(y)?,
                None => any_y_missing = true,
            }
        }
        if any_y_missing && any_w_missing {
            return Err(Error::RegimeMismatch(
                "table has both missing outcomes and missing covariates".into(),
            ));
        }
        Ok(Self {
            domain,
            x_space,
            w_space,
            records,
        })
    }

    /// Outcome-regime table with no `w` roles.
    pub fn outcome_only(
        domain: OutcomeDomain,
        x_space: Arc<CovariateSpace>,
        rows: impl IntoIterator<Item = (Option<f64>, CovariateValue)>,
    ) -> Result<Self> {
        let records = rows
            .into_iter()
            .map(|(y, x)| ObservationRecord::outcome(y, x))
            .collect();
        Self::new(domain, x_space, Arc::new(CovariateSpace::unit()), records)
    }

    pub fn domain(&self) -> &OutcomeDomain {
        &self.domain
    }

    pub fn x_space(&self) -> &Arc<CovariateSpace> {
        &self.x_space
    }

    pub fn w_space(&self) -> &Arc<CovariateSpace> {
        &self.w_space
    }

    pub fn records(&self) -> &[ObservationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The active missingness regime, or `None` when nothing is missing.
    pub fn regime(&self) -> Option<Regime> {
        if self.records.iter().any(|r| r.y.is_none()) {
            Some(Regime::Outcome)
        } else if self.records.iter().any(|r| r.w.is_none()) {
            Some(Regime::Covariate)
        } else {
            None
        }
    }

    /// Whether the table can be analysed in `regime` (complete tables fit both).
    pub fn supports(&self, regime: Regime) -> bool {
        self.regime().is_none_or(|r| r == regime)
    }

    pub(crate) fn with_records(&self, records: Vec<ObservationRecord>) -> Self {
        Self {
            domain: self.domain,
            x_space: Arc::clone(&self.x_space),
            w_space: Arc::clone(&self.w_space),
            records,
        }
    }

    pub(crate) fn describe(&self, sel: &CellSelector) -> String {
        sel.describe(&self.x_space, &self.w_space)
    }
}

/// Relative frequency of `event` among records satisfying `conditioning`.
pub fn empirical_cond<E, C>(table: &ObservationTable, event: E, conditioning: C) -> Result<f64>
where
    E: Fn(&ObservationRecord) -> bool,
    C: Fn(&ObservationRecord) -> bool,
{
    let (hits, base) = table
        .records
        .iter()
        .filter(|r| conditioning(r))
        .fold((0usize, 0usize), |(h, b), r| (h + usize::from(event(r)), b + 1));
    if base == 0 {
        return Err(Error::EmptyConditioningSet);
    }
    Ok(hits as f64 / base as f64)
}

/// Records of a target cell split by observability.
#[derive(Debug, Clone)]
pub struct CellPartition<'a> {
    pub observed: Vec<&'a ObservationRecord>,
    pub missing: Vec<&'a ObservationRecord>,
    /// `N_1 / (N_1 + N_0)`.
    pub pi: f64,
}

impl CellPartition<'_> {
    pub fn observed_mean(&self) -> Option<f64> {
        if self.observed.is_empty() {
            return None;
        }
        let sum: f64 = self.observed.iter().filter_map(|r| r.y).sum();
        Some(sum / self.observed.len() as f64)
    }
}

/// Splits the records at `x = xi` into observed and missing sub-samples.
///
/// Without `omega` the split is on `y`. With `omega` (covariate regime) the
/// observed part is `(x = xi, w = omega)` and the missing part is every
/// record at `x = xi` whose `w` is unobserved, i.e. every record that could
/// belong to the target cell.
pub fn cell_partition<'a>(table: &'a ObservationTable, sel: &CellSelector) -> Result<CellPartition<'a>> {
    let mut observed = Vec::new();
    let mut missing = Vec::new();
    for r in table.records.iter().filter(|r| r.x == sel.xi) {
        match sel.omega {
            None => {
                if r.y.is_some() {
                    observed.push(r)
                } else {
                    missing.push(r)
                }
            }
            Some(omega) => match r.w {
                Some(w) if w == omega => observed.push(r),
                Some(_) => {}
                None => missing.push(r),
            },
        }
    }
    let total = observed.len() + missing.len();
    if total == 0 {
        return Err(Error::EmptyCell(table.describe(sel)));
    }
    let pi = observed.len() as f64 / total as f64;
    Ok(CellPartition { observed, missing, pi })
}
