use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_cell_cap, CovariateRole, CovariateSpace, CovariateValue, OutcomeDomain, Regime, NORMALIZATION_TOL};
use crate::error::{Error, Result};

/// Probability mass on one `(y, x, w, z)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopCell {
    pub y: f64,
    pub x: CovariateValue,
    pub w: CovariateValue,
    /// Observability of the regime's missing variable.
    pub z: bool,
    pub mass: f64,
}

/// Exact joint distribution of `(y, x, w, z)` on finite supports.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePopulation {
    domain: OutcomeDomain,
    support: Vec<f64>,
    x_space: Arc<CovariateSpace>,
    w_space: Arc<CovariateSpace>,
    regime: Regime,
    cells: Vec<PopCell>,
}

impl FinitePopulation {
    /// Builds and validates a population.
    pub fn new(
        domain: OutcomeDomain,
        support: Vec<f64>,
        x_space: Arc<CovariateSpace>,
        w_space: Arc<CovariateSpace>,
        regime: Regime,
        cells: Vec<PopCell>,
    ) -> Result<Self> {
        let pop = Self::new_unchecked(domain, support, x_space, w_space, regime, cells);
        validate_population(&pop)?;
        Ok(pop)
    }

    /// Builds a population without checking its invariants; pair with
    /// [`validate_population`].
    pub fn new_unchecked(
        domain: OutcomeDomain,
        support: Vec<f64>,
        x_space: Arc<CovariateSpace>,
        w_space: Arc<CovariateSpace>,
        regime: Regime,
        cells: Vec<PopCell>,
    ) -> Self {
        Self {
            domain,
            support,
            x_space,
            w_space,
            regime,
            cells,
        }
    }

    pub fn domain(&self) -> &OutcomeDomain {
        &self.domain
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn x_space(&self) -> &Arc<CovariateSpace> {
        &self.x_space
    }

    pub fn w_space(&self) -> &Arc<CovariateSpace> {
        &self.w_space
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn cells(&self) -> &[PopCell] {
        &self.cells
    }

    pub fn is_binary(&self) -> bool {
        self.support.iter().all(|&y| y == 0.0 || y == 1.0)
    }

    /// Total mass of the cells satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&PopCell) -> bool) -> f64 {
        self.cells.iter().filter(|c| pred(c)).map(|c| c.mass).sum()
    }

    /// `(P(A), E[y 1_A])` for the event `A` given by `pred`.
    pub fn moments_where(&self, pred: impl Fn(&PopCell) -> bool) -> (f64, f64) {
        self.cells
            .iter()
            .filter(|c| pred(c))
            .fold((0.0, 0.0), |(m, ym), c| (m + c.mass, ym + c.mass * c.y))
    }

    /// `E(y | A)`, or `None` when `P(A) = 0`.
    pub fn mean_where(&self, pred: impl Fn(&PopCell) -> bool) -> Option<f64> {
        let (m, ym) = self.moments_where(pred);
        (m > 0.0).then(|| ym / m)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: PopulationFile = serde_json::from_str(text)?;
        file.into_population()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PopulationFile::from_population(self))?)
    }
}

/// Checks normalization, sign, and domain membership of every cell.
pub fn validate_population(pop: &FinitePopulation) -> Result<()> {
    pop.domain.validate()?;
    check_cell_cap(&pop.x_space, &pop.w_space)?;
    for &y in &pop.support {
        if !(y >= pop.domain.lo && y <= pop.domain.hi) || (pop.domain.binary && y != 0.0 && y != 1.0) {
            return Err(Error::OutcomeOutOfDomain { value: y, line: None });
        }
    }
    let mut total = 0.0;
    for (i, c) in pop.cells.iter().enumerate() {
        if !c.mass.is_finite() || c.mass < 0.0 {
            return Err(Error::NegativeMass { cell: i, mass: c.mass });
        }
        if !pop.domain.contains(c.y) {
            return Err(Error::OutcomeOutOfDomain { value: c.y, line: None });
        }
        if !pop.support.contains(&c.y) {
            return Err(Error::UnknownSupportValue(c.y));
        }
        if !pop.x_space.contains(c.x) || !pop.w_space.contains(c.w) {
            return Err(Error::CovariateOutOfDomain(format!("population cell {i}")));
        }
        total += c.mass;
    }
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::MassNotNormalized { total });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PopulationFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outcome_domain: Option<OutcomeDomain>,
    outcome_support: Vec<f64>,
    #[serde(default)]
    x_domains: Vec<CovariateRole>,
    #[serde(default)]
    w_domains: Vec<CovariateRole>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regime: Option<Regime>,
    cells: Vec<CellFile>,
}

#[derive(Serialize, Deserialize)]
struct CellFile {
    y: f64,
    #[serde(default)]
    x: String,
    #[serde(default)]
    w: String,
    z: u8,
    mass: f64,
}

impl PopulationFile {
    fn into_population(self) -> Result<FinitePopulation> {
        let x_space = Arc::new(CovariateSpace::new(self.x_domains)?);
        let w_space = Arc::new(CovariateSpace::new(self.w_domains)?);
        let domain = match self.outcome_domain {
            Some(d) => d,
            None => default_domain(&self.outcome_support)?,
        };
        let regime = self.regime.unwrap_or(if w_space.is_unit() {
            Regime::Outcome
        } else {
            Regime::Covariate
        });
        let cells = self
            .cells
            .into_iter()
            .map(|c| {
                let z = match c.z {
                    0 => false,
                    1 => true,
                    other => return Err(Error::InvalidConfig(format!("z must be 0 or 1, got {other}"))),
                };
                Ok(PopCell {
                    y: c.y,
                    x: x_space.parse(&c.x)?,
                    w: w_space.parse(&c.w)?,
                    z,
                    mass: c.mass,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FinitePopulation::new(domain, self.outcome_support, x_space, w_space, regime, cells)
    }

    fn from_population(pop: &FinitePopulation) -> Self {
        Self {
            outcome_domain: Some(pop.domain),
            outcome_support: pop.support.clone(),
            x_domains: pop.x_space.roles().to_vec(),
            w_domains: pop.w_space.roles().to_vec(),
            regime: Some(pop.regime),
            cells: pop
                .cells
                .iter()
                .map(|c| CellFile {
                    y: c.y,
                    x: pop.x_space.label(c.x),
                    w: pop.w_space.label(c.w),
                    z: u8::from(c.z),
                    mass: c.mass,
                })
                .collect(),
        }
    }
}

fn default_domain(support: &[f64]) -> Result<OutcomeDomain> {
    if !support.is_empty() && support.iter().all(|&y| y == 0.0 || y == 1.0) {
        return Ok(OutcomeDomain::binary());
    }
    let lo = support.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = support.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    OutcomeDomain::new(lo, hi)
}
