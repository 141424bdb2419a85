use std::collections::BTreeMap;
use std::sync::Arc;

use ordered_float::OrderedFloat;
use rand::Rng;

use crate::domain::{
    CovariateSpace, CovariateValue, Discrete, FinitePopulation, ObservationRecord, ObservationTable, OutcomeDomain,
    PopCell, Regime, NORMALIZATION_TOL,
};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, SAMPLING_STREAM};

/// Joint distribution of `(y, x, w)` before nonresponse is introduced.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseDistribution {
    pub domain: OutcomeDomain,
    pub support: Vec<f64>,
    pub x_space: Arc<CovariateSpace>,
    pub w_space: Arc<CovariateSpace>,
    pub cells: Vec<BaseCell>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseCell {
    pub y: f64,
    pub x: CovariateValue,
    pub w: CovariateValue,
    pub mass: f64,
}

impl BaseDistribution {
    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.cells.iter().map(|c| c.mass).sum();
        if let Some((i, c)) = self
            .cells
            .iter()
            .enumerate()
            .find(|(_, c)| !c.mass.is_finite() || c.mass < 0.0)
        {
            return Err(Error::NegativeMass { cell: i, mass: c.mass });
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::MassNotNormalized { total });
        }
        Ok(())
    }
}

/// `P(z = 0 | y, x, w)`: the probability that the regime's variable is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessMechanism {
    regime: Regime,
    rule: Rule,
}

#[derive(Debug, Clone, PartialEq)]
enum Rule {
    Constant(f64),
    Table(BTreeMap<(OrderedFloat<f64>, CovariateValue, CovariateValue), f64>),
}

fn check_prob(p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::ProbabilityOutOfRange(format!("missingness probability {p}")))
    }
}

impl MissingnessMechanism {
    /// Missing completely at random with probability `p`.
    pub fn mcar(regime: Regime, p: f64) -> Result<Self> {
        Ok(Self {
            regime,
            rule: Rule::Constant(check_prob(p)?),
        })
    }

    /// Tabulates `f(y, x, w)` over the cells of `base`.
    pub fn from_fn(
        base: &BaseDistribution,
        regime: Regime,
        f: impl Fn(f64, CovariateValue, CovariateValue) -> f64,
    ) -> Result<Self> {
        let mut table = BTreeMap::new();
        for c in &base.cells {
            table.insert((OrderedFloat(c.y), c.x, c.w), check_prob(f(c.y, c.x, c.w))?);
        }
        Ok(Self {
            regime,
            rule: Rule::Table(table),
        })
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn prob_missing(&self, y: f64, x: CovariateValue, w: CovariateValue) -> Result<f64> {
        match &self.rule {
            Rule::Constant(p) => Ok(*p),
            Rule::Table(t) => t.get(&(OrderedFloat(y), x, w)).copied().ok_or_else(|| {
                Error::ProbabilityOutOfRange(format!("mechanism undefined at y={y} x={} w={}", x.0, w.0))
            }),
        }
    }
}

/// Splits each base cell into its observed and missing parts.
pub fn apply_mechanism(base: &BaseDistribution, mech: &MissingnessMechanism) -> Result<FinitePopulation> {
    base.validate()?;
    let mut cells = Vec::with_capacity(2 * base.cells.len());
    for c in &base.cells {
        let p0 = check_prob(mech.prob_missing(c.y, c.x, c.w)?)?;
        cells.push(PopCell {
            y: c.y,
            x: c.x,
            w: c.w,
            z: true,
            mass: c.mass * (1.0 - p0),
        });
        cells.push(PopCell {
            y: c.y,
            x: c.x,
            w: c.w,
            z: false,
            mass: c.mass * p0,
        });
    }
    FinitePopulation::new(
        base.domain,
        base.support.clone(),
        Arc::clone(&base.x_space),
        Arc::clone(&base.w_space),
        mech.regime,
        cells,
    )
}

/// Shape of randomly generated populations.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomPopulationSpec {
    pub domain: OutcomeDomain,
    pub support: Vec<f64>,
    pub x_levels: usize,
    pub w_levels: usize,
    /// Lower bound on every generated weight before normalization.
    pub floor: f64,
}

impl RandomPopulationSpec {
    pub fn binary(x_levels: usize, w_levels: usize) -> Self {
        Self {
            domain: OutcomeDomain::binary(),
            support: vec![0.0, 1.0],
            x_levels,
            w_levels,
            floor: 1e-3,
        }
    }

    fn spaces(&self) -> Result<(Arc<CovariateSpace>, Arc<CovariateSpace>)> {
        let levels = |n: usize, prefix: &str| (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
        let x = CovariateSpace::new(vec![crate::domain::CovariateRole {
            name: "x".into(),
            levels: levels(self.x_levels, "x"),
        }])?;
        let w = if self.w_levels <= 1 {
            CovariateSpace::unit()
        } else {
            CovariateSpace::new(vec![crate::domain::CovariateRole {
                name: "w".into(),
                levels: levels(self.w_levels, "w"),
            }])?
        };
        Ok((Arc::new(x), Arc::new(w)))
    }
}

/// Positive weights `floor + U(0, 1)` on every `(y, x, w)` cell, normalized.
pub fn random_base<R: Rng + ?Sized>(spec: &RandomPopulationSpec, rng: &mut R) -> Result<BaseDistribution> {
    let (x_space, w_space) = spec.spaces()?;
    let mut cells = Vec::new();
    for x in x_space.values() {
        for w in w_space.values() {
            for &y in &spec.support {
                cells.push(BaseCell {
                    y,
                    x,
                    w,
                    mass: spec.floor + rng.random::<f64>(),
                });
            }
        }
    }
    let total: f64 = cells.iter().map(|c| c.mass).sum();
    for c in &mut cells {
        c.mass /= total;
    }
    // renormalize once more so rounding stays within the normalization tolerance
    let total: f64 = cells.iter().map(|c| c.mass).sum();
    for c in &mut cells {
        c.mass /= total;
    }
    Ok(BaseDistribution {
        domain: spec.domain,
        support: spec.support.clone(),
        x_space,
        w_space,
        cells,
    })
}

/// A generic population: every `(y, x, w, z)` cell gets an independent
/// positive weight, so missingness depends on everything.
pub fn random_population<R: Rng + ?Sized>(
    spec: &RandomPopulationSpec,
    regime: Regime,
    rng: &mut R,
) -> Result<FinitePopulation> {
    let base = random_base(spec, rng)?;
    let probs: Vec<f64> = base.cells.iter().map(|_| 0.05 + 0.9 * rng.random::<f64>()).collect();
    let lookup: BTreeMap<_, _> = base
        .cells
        .iter()
        .zip(&probs)
        .map(|(c, &p)| ((OrderedFloat(c.y), c.x, c.w), p))
        .collect();
    let mech = MissingnessMechanism::from_fn(&base, regime, |y, x, w| lookup[&(OrderedFloat(y), x, w)])?;
    apply_mechanism(&base, &mech)
}

/// Population whose nonresponse depends only on `x` (outcome regime) or
/// only on `(y, x)` (covariate regime), i.e. missing at random.
pub fn random_mar_population<R: Rng + ?Sized>(
    spec: &RandomPopulationSpec,
    regime: Regime,
    rng: &mut R,
) -> Result<FinitePopulation> {
    let base = random_base(spec, rng)?;
    let mut by_stratum: BTreeMap<(OrderedFloat<f64>, CovariateValue), f64> = BTreeMap::new();
    let mut by_x: BTreeMap<CovariateValue, f64> = BTreeMap::new();
    for c in &base.cells {
        by_x.entry(c.x).or_insert_with(|| 0.05 + 0.9 * rng.random::<f64>());
        by_stratum
            .entry((OrderedFloat(c.y), c.x))
            .or_insert_with(|| 0.05 + 0.9 * rng.random::<f64>());
    }
    let mech = MissingnessMechanism::from_fn(&base, regime, |y, x, _| match regime {
        Regime::Outcome => by_x[&x],
        Regime::Covariate => by_stratum[&(OrderedFloat(y), x)],
    })?;
    apply_mechanism(&base, &mech)
}

/// Draws `n` units i.i.d. from `pop` and blanks the regime's variable
/// where `z = 0`. Uses [`SAMPLING_STREAM`] of `seed`, so imputation draws
/// under the same seed are independent of the sample.
pub fn sample_table(pop: &FinitePopulation, n: usize, seed: u64) -> Result<ObservationTable> {
    sample_table_with(pop, n, &mut stream_rng(seed, SAMPLING_STREAM))
}

pub fn sample_table_with<R: Rng + ?Sized>(pop: &FinitePopulation, n: usize, rng: &mut R) -> Result<ObservationTable> {
    let cells = pop.cells();
    let index = Discrete::from_weights(cells.iter().enumerate().map(|(i, c)| (i, c.mass)).collect())?;
    let records = (0..n)
        .map(|_| {
            let c = &cells[index.sample(rng)];
            match pop.regime() {
                Regime::Outcome => ObservationRecord {
                    y: c.z.then_some(c.y),
                    x: c.x,
                    w: Some(c.w),
                },
                Regime::Covariate => ObservationRecord {
                    y: Some(c.y),
                    x: c.x,
                    w: c.z.then_some(c.w),
                },
            }
        })
        .collect();
    ObservationTable::new(
        *pop.domain(),
        Arc::clone(pop.x_space()),
        Arc::clone(pop.w_space()),
        records,
    )
}

/// A separate sample revealing `(x, w)` but not `y`, as used to estimate
/// `P(w | x)` in ecological settings.
pub fn sample_auxiliary_with<R: Rng + ?Sized>(
    pop: &FinitePopulation,
    n: usize,
    rng: &mut R,
) -> Result<ObservationTable> {
    let cells = pop.cells();
    let index = Discrete::from_weights(cells.iter().enumerate().map(|(i, c)| (i, c.mass)).collect())?;
    let records = (0..n)
        .map(|_| {
            let c = &cells[index.sample(rng)];
            ObservationRecord {
                y: None,
                x: c.x,
                w: Some(c.w),
            }
        })
        .collect();
    ObservationTable::new(
        *pop.domain(),
        Arc::clone(pop.x_space()),
        Arc::clone(pop.w_space()),
        records,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::fixtures;

    fn base() -> BaseDistribution {
        let xs = Arc::new(CovariateSpace::single("x", &["a", "b"]).unwrap());
        let unit = Arc::new(CovariateSpace::unit());
        let cells = [(0.0, 0, 0.2), (1.0, 0, 0.3), (0.0, 1, 0.4), (1.0, 1, 0.1)]
            .iter()
            .map(|&(y, x, mass)| BaseCell {
                y,
                x: CovariateValue(x),
                w: CovariateValue(0),
                mass,
            })
            .collect();
        BaseDistribution {
            domain: OutcomeDomain::binary(),
            support: vec![0.0, 1.0],
            x_space: xs,
            w_space: unit,
            cells,
        }
    }

    #[test]
    fn no_missingness() {
        let pop = apply_mechanism(&base(), &MissingnessMechanism::mcar(Regime::Outcome, 0.0).unwrap()).unwrap();
        assert_eq!(pop.mass_where(|c| !c.z), 0.0);
    }

    #[test]
    fn mcar_split() {
        let b = base();
        let pop = apply_mechanism(&b, &MissingnessMechanism::mcar(Regime::Outcome, 0.3).unwrap()).unwrap();
        for bc in &b.cells {
            let m0 = pop.mass_where(|c| c.y == bc.y && c.x == bc.x && !c.z);
            let m1 = pop.mass_where(|c| c.y == bc.y && c.x == bc.x && c.z);
            assert!((m0 - 0.3 * bc.mass).abs() < 1e-15 && (m1 - 0.7 * bc.mass).abs() < 1e-15);
        }
    }

    #[test]
    fn mnar_mechanism_shifts_conditional_distribution() {
        let b = base();
        let mech =
            MissingnessMechanism::from_fn(&b, Regime::Outcome, |y, _, _| if y == 1.0 { 0.5 } else { 0.1 }).unwrap();
        let pop = apply_mechanism(&b, &mech).unwrap();
        let x = CovariateValue(0);
        let p1_obs = pop.mean_where(|c| c.x == x && c.z).unwrap();
        let p1_mis = pop.mean_where(|c| c.x == x && !c.z).unwrap();
        // P(y=1 | x=a, z=1) = 0.15 / 0.33, P(y=1 | x=a, z=0) = 0.15 / 0.17
        assert!((p1_obs - 0.15 / 0.33).abs() < 1e-12);
        assert!((p1_mis - 0.15 / 0.17).abs() < 1e-12);
    }

    #[test]
    fn mechanism_rejects_bad_probability() {
        assert!(MissingnessMechanism::mcar(Regime::Outcome, 1.5).is_err());
        assert!(MissingnessMechanism::from_fn(&base(), Regime::Outcome, |_, _, _| -0.1).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_matches_masses() {
        let pop = fixtures::mnar_outcome_population();
        assert_eq!(sample_table(&pop, 100, 4).unwrap(), sample_table(&pop, 100, 4).unwrap());
        let n = 200_000;
        let t = sample_table(&pop, n, 1).unwrap();
        for c in pop.cells() {
            // missing outcomes are indistinguishable, so compare their total per x
            let (hits, mass) = if c.z {
                (
                    t.records().iter().filter(|r| r.x == c.x && r.y == Some(c.y)).count(),
                    c.mass,
                )
            } else {
                (
                    t.records().iter().filter(|r| r.x == c.x && r.y.is_none()).count(),
                    pop.mass_where(|d| d.x == c.x && !d.z),
                )
            };
            assert!((hits as f64 / n as f64 - mass).abs() < 0.01);
        }
    }

    #[test]
    fn point_mass_population() {
        let xs = Arc::new(CovariateSpace::unit());
        let cells = vec![PopCell {
            y: 1.0,
            x: CovariateValue(0),
            w: CovariateValue(0),
            z: true,
            mass: 1.0,
        }];
        let pop = FinitePopulation::new(
            OutcomeDomain::binary(),
            vec![0.0, 1.0],
            xs.clone(),
            xs,
            Regime::Outcome,
            cells,
        )
        .unwrap();
        let t = sample_table(&pop, 50, 0).unwrap();
        assert!(t.records().iter().all(|r| *r == t.records()[0]));
    }

    #[test]
    fn random_populations_are_valid() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..20 {
            let pop = random_population(&RandomPopulationSpec::binary(2, 3), Regime::Covariate, &mut rng).unwrap();
            assert!(pop.cells().iter().all(|c| c.mass > 0.0));
            let mar = random_mar_population(&RandomPopulationSpec::binary(3, 1), Regime::Outcome, &mut rng).unwrap();
            assert_eq!(mar.regime(), Regime::Outcome);
        }
    }
}
