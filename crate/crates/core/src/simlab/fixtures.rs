//! Small hand-built populations with known answers, shared by tests, the
//! acceptance suite and the CLI examples.

use std::sync::Arc;

use crate::domain::{CovariateSpace, CovariateValue, FinitePopulation, OutcomeDomain, PopCell, Regime};

fn cell(y: f64, x: u32, w: u32, z: bool, mass: f64) -> PopCell {
    PopCell {
        y,
        x: CovariateValue(x),
        w: CovariateValue(w),
        z,
        mass,
    }
}

fn two_groups() -> Arc<CovariateSpace> {
    Arc::new(CovariateSpace::single("group", &["a", "b"]).expect("valid space"))
}

/// Binary outcome missing not at random. At `group=a`:
/// `E(y | z=1) = 0.7`, `P(z=1) = 0.5`, `E(y | z=0) = 0.9`, so the true mean is
/// 0.80 and the assumption-free interval is `[0.35, 0.85]`.
pub fn mnar_outcome_population() -> FinitePopulation {
    let cells = vec![
        cell(1.0, 0, 0, true, 0.175),
        cell(0.0, 0, 0, true, 0.075),
        cell(1.0, 0, 0, false, 0.225),
        cell(0.0, 0, 0, false, 0.025),
        cell(1.0, 1, 0, true, 0.2),
        cell(0.0, 1, 0, true, 0.2),
        cell(1.0, 1, 0, false, 0.05),
        cell(0.0, 1, 0, false, 0.05),
    ];
    FinitePopulation::new(
        OutcomeDomain::binary(),
        vec![0.0, 1.0],
        two_groups(),
        Arc::new(CovariateSpace::unit()),
        Regime::Outcome,
        cells,
    )
    .expect("fixture is valid")
}

/// Binary outcome missing at random given `group`: at `group=a`,
/// `E(y | z=1) = E(y | z=0) = 0.6` with `P(z=1) = 0.6`.
pub fn mar_outcome_population() -> FinitePopulation {
    let cells = vec![
        cell(1.0, 0, 0, true, 0.18),
        cell(0.0, 0, 0, true, 0.12),
        cell(1.0, 0, 0, false, 0.12),
        cell(0.0, 0, 0, false, 0.08),
        cell(1.0, 1, 0, true, 0.1),
        cell(0.0, 1, 0, true, 0.3),
        cell(1.0, 1, 0, false, 0.025),
        cell(0.0, 1, 0, false, 0.075),
    ];
    FinitePopulation::new(
        OutcomeDomain::binary(),
        vec![0.0, 1.0],
        two_groups(),
        Arc::new(CovariateSpace::unit()),
        Regime::Outcome,
        cells,
    )
    .expect("fixture is valid")
}

/// Binary outcome with a missing covariate `geno` in `{p, q}` and a single
/// `group` level. With `omega = p`: `P(y=1, w=p, z=1) = 0.3`,
/// `P(y=0, w=p, z=1) = 0.1`, `P(y=1, z=0) = 0.2`, `P(y=0, z=0) = 0.2`, so the
/// identification interval for `E(y | w = p)` is `[0.5, 5/6]`.
pub fn covariate_population() -> FinitePopulation {
    let cells = vec![
        cell(1.0, 0, 0, true, 0.3),
        cell(0.0, 0, 0, true, 0.1),
        cell(1.0, 0, 1, true, 0.1),
        cell(0.0, 0, 1, true, 0.1),
        cell(1.0, 0, 0, false, 0.1),
        cell(1.0, 0, 1, false, 0.1),
        cell(0.0, 0, 0, false, 0.05),
        cell(0.0, 0, 1, false, 0.15),
    ];
    FinitePopulation::new(
        OutcomeDomain::binary(),
        vec![0.0, 1.0],
        Arc::new(CovariateSpace::single("group", &["a"]).expect("valid space")),
        Arc::new(CovariateSpace::single("geno", &["p", "q"]).expect("valid space")),
        Regime::Covariate,
        cells,
    )
    .expect("fixture is valid")
}

/// Covariate never observed; `y` depends on `geno` within `group=a`, where
/// the short mean is `E(y | group=a) = 0.55` while
/// `E(y | group=a, geno=p) = 0.8` and `E(y | group=a, geno=q) = 0.3`.
pub fn ecological_population() -> FinitePopulation {
    let cells = vec![
        cell(1.0, 0, 0, false, 0.20),
        cell(0.0, 0, 0, false, 0.05),
        cell(1.0, 0, 1, false, 0.075),
        cell(0.0, 0, 1, false, 0.175),
        cell(1.0, 1, 0, false, 0.1),
        cell(0.0, 1, 0, false, 0.15),
        cell(1.0, 1, 1, false, 0.2),
        cell(0.0, 1, 1, false, 0.05),
    ];
    FinitePopulation::new(
        OutcomeDomain::binary(),
        vec![0.0, 1.0],
        two_groups(),
        Arc::new(CovariateSpace::single("geno", &["p", "q"]).expect("valid space")),
        Regime::Covariate,
        cells,
    )
    .expect("fixture is valid")
}
