use rand::Rng;

use super::NORMALIZATION_TOL;
use crate::error::{Error, Result};

/// A finite probability distribution with inverse-CDF sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete<T> {
    support: Vec<T>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl<T: Copy> Discrete<T> {
    /// Builds a distribution from atoms whose masses already sum to one.
    pub fn new(atoms: Vec<(T, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.iter().any(|a| !a.1.is_finite() || a.1 < 0.0) {
            return Err(Error::InvalidDistribution("negative or non-finite mass".into()));
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        Ok(Self::from_atoms(atoms))
    }

    /// Builds a distribution from nonnegative weights, rescaling to unit mass.
    pub fn from_weights(atoms: Vec<(T, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.iter().any(|a| !a.1.is_finite() || a.1 < 0.0) || total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidDistribution(
                "weights must be nonnegative with positive sum".into(),
            ));
        }
        Ok(Self::from_atoms(
            atoms.into_iter().map(|(v, w)| (v, w / total)).collect(),
        ))
    }

    /// A point mass.
    pub fn point(value: T) -> Self {
        Self::from_atoms(vec![(value, 1.0)])
    }

    fn from_atoms(atoms: Vec<(T, f64)>) -> Self {
        let (support, probs): (Vec<T>, Vec<f64>) = atoms.into_iter().unzip();
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self {
            support,
            probs,
            cumulative,
        }
    }

    pub fn atoms(&self) -> impl Iterator<Item = (T, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn prob_of(&self, value: T) -> f64
    where
        T: PartialEq,
    {
        self.atoms().filter(|(v, _)| *v == value).map(|(_, p)| p).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let total = *self.cumulative.last().expect("distribution has atoms");
        let u = rng.random::<f64>() * total;
        // first atom whose cumulative mass exceeds u; zero-mass atoms are skipped
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.support[idx.min(self.support.len() - 1)]
    }
}

impl Discrete<f64> {
    pub fn mean(&self) -> f64 {
        self.atoms().map(|(v, p)| v * p).sum()
    }
}
