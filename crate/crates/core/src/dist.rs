//! Sparse prediction distributions over finitely many atoms in `[0, 1]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOL: f64 = 1e-12;

/// A probability distribution over finitely many prediction values.
///
/// Atoms are kept sorted by value and exact duplicates are merged, so two
/// distributions over the same support compare atom-for-atom.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDistribution {
    atoms: Vec<(f64, f64)>,
}

impl PredictionDistribution {
    /// All mass on a single value.
    pub fn point_mass(value: f64) -> Self {
        PredictionDistribution {
            atoms: vec![(value, 1.0)],
        }
    }

    /// Builds a distribution from `(value, probability)` pairs.
    ///
    /// Pairs are sorted by value, exact-duplicate values are merged, and
    /// zero-probability atoms are dropped. Fails if any probability is
    /// negative, any value is non-finite, or the total mass is off by more
    /// than [`MASS_TOL`].
    pub fn from_atoms(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Distribution("no atoms".into()));
        }
        for &(v, w) in &pairs {
            if !v.is_finite() || !w.is_finite() {
                return Err(Error::Distribution(format!("non-finite atom ({v}, {w})")));
            }
            if w < 0.0 {
                return Err(Error::Distribution(format!(
                    "negative probability {w} at {v}"
                )));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            match atoms.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => atoms.push((v, w)),
            }
        }
        atoms.retain(|&(_, w)| w > 0.0);
        if atoms.is_empty() {
            return Err(Error::Distribution("all atoms have zero mass".into()));
        }
        let mass: f64 = atoms.iter().map(|&(_, w)| w).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Distribution(format!("total mass {mass} != 1")));
        }
        Ok(PredictionDistribution { atoms })
    }

    /// Sorted `(value, probability)` pairs.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Probability of exactly `value` (bit-exact match).
    pub fn prob_of(&self, value: f64) -> f64 {
        match self
            .atoms
            .binary_search_by(|probe| probe.0.total_cmp(&value))
        {
            Ok(i) => self.atoms[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, w)| v * w).sum()
    }

    /// Checks the transcript-level invariants: atoms in `[0, 1]`,
    /// probabilities nonnegative, total mass 1 within [`MASS_TOL`].
    pub fn validate(&self) -> Result<()> {
        let mut mass = 0.0;
        for &(v, w) in &self.atoms {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Distribution(format!("atom {v} outside [0, 1]")));
            }
            if w < 0.0 {
                return Err(Error::Distribution(format!(
                    "negative probability {w} at {v}"
                )));
            }
            mass += w;
        }
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Distribution(format!("total mass {mass} != 1")));
        }
        Ok(())
    }

    /// Inverse-CDF sample over the sorted atoms; consumes exactly one draw.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for &(v, w) in &self.atoms {
            cum += w;
            if u < cum {
                return v;
            }
        }
        self.atoms[self.atoms.len() - 1].0
    }
}
