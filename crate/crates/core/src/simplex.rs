use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A probability vector over a finite index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexDistribution {
    weights: Vec<f64>,
}

impl SimplexDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("weight {w} is not a nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidDistribution("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("no positive weight".into()));
        }
        Ok(Self { weights: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn uniform(n: usize) -> Self {
        Self { weights: vec![1.0 / n as f64; n] }
    }

    pub fn point(n: usize, index: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.weights)
    }

    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.weights.iter().zip(other).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Zeroes weights below `threshold` and renormalizes.
    pub fn pruned(&self, threshold: f64) -> Self {
        let kept: Vec<f64> = self.weights.iter().map(|&w| if w < threshold { 0.0 } else { w }).collect();
        Self::normalized(kept).unwrap_or_else(|_| self.clone())
    }

    /// Draws an index by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.weights, rng)
    }
}

impl TryFrom<Vec<f64>> for SimplexDistribution {
    type Error = Error;
    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights)
    }
}

impl From<SimplexDistribution> for Vec<f64> {
    fn from(d: SimplexDistribution) -> Self {
        d.weights
    }
}

/// Lowest index attaining the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Lowest index attaining the minimum.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from weights summing to (about) one. Zero-weight indices are
/// never returned.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = i;
        if u < acc {
            return i;
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn validates_mass_and_sign() {
        assert!(SimplexDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexDistribution::new(vec![0.5, 0.5 + 1e-10]).is_ok());
        assert!(SimplexDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexDistribution::new(vec![]).is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmin(&[0.2, 0.1, 0.1]), 1);
    }

    #[test]
    fn never_samples_zero_weight() {
        let d = SimplexDistribution::new(vec![1.0, 0.0]).unwrap();
        let mut rng = stream(1, 0);
        assert!((0..10_000).all(|_| d.sample(&mut rng) == 0));
        let d = SimplexDistribution::new(vec![0.0, 1.0]).unwrap();
        assert!((0..10_000).all(|_| d.sample(&mut rng) == 1));
    }

    #[test]
    fn pruning_renormalizes() {
        let d = SimplexDistribution::new(vec![0.5, 1e-12, 0.5 - 1e-12]).unwrap();
        let p = d.pruned(1e-9);
        assert_eq!(p.weights()[1], 0.0);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p.support_size(), 2);
    }
}
