//! Skew-symmetric preference matrices.

use crate::error::{Error, Result};
use crate::simplex::SimplexDistribution;

/// Input tolerance for skew-symmetry.
pub const SKEW_TOLERANCE: f64 = 1e-12;

/// A K×K matrix of expected duel outcomes: `get(a, b) > 0` means `a` tends to
/// beat `b`, and `(get(a, b) + 1) / 2` is the probability that it does.
///
/// Only the strict upper triangle is taken from the input; the lower triangle is
/// its exact negation and the diagonal is zero, so skew-symmetry holds bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl PreferenceMatrix {
    /// Validates a square matrix given row by row.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::DimensionMismatch("matrix has no rows".into()));
        }
        for (a, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!("row {a} has {} entries, expected {k}", row.len())));
            }
        }
        for (a, row) in rows.iter().enumerate() {
            for (b, &x) in row.iter().enumerate() {
                if !(-1.0..=1.0).contains(&x) {
                    return Err(Error::RangeViolation(a, b));
                }
            }
        }
        for a in 0..k {
            for b in a..k {
                if (rows[a][b] + rows[b][a]).abs() > SKEW_TOLERANCE {
                    return Err(Error::SkewSymmetryViolation(a, b));
                }
            }
        }
        Ok(Self::from_upper(k, |a, b| rows[a][b]))
    }

    /// Builds a matrix from a function evaluated on the strict upper triangle
    /// (`a < b`). Values are clamped to [-1, 1].
    pub fn from_upper(k: usize, mut upper: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; k * k];
        for a in 0..k {
            for b in a + 1..k {
                let x = upper(a, b).clamp(-1.0, 1.0);
                entries[a * k + b] = x;
                entries[b * k + a] = -x;
            }
        }
        Self { k, entries }
    }

    /// The all-ties matrix.
    pub fn zeros(k: usize) -> Self {
        Self::from_upper(k, |_, _| 0.0)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[a * self.k + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.entries[a * self.k..(a + 1) * self.k]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k).map(|a| self.row(a).to_vec()).collect()
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// `wᵀ P u`.
    pub fn bilinear(&self, w: &[f64], u: &[f64]) -> f64 {
        let mut total = 0.0;
        for (a, &wa) in w.iter().enumerate() {
            if wa == 0.0 {
                continue;
            }
            let row = self.row(a);
            total += wa * row.iter().zip(u).map(|(p, ub)| p * ub).sum::<f64>();
        }
        total
    }

    /// `min_b Σ_a w(a) P(a, b)`: the worst expected outcome of `w` against any
    /// single action.
    pub fn margin(&self, w: &SimplexDistribution) -> f64 {
        let w = w.weights();
        (0..self.k).map(|b| (0..self.k).map(|a| w[a] * self.get(a, b)).sum::<f64>()).fold(f64::INFINITY, f64::min)
    }

    /// Restriction to the listed actions, in the given order.
    pub fn submatrix(&self, actions: &[usize]) -> Self {
        Self::from_upper(actions.len(), |i, j| self.get(actions[i], actions[j]))
    }
}
