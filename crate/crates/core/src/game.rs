//! Exact solution of finite two-player zero-sum matrix games.
//!
//! The row player maximizes `xᵀ A y`. After shifting `A` to be strictly
//! positive, the column player's problem becomes
//! `max Σ y  s.t.  A y ≤ 1, y ≥ 0`, whose origin is feasible. A dense tableau
//! simplex with Bland's rule solves it; the row player's strategy is read off
//! the slack reduced costs.

use crate::error::{Error, Result};

const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    /// Maxmin strategy of the row player.
    pub row: Vec<f64>,
    /// Minmax strategy of the column player.
    pub col: Vec<f64>,
    /// Value of the game for the row player.
    pub value: f64,
    pub pivots: usize,
}

/// Solves the game with row-major payoff matrix `payoff` (`rows × cols`).
pub fn solve_matrix_game(payoff: &[f64], rows: usize, cols: usize, max_pivots: usize) -> Result<MatrixGameSolution> {
    if rows == 0 || cols == 0 || payoff.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!("payoff has {} entries for a {rows}x{cols} game", payoff.len())));
    }
    if payoff.iter().any(|x| !x.is_finite()) {
        return Err(Error::BadParams("payoff entries must be finite".into()));
    }
    let min = payoff.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;

    // Columns: y_0..y_{cols-1}, slacks s_0..s_{rows-1}, rhs.
    let width = cols + rows + 1;
    let mut tab = vec![0.0; (rows + 1) * width];
    for i in 0..rows {
        for j in 0..cols {
            tab[i * width + j] = payoff[i * cols + j] + shift;
        }
        tab[i * width + cols + i] = 1.0;
        tab[i * width + width - 1] = 1.0;
    }
    let obj = rows * width;
    for j in 0..cols {
        tab[obj + j] = -1.0;
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let mut pivots = 0;
    loop {
        let entering = match (0..cols + rows).find(|&j| tab[obj + j] < -PIVOT_TOLERANCE) {
            Some(j) => j,
            None => break,
        };
        if pivots >= max_pivots {
            return Err(Error::NonConvergence(max_pivots));
        }
        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..rows {
            let a = tab[i * width + entering];
            if a > PIVOT_TOLERANCE {
                let ratio = tab[i * width + width - 1] / a;
                let better = match leaving {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - PIVOT_TOLERANCE
                            || (ratio <= best_ratio + PIVOT_TOLERANCE && basis[i] < basis[l])
                    }
                };
                if better {
                    leaving = Some(i);
                    best_ratio = ratio;
                }
            }
        }
        // A strictly positive constraint matrix keeps the problem bounded.
        let r = leaving.ok_or(Error::NonConvergence(pivots))?;
        pivot(&mut tab, width, rows + 1, r, entering);
        basis[r] = entering;
        pivots += 1;
    }

    let total = tab[obj + width - 1];
    if total <= 0.0 {
        return Err(Error::NonConvergence(pivots));
    }
    let scale = 1.0 / total;
    let mut col = vec![0.0; cols];
    for (i, &b) in basis.iter().enumerate() {
        if b < cols {
            col[b] = tab[i * width + width - 1].max(0.0);
        }
    }
    let mut row: Vec<f64> = (0..rows).map(|i| tab[obj + cols + i].max(0.0)).collect();
    normalize(&mut row);
    normalize(&mut col);
    Ok(MatrixGameSolution { row, col, value: scale - shift, pivots })
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

fn pivot(tab: &mut [f64], width: usize, height: usize, r: usize, c: usize) {
    let p = tab[r * width + c];
    for j in 0..width {
        tab[r * width + j] /= p;
    }
    tab[r * width + c] = 1.0;
    for i in 0..height {
        if i == r {
            continue;
        }
        let f = tab[i * width + c];
        if f == 0.0 {
            continue;
        }
        for j in 0..width {
            tab[i * width + j] -= f * tab[r * width + j];
        }
        tab[i * width + c] = 0.0;
    }
}

/// `min_j Σ_i x_i A_ij`.
pub fn row_guarantee(payoff: &[f64], rows: usize, cols: usize, x: &[f64]) -> f64 {
    (0..cols).map(|j| (0..rows).map(|i| x[i] * payoff[i * cols + j]).sum::<f64>()).fold(f64::INFINITY, f64::min)
}

/// `max_i Σ_j A_ij y_j`.
pub fn col_guarantee(payoff: &[f64], rows: usize, cols: usize, y: &[f64]) -> f64 {
    (0..rows).map(|i| (0..cols).map(|j| payoff[i * cols + j] * y[j]).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max)
}
