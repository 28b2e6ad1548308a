//! Winner concepts for a single preference matrix: the von Neumann winner (a
//! maxmin strategy of the symmetric zero-sum game) and the classical
//! Condorcet, Copeland, Borda and Random-Walk winners it is compared against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::solve_matrix_game;
use crate::matrix::PreferenceMatrix;
use crate::simplex::{argmax, SimplexDistribution};

/// Weights below this are zeroed before a strategy is reported.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

const MAX_PIVOTS: usize = 100_000;
const POWER_ITERATION_CAP: usize = 1_000_000;
const POWER_ITERATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSolution {
    pub strategy: SimplexDistribution,
    /// `min_b Σ_a w(a) P(a, b)`.
    pub certified_margin: f64,
    pub solver_iterations: usize,
}

impl GameSolution {
    fn certify(p: &PreferenceMatrix, strategy: SimplexDistribution, iterations: usize, eps: f64) -> Result<Self> {
        let certified_margin = p.margin(&strategy);
        if certified_margin < -eps {
            return Err(Error::NonConvergence(iterations));
        }
        Ok(GameSolution { strategy, certified_margin, solver_iterations: iterations })
    }

    pub fn support_size(&self) -> usize {
        self.strategy.support_size()
    }
}

/// Finds `w` with `min_b Σ_a w(a) P(a, b) ≥ -eps_solve`.
///
/// The symmetric game is solved exactly by the simplex method, then weights
/// below [`SUPPORT_THRESHOLD`] are pruned. `solver_iterations` counts pivots.
pub fn solve_von_neumann(p: &PreferenceMatrix, eps_solve: f64) -> Result<GameSolution> {
    if !(eps_solve > 0.0) {
        return Err(Error::BadParams("eps_solve must be positive".into()));
    }
    let k = p.k();
    let lp = solve_matrix_game(p.as_slice(), k, k, MAX_PIVOTS)?;
    let strategy = SimplexDistribution::normalized(lp.row)?.pruned(SUPPORT_THRESHOLD);
    GameSolution::certify(p, strategy, lp.pivots, eps_solve)
}

/// Iteration count used by [`solve_by_self_play`].
pub fn self_play_iterations(k: usize, eps_solve: f64) -> f64 {
    (8.0 * (k.max(2) as f64).ln() / (eps_solve * eps_solve)).ceil()
}

/// Multiplicative-weights self-play: a row and a column learner run
/// exponentiated gradient on `P` and `-Pᵀ`; the row learner's averaged
/// iterate is returned. Converges at rate `O(sqrt(ln K / T))`, so it is only
/// practical for moderate `eps_solve`.
pub fn solve_by_self_play(p: &PreferenceMatrix, eps_solve: f64, max_iterations: usize) -> Result<GameSolution> {
    if !(eps_solve > 0.0) {
        return Err(Error::BadParams("eps_solve must be positive".into()));
    }
    let k = p.k();
    let needed = self_play_iterations(k, eps_solve);
    if needed > max_iterations as f64 {
        return Err(Error::NonConvergence(max_iterations));
    }
    let iterations = needed as usize;
    let step = ((k.max(2) as f64).ln() / iterations as f64).sqrt();

    let mut row_log = vec![0.0; k];
    let mut col_log = vec![0.0; k];
    let mut avg = vec![0.0; k];
    let mut row = vec![1.0 / k as f64; k];
    let mut col = vec![1.0 / k as f64; k];
    for _ in 0..iterations {
        softmax_into(&row_log, &mut row);
        softmax_into(&col_log, &mut col);
        for (a, x) in avg.iter_mut().enumerate() {
            *x += row[a];
        }
        // Row gains (P u)(a); column gains (-Pᵀ w)(b) = (P w)(b) by skew-symmetry.
        for a in 0..k {
            let r = p.row(a);
            row_log[a] += step * r.iter().zip(&col).map(|(x, y)| x * y).sum::<f64>();
            col_log[a] += step * r.iter().zip(&row).map(|(x, y)| x * y).sum::<f64>();
        }
    }
    let strategy = SimplexDistribution::normalized(avg)?.pruned(SUPPORT_THRESHOLD);
    GameSolution::certify(p, strategy, iterations, eps_solve)
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// The action beating every other action, if one exists.
pub fn find_condorcet(p: &PreferenceMatrix) -> Option<usize> {
    (0..p.k()).find(|&a| (0..p.k()).all(|b| b == a || p.get(a, b) > 0.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopelandScores {
    /// `|{j ≠ i : P(i,j) > 0}|`.
    pub strict: Vec<i64>,
    /// `|{j : P(i,j) ≥ 0}|`, counting `j = i`.
    pub weak: Vec<i64>,
    /// `|{j : P(i,j) > 0}| - |{j : P(i,j) < 0}|`.
    pub net: Vec<i64>,
}

impl CopelandScores {
    /// Actions attaining the maximum of `scores`.
    pub fn winners(scores: &[i64]) -> Vec<usize> {
        let best = scores.iter().copied().max().unwrap_or(0);
        (0..scores.len()).filter(|&i| scores[i] == best).collect()
    }
}

pub fn copeland_scores(p: &PreferenceMatrix) -> CopelandScores {
    let k = p.k();
    let count = |i: usize, pred: &dyn Fn(f64) -> bool| (0..k).filter(|&j| pred(p.get(i, j))).count() as i64;
    let strict: Vec<i64> = (0..k).map(|i| count(i, &|x| x > 0.0)).collect();
    let weak = (0..k).map(|i| count(i, &|x| x >= 0.0)).collect();
    let net = (0..k).map(|i| strict[i] - count(i, &|x| x < 0.0)).collect();
    CopelandScores { strict, weak, net }
}

/// Probability of beating a uniformly drawn opponent: `(1/K) Σ_j (P(i,j)+1)/2`.
pub fn borda_scores(p: &PreferenceMatrix) -> Vec<f64> {
    let k = p.k() as f64;
    (0..p.k()).map(|i| p.row(i).iter().map(|x| (x + 1.0) / 2.0).sum::<f64>() / k).collect()
}

/// Stationary distribution of the column-stochastic chain obtained from
/// `P/2 + 1/2` by normalizing each column, and its most likely state.
pub fn random_walk_winner(p: &PreferenceMatrix) -> Result<(SimplexDistribution, usize)> {
    let k = p.k();
    let mut q = vec![0.0; k * k];
    for b in 0..k {
        let total: f64 = (0..k).map(|a| p.get(a, b) / 2.0 + 0.5).sum();
        for a in 0..k {
            q[a * k + b] = (p.get(a, b) / 2.0 + 0.5) / total;
        }
    }
    let mut x = vec![1.0 / k as f64; k];
    let mut next = vec![0.0; k];
    for _ in 0..POWER_ITERATION_CAP {
        for a in 0..k {
            next[a] = (0..k).map(|b| q[a * k + b] * x[b]).sum();
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta <= POWER_ITERATION_TOLERANCE {
            let winner = argmax(&x);
            return Ok((SimplexDistribution::normalized(x)?, winner));
        }
    }
    Err(Error::NonConvergence(POWER_ITERATION_CAP))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomWalkWinner {
    pub stationary: SimplexDistribution,
    pub winner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerReport {
    pub condorcet: Option<usize>,
    pub copeland_strict: Vec<i64>,
    pub copeland_weak: Vec<i64>,
    pub copeland_net: Vec<i64>,
    pub borda: Vec<f64>,
    pub random_walk: RandomWalkWinner,
}

pub fn winner_report(p: &PreferenceMatrix) -> Result<WinnerReport> {
    let CopelandScores { strict, weak, net } = copeland_scores(p);
    let (stationary, winner) = random_walk_winner(p)?;
    Ok(WinnerReport {
        condorcet: find_condorcet(p),
        copeland_strict: strict,
        copeland_weak: weak,
        copeland_net: net,
        borda: borda_scores(p),
        random_walk: RandomWalkWinner { stationary, winner },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{clone_matrix, five_arm_matrix};
    use proptest::prelude::*;

    fn cycle3() -> PreferenceMatrix {
        PreferenceMatrix::from_upper(3, |a, b| match (a, b) {
            (0, 1) | (1, 2) => 1.0,
            (0, 2) => -1.0,
            _ => 0.0,
        })
    }

    #[test]
    fn five_arm_von_neumann_winner() {
        let s = solve_von_neumann(&five_arm_matrix(), 1e-6).unwrap();
        let third = 1.0 / 3.0;
        assert!(s.strategy.l1_distance(&[third, third, third, 0.0, 0.0]) <= 1e-4);
        assert!(s.certified_margin >= -1e-6);
        assert_eq!(s.support_size(), 3);
    }

    #[test]
    fn cycle_is_uniform() {
        let s = solve_von_neumann(&cycle3(), 1e-6).unwrap();
        for &w in s.strategy.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(s.certified_margin.abs() < 1e-12);
    }

    #[test]
    fn condorcet_winner_is_a_point_mass() {
        let p = PreferenceMatrix::from_upper(4, |a, b| {
            if a == 2 || b == 2 {
                if a == 2 {
                    0.1
                } else {
                    -0.1
                }
            } else {
                0.7
            }
        });
        assert_eq!(find_condorcet(&p), Some(2));
        let s = solve_von_neumann(&p, 1e-6).unwrap();
        assert!(s.strategy.weights()[2] >= 1.0 - 4.0 * 1e-6);
    }

    #[test]
    fn condorcet_examples() {
        assert_eq!(find_condorcet(&five_arm_matrix()), None);
        assert_eq!(find_condorcet(&PreferenceMatrix::from_upper(2, |_, _| 0.3)), Some(0));
        assert_eq!(find_condorcet(&PreferenceMatrix::zeros(3)), None);
        assert_eq!(find_condorcet(&PreferenceMatrix::zeros(1)), Some(0));
    }

    #[test]
    fn five_arm_scores() {
        let p = five_arm_matrix();
        assert_eq!(copeland_scores(&p).strict, vec![2, 2, 2, 3, 1]);
        let borda = borda_scores(&p);
        for (x, y) in borda.iter().zip([0.455, 0.53, 0.53, 0.54, 0.445]) {
            assert!((x - y).abs() <= 1e-9, "{borda:?}");
        }
        let (stationary, winner) = random_walk_winner(&p).unwrap();
        for (x, y) in stationary.weights().iter().zip([0.198, 0.212, 0.204, 0.217, 0.169]) {
            assert!((x - y).abs() <= 1e-3, "{stationary:?}");
        }
        assert_eq!(winner, 3);
    }

    #[test]
    fn trivial_scores() {
        let z = PreferenceMatrix::zeros(4);
        assert_eq!(copeland_scores(&z).strict, vec![0; 4]);
        assert_eq!(copeland_scores(&z).weak, vec![4; 4]);
        assert_eq!(borda_scores(&z), vec![0.5; 4]);
        let (st, _) = random_walk_winner(&z).unwrap();
        assert!(st.l1_distance(&[0.25; 4]) < 1e-12);

        let two = PreferenceMatrix::from_upper(2, |_, _| 1.0);
        assert_eq!(borda_scores(&two), vec![0.75, 0.25]);
        // Q = [[0.5, 1], [0, 0.5]]; normalized columns are [1, 0] and [2/3, 1/3],
        // so state 0 is absorbing and the chain settles on it.
        let (st, w) = random_walk_winner(&two).unwrap();
        assert!(st.l1_distance(&[1.0, 0.0]) < 1e-9, "{st:?}");
        assert_eq!(w, 0);
    }

    #[test]
    fn clone_construction_scores() {
        let k = 5;
        let p = clone_matrix(k);
        let c = copeland_scores(&p);
        let k = k as i64;
        assert_eq!(&c.strict[..4], &[k + 1, k + 1, k + 1, k + 2]);
        assert_eq!(&c.weak[..4], &[k + 3, k + 3, k + 2, k + 3]);
        assert_eq!(&c.net[..4], &[k, k, k - 1, k + 1]);
        for scores in [&c.strict, &c.weak, &c.net] {
            let winners = CopelandScores::winners(scores);
            assert!(!winners.contains(&2));
            assert_ne!(winners, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn self_play_agrees_with_simplex() {
        for p in [five_arm_matrix(), cycle3(), clone_matrix(5)] {
            let mw = solve_by_self_play(&p, 0.02, 10_000_000).unwrap();
            assert!(mw.certified_margin >= -0.02);
        }
        assert_eq!(solve_by_self_play(&cycle3(), 1e-6, 1_000), Err(Error::NonConvergence(1_000)));
    }

    fn any_matrix() -> impl Strategy<Value = PreferenceMatrix> {
        (1usize..9).prop_flat_map(|k| {
            proptest::collection::vec(-1.0f64..=1.0, k * k)
                .prop_map(move |e| PreferenceMatrix::from_upper(k, |a, b| e[a * k + b]))
        })
    }

    proptest! {
        #[test]
        fn solution_is_certified_and_plays_to_zero(p in any_matrix()) {
            let s = solve_von_neumann(&p, 1e-6).unwrap();
            prop_assert!(s.certified_margin >= -1e-6);
            let w = s.strategy.weights();
            prop_assert!(p.bilinear(w, w).abs() <= 1e-12);
            // max-min and min-max bracket the symmetric value 0.
            let lp = solve_matrix_game(p.as_slice(), p.k(), p.k(), 100_000).unwrap();
            prop_assert!(lp.value.abs() <= 1e-6);
        }

        #[test]
        fn condorcet_implies_point_mass(p in any_matrix()) {
            if let Some(a) = find_condorcet(&p) {
                let s = solve_von_neumann(&p, 1e-6).unwrap();
                prop_assert!(s.strategy.weights()[a] >= 1.0 - p.k() as f64 * 1e-6);
                let c = copeland_scores(&p);
                prop_assert!(CopelandScores::winners(&c.strict).contains(&a));
                prop_assert!(CopelandScores::winners(&c.weak).contains(&a));
                prop_assert!(CopelandScores::winners(&c.net).contains(&a));
            }
        }
    }
}
