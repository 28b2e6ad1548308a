//! Approximate maxmin solvers for the compact game `max_w min_u wᵀ B u` over
//! the policy hull: sparring follow-the-perturbed-leader and projected
//! gradient ascent with a Frank-Wolfe style approximate projection.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch::{vertex_marginals, BlockGame, ClassificationOracle};
use crate::error::{Error, Result};
use crate::mixture::{mixture_normalize, PolicyMixture};
use crate::policy::Policy;
use crate::rng::{stream, streams};

/// Output atoms lighter than this are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// Policies with accumulated weights, kept in first-seen order.
#[derive(Debug, Clone, Default)]
struct WeightedPolicies {
    index: HashMap<Policy, usize>,
    atoms: Vec<(f64, Policy)>,
}

impl WeightedPolicies {
    fn add(&mut self, weight: f64, policy: &Policy) {
        match self.index.get(policy) {
            Some(&i) => self.atoms[i].0 += weight,
            None => {
                self.index.insert(policy.clone(), self.atoms.len());
                self.atoms.push((weight, policy.clone()));
            }
        }
    }
}

/// A point of the policy hull: a convex combination of oracle-returned
/// vertices, with its per-context action marginals (row-major `C × K`), which
/// determine the point's `mK` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HullPoint {
    atoms: Vec<(f64, Policy)>,
    marginals: Vec<f64>,
    actions: usize,
}

impl HullPoint {
    pub fn vertex(policy: Policy, actions: usize) -> Self {
        let marginals = vertex_marginals(&policy, actions);
        HullPoint { atoms: vec![(1.0, policy)], marginals, actions }
    }

    /// Normalized combination of the given atoms; identical policies merge.
    pub fn from_weighted(atoms: impl IntoIterator<Item = (f64, Policy)>, actions: usize) -> Result<Self> {
        let mut acc = WeightedPolicies::default();
        for (w, p) in atoms {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::NegativeWeight(w));
            }
            if w > 0.0 {
                acc.add(w, &p);
            }
        }
        let total: f64 = acc.atoms.iter().map(|a| a.0).sum();
        let contexts = acc.atoms.first().map(|a| a.1.contexts()).ok_or(Error::EmptyMixture)?;
        let atoms: Vec<(f64, Policy)> = acc.atoms.into_iter().map(|(w, p)| (w / total, p)).collect();
        let mut marginals = vec![0.0; contexts * actions];
        for (w, p) in &atoms {
            for (x, &a) in p.actions().iter().enumerate() {
                marginals[x * actions + a] += w;
            }
        }
        Ok(HullPoint { atoms, marginals, actions })
    }

    pub fn atoms(&self) -> &[(f64, Policy)] {
        &self.atoms
    }

    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    /// The point as an `mK` vector: `Σ_j w_j v_{π_j}`.
    pub fn dense(&self, game: &BlockGame) -> Vec<f64> {
        game.dense_from_marginals(&self.marginals)
    }

    /// The point as a policy mixture, pruned at [`PRUNE_THRESHOLD`].
    pub fn to_mixture(&self) -> Result<PolicyMixture> {
        mixture_normalize(self.atoms.iter().filter(|a| a.0 >= PRUNE_THRESHOLD).map(|(w, p)| (*w, p.clone())))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Σ_{t<n} (1-ν)^t = (1 - (1-ν)^n) / ν`, or `n` when `ν = 0`.
fn geometric_sum(nu: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else if nu == 0.0 {
        n as f64
    } else {
        -(n as f64 * (-nu).ln_1p()).exp_m1() / nu
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub point: HullPoint,
    pub oracle_calls: usize,
    pub nu: f64,
    /// `z` coincided with `v1`; nothing was computed.
    pub degenerate: bool,
}

/// Approximately projects `z` onto the hull, starting from `v1`.
///
/// Runs `v_{t+1} = (1-ν) v_t + ν s_t` with `s_t` the oracle's minimizer of
/// `s · (v_t - z)` and `ν = min(‖z - v1‖/√N_in, 1)`, and returns the average of
/// `v_1..v_{N_in}`. For every `s` in the hull the result satisfies
/// `‖s - v̄‖² ≤ ‖s - z‖² + (8/√N_in) ‖v1 - z‖`.
pub fn approx_project(z: &[f64], v1: &HullPoint, n_in: usize, oracle: &dyn ClassificationOracle) -> Result<Projection> {
    if n_in == 0 {
        return Err(Error::BadParams("N_in must be at least 1".into()));
    }
    let game = oracle.game();
    let start = v1.dense(game);
    if start.len() != z.len() {
        return Err(Error::DimensionMismatch(format!("z has {} entries, the hull lives in {}", z.len(), start.len())));
    }
    let dist = norm(&start.iter().zip(z).map(|(a, b)| a - b).collect::<Vec<_>>());
    if dist == 0.0 {
        return Ok(Projection { point: v1.clone(), oracle_calls: 0, nu: 0.0, degenerate: true });
    }
    let nu = (dist / (n_in as f64).sqrt()).min(1.0);

    // Work in the oracle's sketch space: S(v_t - z) = S v_t - S z.
    let sz = oracle.sketch(z)?;
    let mut sv = oracle.sketch_point(v1.marginals());
    let mut cost = vec![0.0; sv.len()];
    let mut cache: HashMap<Policy, Vec<f64>> = HashMap::new();
    let mut picks = Vec::with_capacity(n_in);
    for _ in 0..n_in {
        for ((c, v), s) in cost.iter_mut().zip(&sv).zip(&sz) {
            *c = v - s;
        }
        let s = oracle.argmin_sketch(&cost);
        let vs = cache.entry(s.clone()).or_insert_with(|| oracle.vertex_sketch(&s));
        for (v, x) in sv.iter_mut().zip(vs.iter()) {
            *v = (1.0 - nu) * *v + nu * x;
        }
        picks.push(s);
    }

    // v̄ = (1/N) Σ_t v_t in closed form: v1 keeps G(N)/N, and s_j (1-indexed)
    // keeps (1 - (1-ν)^{N-j})/N. The last pick carries no weight.
    let n = n_in as f64;
    let mut atoms: Vec<(f64, Policy)> = Vec::with_capacity(v1.support_size() + n_in);
    let keep = geometric_sum(nu, n_in) / n;
    atoms.extend(v1.atoms().iter().map(|(w, p)| (w * keep, p.clone())));
    for (j, s) in picks.into_iter().enumerate() {
        let remaining = n_in - (j + 1);
        let w = nu * geometric_sum(nu, remaining) / n;
        atoms.push((w, s));
    }
    let point = HullPoint::from_weighted(atoms, game.actions())?;
    Ok(Projection { point, oracle_calls: n_in, nu, degenerate: false })
}

/// Parameters and bookkeeping of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub algorithm: String,
    /// The payoff bound `L` the step sizes were derived from.
    pub l: f64,
    pub rounds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_rounds: Option<usize>,
    pub oracle_calls: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Largest and smallest projection step sizes seen.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_range: Option<(f64, f64)>,
    /// Guaranteed suboptimality on `M̂` implied by the parameters, when it
    /// does not depend on a confidence level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guarantee: Option<f64>,
    pub support_size: usize,
}

#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub wbar: HullPoint,
    pub report: SolverReport,
}

impl SolverOutput {
    pub fn mixture(&self) -> Result<PolicyMixture> {
        self.wbar.to_mixture()
    }
}

/// `α = sqrt(2 / (L² N))`.
pub fn fpl_alpha(l: f64, n: usize) -> f64 {
    (2.0 / (l * l * n as f64)).sqrt()
}

/// `γ = 2L sqrt(2m/N) + 2L sqrt(2 ln(2/δ)/N)`; the perturbed-leader average is
/// `2γ`-optimal with probability `1 - δ`.
pub fn fpl_gamma(l: f64, m: usize, n: usize, delta: f64) -> f64 {
    let n = n as f64;
    2.0 * l * (2.0 * m as f64 / n).sqrt() + 2.0 * l * (2.0 * (2.0 / delta).ln() / n).sqrt()
}

/// Smallest `N` with `2γ ≤ ε`.
pub fn fpl_rounds(l: f64, m: usize, eps: f64, delta: f64) -> f64 {
    let root = 4.0 * l * ((2.0 * m as f64).sqrt() + (2.0 * (2.0 / delta).ln()).sqrt()) / eps;
    (root * root).ceil()
}

/// `η = 2 / (L sqrt(N_out))`.
pub fn pgd_eta(l: f64, n_out: usize) -> f64 {
    2.0 / (l * (n_out as f64).sqrt())
}

/// `ε = 2L/sqrt(N_out) + L α / 2` with `α = 8/sqrt(N_in)`.
pub fn pgd_guarantee(l: f64, n_out: usize, n_in: usize) -> f64 {
    2.0 * l / (n_out as f64).sqrt() + l * (8.0 / (n_in as f64).sqrt()) / 2.0
}

/// `N_in = N_out = ⌈36 L² / ε²⌉`, which makes [`pgd_guarantee`] at most `ε`.
pub fn pgd_rounds(l: f64, eps: f64) -> f64 {
    (36.0 * l * l / (eps * eps)).ceil()
}

fn check_rounds(rounds: f64, what: &str, cap: usize) -> Result<usize> {
    if !(rounds.is_finite() && rounds >= 1.0 && rounds <= cap as f64) {
        return Err(Error::BadParams(format!("{what} = {rounds} is outside [1, {cap}]")));
    }
    Ok(rounds as usize)
}

/// Rounds needed by a sizing rule, checked against `cap`.
pub fn sized_rounds(rounds: f64, cap: usize) -> Result<usize> {
    check_rounds(rounds, "rounds", cap)
}

/// Sparring follow-the-perturbed-leader over `n` rounds. Perturbations come
/// from the solver stream of `seed`.
pub fn sparring_fpl(
    game: &BlockGame,
    oracle: &dyn ClassificationOracle,
    n: usize,
    l: f64,
    seed: u64,
) -> Result<SolverOutput> {
    if n == 0 || !(l > 0.0 && l.is_finite()) {
        return Err(Error::BadParams("FPL needs N >= 1 and L > 0".into()));
    }
    let alpha = fpl_alpha(l, n);
    let spread = 1.0 / alpha;
    let mut rng = stream(seed, streams::SOLVER);
    let k = game.actions();
    let m = game.m();
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();
    let contexts = game.contexts();
    // Per-context action counts of Σ w_s and Σ u_s so far.
    let mut w_counts = vec![0.0; contexts * k];
    let mut u_counts = vec![0.0; contexts * k];
    let blocks: Vec<(usize, usize, usize, f64)> = (0..m).map(|i| game.block(i)).collect();
    let mut cost_w = vec![0.0; game.dim()];
    let mut cost_u = vec![0.0; game.dim()];
    let mut wbar = WeightedPolicies::default();
    for _ in 0..n {
        cost_w.iter_mut().for_each(|c| *c = rng.gen::<f64>() * spread);
        cost_u.iter_mut().for_each(|c| *c = rng.gen::<f64>() * spread);
        for (i, &(x, a, b, value)) in blocks.iter().enumerate() {
            // -B U at (i, a_i) and Bᵀ W at (i, b_i).
            cost_w[i * k + a] -= value * u_counts[x * k + b] * inv_sqrt_m;
            cost_u[i * k + b] += value * w_counts[x * k + a] * inv_sqrt_m;
        }
        let w = oracle.argmin(&cost_w)?;
        let u = oracle.argmin(&cost_u)?;
        for (x, &a) in w.actions().iter().enumerate() {
            w_counts[x * k + a] += 1.0;
        }
        for (x, &b) in u.actions().iter().enumerate() {
            u_counts[x * k + b] += 1.0;
        }
        wbar.add(1.0, &w);
    }
    let wbar = HullPoint::from_weighted(wbar.atoms, k)?;
    let report = SolverReport {
        algorithm: "sparring_fpl".into(),
        l,
        rounds: n,
        inner_rounds: None,
        oracle_calls: 2 * n,
        alpha: Some(alpha),
        eta: None,
        nu_range: None,
        guarantee: None,
        support_size: wbar.support_size(),
    };
    Ok(SolverOutput { wbar, report })
}

/// Projected gradient ascent for the row player with approximate projections.
/// `w_1` is the oracle's answer to the zero cost. Uses `N_out (1 + N_in) + 1`
/// oracle calls unless a projection is degenerate (`z = w_t`), which costs none.
pub fn projected_gd(
    game: &BlockGame,
    oracle: &dyn ClassificationOracle,
    n_out: usize,
    n_in: usize,
    l: f64,
) -> Result<SolverOutput> {
    if n_out == 0 || n_in == 0 || !(l > 0.0 && l.is_finite()) {
        return Err(Error::BadParams("projected GD needs N_out, N_in >= 1 and L > 0".into()));
    }
    let eta = pgd_eta(l, n_out);
    let k = game.actions();
    let first = oracle.argmin_sketch(&vec![0.0; oracle.sketch_len()]);
    let mut calls = 1;
    let mut w = HullPoint::vertex(first, k);
    let mut sum = WeightedPolicies::default();
    let mut nu_range: Option<(f64, f64)> = None;
    for _ in 0..n_out {
        for (wt, p) in w.atoms() {
            sum.add(*wt, p);
        }
        let wd = w.dense(game);
        let u = oracle.argmin(&game.apply_transpose(&wd)?)?;
        calls += 1;
        let bu = game.apply(&game.policy_vector(&u))?;
        let z: Vec<f64> = wd.iter().zip(&bu).map(|(a, b)| a + eta * b).collect();
        let proj = approx_project(&z, &w, n_in, oracle)?;
        calls += proj.oracle_calls;
        if !proj.degenerate {
            nu_range = Some(match nu_range {
                None => (proj.nu, proj.nu),
                Some((hi, lo)) => (hi.max(proj.nu), lo.min(proj.nu)),
            });
        }
        w = proj.point;
    }
    let wbar = HullPoint::from_weighted(sum.atoms, k)?;
    let report = SolverReport {
        algorithm: "projected_gd".into(),
        l,
        rounds: n_out,
        inner_rounds: Some(n_in),
        oracle_calls: calls,
        alpha: Some(8.0 / (n_in as f64).sqrt()),
        eta: Some(eta),
        nu_range,
        guarantee: Some(pgd_guarantee(l, n_out, n_in)),
        support_size: wbar.support_size(),
    };
    Ok(SolverOutput { wbar, report })
}
