//! Uniform exploration, unbiased per-round estimator blocks, the block-diagonal
//! game `B` over policy vectors, and cost-sensitive classification oracles.
//!
//! A policy vector `v_π ∈ R^{mK}` has entry `1/√m` at `(i, π(x_i))` and zero
//! elsewhere, so `v_πᵀ B v_ρ = M̂(π, ρ)`. Every point of the policy hull is
//! determined by its per-context action marginals, which is what the oracles
//! and solvers work with instead of dense `mK` vectors where possible.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::ContextualEnvironment;
use crate::error::{Error, Result};
use crate::game::solve_matrix_game;
use crate::policy::{Policy, PolicyClass};
use crate::rng::{stream, streams};
use crate::simplex::argmin;

/// One exploration round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuelRecord {
    pub i: usize,
    pub context: usize,
    pub a: usize,
    pub b: usize,
    pub r: i8,
}

/// `m` exploration rounds with the estimator bounds `L ≥ |P̂_i(a,b)|` and
/// `V ≥ Var P̂_i(a,b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationLog {
    contexts: usize,
    actions: usize,
    records: Vec<DuelRecord>,
    l: f64,
    v: f64,
}

impl ExplorationLog {
    /// A log produced by uniform exploration over ordered pairs (`L = V = K²`).
    pub fn uniform(contexts: usize, actions: usize, records: Vec<DuelRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::BadParams("an exploration log needs at least one record".into()));
        }
        if contexts == 0 || actions == 0 {
            return Err(Error::BadParams("log needs at least one context and one action".into()));
        }
        for (i, rec) in records.iter().enumerate() {
            if rec.i != i {
                return Err(Error::Parse(format!("record {i} carries index {}", rec.i)));
            }
            if rec.context >= contexts {
                return Err(Error::ContextOutOfRange { context: rec.context, contexts });
            }
            for action in [rec.a, rec.b] {
                if action >= actions {
                    return Err(Error::ActionOutOfRange { action, actions });
                }
            }
            if rec.r != 1 && rec.r != -1 {
                return Err(Error::Parse(format!("record {i} has outcome {}", rec.r)));
            }
        }
        let k2 = (actions * actions) as f64;
        Ok(ExplorationLog { contexts, actions, records, l: k2, v: k2 })
    }

    pub fn m(&self) -> usize {
        self.records.len()
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn records(&self) -> &[DuelRecord] {
        &self.records
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// `ε′ = 2(1+L) ln(|Π|²/δ)/(3m) + sqrt(2V ln(|Π|²/δ)/m)`.
    pub fn concentration_radius(&self, ln_class_size: f64, delta: f64) -> f64 {
        let m = self.m() as f64;
        let log_term = 2.0 * ln_class_size - delta.ln();
        2.0 * (1.0 + self.l) * log_term / (3.0 * m) + (2.0 * self.v * log_term / m).sqrt()
    }
}

/// Explores for `m` rounds with every ordered pair, self-pairs included, drawn
/// uniformly. Contexts and outcomes use the nature stream of `seed`; pairs use
/// the learner stream.
pub fn explore_uniform(env: &ContextualEnvironment, m: usize, seed: u64) -> Result<ExplorationLog> {
    let mut nature = stream(seed, streams::NATURE);
    let mut learner = stream(seed, streams::LEARNER);
    explore_uniform_with(env, m, &mut nature, &mut learner)
}

/// [`explore_uniform`] drawing from caller-owned generators, so a run can
/// continue with the same streams after exploring.
pub fn explore_uniform_with<N: Rng + ?Sized, L: Rng + ?Sized>(
    env: &ContextualEnvironment,
    m: usize,
    nature: &mut N,
    learner: &mut L,
) -> Result<ExplorationLog> {
    if m == 0 {
        return Err(Error::BadParams("m must be at least 1".into()));
    }
    let k = env.k();
    let records = (0..m)
        .map(|i| {
            let context = env.sample_round(nature);
            let a = learner.gen_range(0..k);
            let b = learner.gen_range(0..k);
            let r = env.duel(context, a, b, nature);
            DuelRecord { i, context, a, b, r }
        })
        .collect();
    ExplorationLog::uniform(env.num_contexts(), k, records)
}

/// The block-diagonal matrix `B`. Block `i` has the single entry
/// `P̂_i(a_i, b_i) = K² r_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGame {
    contexts: usize,
    actions: usize,
    round_context: Vec<usize>,
    a: Vec<usize>,
    b: Vec<usize>,
    value: Vec<f64>,
    context_counts: Vec<usize>,
    l: f64,
}

pub fn estimator_blocks(log: &ExplorationLog) -> BlockGame {
    let k2 = (log.actions * log.actions) as f64;
    let mut context_counts = vec![0; log.contexts];
    for r in &log.records {
        context_counts[r.context] += 1;
    }
    BlockGame {
        contexts: log.contexts,
        actions: log.actions,
        round_context: log.records.iter().map(|r| r.context).collect(),
        a: log.records.iter().map(|r| r.a).collect(),
        b: log.records.iter().map(|r| r.b).collect(),
        value: log.records.iter().map(|r| k2 * r.r as f64).collect(),
        context_counts,
        l: log.l,
    }
}

impl BlockGame {
    pub fn m(&self) -> usize {
        self.value.len()
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    /// Length `mK` of cost and policy vectors.
    pub fn dim(&self) -> usize {
        self.m() * self.actions
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn round_context(&self, i: usize) -> usize {
        self.round_context[i]
    }

    /// Number of rounds observed in each context.
    pub fn context_counts(&self) -> &[usize] {
        &self.context_counts
    }

    /// Entry `(a, b)` of block `i`.
    pub fn block_entry(&self, i: usize, a: usize, b: usize) -> f64 {
        if a == self.a[i] && b == self.b[i] {
            self.value[i]
        } else {
            0.0
        }
    }

    /// `(x_i, a_i, b_i, P̂_i(a_i, b_i))`.
    pub fn block(&self, i: usize) -> (usize, usize, usize, f64) {
        (self.round_context[i], self.a[i], self.b[i], self.value[i])
    }

    /// A copy with every outcome replaced by zero.
    pub fn zeroed(&self) -> Self {
        BlockGame { value: vec![0.0; self.m()], ..self.clone() }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("vector has {} entries, B acts on {}", v.len(), self.dim())));
        }
        Ok(())
    }

    /// `B u`, one multiply per block.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u)?;
        let k = self.actions;
        let mut out = vec![0.0; self.dim()];
        for i in 0..self.m() {
            out[i * k + self.a[i]] = self.value[i] * u[i * k + self.b[i]];
        }
        Ok(out)
    }

    /// `Bᵀ w`.
    pub fn apply_transpose(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(w)?;
        let k = self.actions;
        let mut out = vec![0.0; self.dim()];
        for i in 0..self.m() {
            out[i * k + self.b[i]] = self.value[i] * w[i * k + self.a[i]];
        }
        Ok(out)
    }

    /// `wᵀ B u`.
    pub fn bilinear(&self, w: &[f64], u: &[f64]) -> Result<f64> {
        self.check_dim(w)?;
        self.check_dim(u)?;
        let k = self.actions;
        Ok((0..self.m()).map(|i| w[i * k + self.a[i]] * self.value[i] * u[i * k + self.b[i]]).sum())
    }

    /// `v_π`, dense.
    pub fn policy_vector(&self, policy: &Policy) -> Vec<f64> {
        let k = self.actions;
        let scale = 1.0 / (self.m() as f64).sqrt();
        let mut v = vec![0.0; self.dim()];
        for (i, &x) in self.round_context.iter().enumerate() {
            v[i * k + policy.act(x)] = scale;
        }
        v
    }

    /// The dense hull point whose per-context action marginals are `marginals`
    /// (row-major `C × K`): entry `(i, a)` is `marginals[x_i][a] / √m`.
    pub fn dense_from_marginals(&self, marginals: &[f64]) -> Vec<f64> {
        let k = self.actions;
        let scale = 1.0 / (self.m() as f64).sqrt();
        let mut v = vec![0.0; self.dim()];
        for (i, &x) in self.round_context.iter().enumerate() {
            for a in 0..k {
                v[i * k + a] = marginals[x * k + a] * scale;
            }
        }
        v
    }

    /// The per-context `K × K` sums `G_s(a, b) = (1/m) Σ_{i: x_i = s} P̂_i(a, b)`,
    /// so that `M̂(π, ρ) = Σ_s G_s(π(s), ρ(s))`.
    pub fn context_games(&self) -> Vec<f64> {
        let k = self.actions;
        let m = self.m() as f64;
        let mut g = vec![0.0; self.contexts * k * k];
        for i in 0..self.m() {
            g[self.round_context[i] * k * k + self.a[i] * k + self.b[i]] += self.value[i] / m;
        }
        g
    }

    /// `W M̂ U` for mixtures given by their per-context marginals.
    pub fn marginal_payoff(&self, w: &[f64], u: &[f64]) -> f64 {
        let k = self.actions;
        let m = self.m() as f64;
        (0..self.m())
            .map(|i| {
                let x = self.round_context[i];
                w[x * k + self.a[i]] * self.value[i] * u[x * k + self.b[i]] / m
            })
            .sum()
    }
}

/// `M̂(π, ρ) = (1/m) Σ_i P̂_i(π(x_i), ρ(x_i))`, evaluated straight from the log.
pub fn mhat_entry(log: &ExplorationLog, pi: &Policy, rho: &Policy) -> f64 {
    let k2 = (log.actions * log.actions) as f64;
    let hits: f64 = log
        .records
        .iter()
        .filter(|r| pi.act(r.context) == r.a && rho.act(r.context) == r.b)
        .map(|r| k2 * r.r as f64)
        .sum();
    hits / log.m() as f64
}

/// Per-context action marginals of a point mass on `policy`, row-major `C × K`.
pub fn vertex_marginals(policy: &Policy, actions: usize) -> Vec<f64> {
    let mut m = vec![0.0; policy.contexts() * actions];
    for (x, &a) in policy.actions().iter().enumerate() {
        m[x * actions + a] = 1.0;
    }
    m
}

/// Exact minimization of a linear cost over the policy hull.
///
/// Costs are handled through a linear sketch `S c` small enough to update
/// cheaply inside solver loops; `sketch_cost(S c, π) = c · v_π` for every
/// policy in the class.
pub trait ClassificationOracle {
    fn game(&self) -> &BlockGame;

    fn sketch_len(&self) -> usize;

    /// `S c` for a dense cost vector of length `mK`.
    fn sketch(&self, cost: &[f64]) -> Result<Vec<f64>>;

    /// `S v` for the hull point with per-context marginals `marginals`.
    fn sketch_point(&self, marginals: &[f64]) -> Vec<f64>;

    /// The policy minimizing `c · v_π` given `S c`.
    fn argmin_sketch(&self, sketch: &[f64]) -> Policy;

    fn argmin(&self, cost: &[f64]) -> Result<Policy> {
        Ok(self.argmin_sketch(&self.sketch(cost)?))
    }

    fn vertex_sketch(&self, policy: &Policy) -> Vec<f64> {
        self.sketch_point(&vertex_marginals(policy, self.game().actions()))
    }
}

/// `c · v_π` evaluated directly.
pub fn policy_cost(game: &BlockGame, cost: &[f64], policy: &Policy) -> f64 {
    let k = game.actions();
    let scale = 1.0 / (game.m() as f64).sqrt();
    (0..game.m()).map(|i| cost[i * k + policy.act(game.round_context(i))] * scale).sum()
}

/// Scans an explicit policy list. Ties go to the lowest index.
#[derive(Debug, Clone)]
pub struct EnumerationOracle<'a> {
    game: &'a BlockGame,
    policies: Vec<Policy>,
}

impl<'a> EnumerationOracle<'a> {
    pub fn new(game: &'a BlockGame, class: &PolicyClass, cap: usize) -> Result<Self> {
        if class.contexts() != game.contexts() || class.actions() != game.actions() {
            return Err(Error::DimensionMismatch("class does not match the log".into()));
        }
        Ok(EnumerationOracle { game, policies: class.enumerate(cap)? })
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }
}

impl ClassificationOracle for EnumerationOracle<'_> {
    fn game(&self) -> &BlockGame {
        self.game
    }

    fn sketch_len(&self) -> usize {
        self.policies.len()
    }

    fn sketch(&self, cost: &[f64]) -> Result<Vec<f64>> {
        self.game.check_dim(cost)?;
        Ok(self.policies.iter().map(|p| policy_cost(self.game, cost, p)).collect())
    }

    fn sketch_point(&self, marginals: &[f64]) -> Vec<f64> {
        let k = self.game.actions();
        let m = self.game.m() as f64;
        let counts = self.game.context_counts();
        self.policies
            .iter()
            .map(|p| {
                p.actions().iter().enumerate().map(|(x, &a)| counts[x] as f64 * marginals[x * k + a]).sum::<f64>() / m
            })
            .collect()
    }

    fn argmin_sketch(&self, sketch: &[f64]) -> Policy {
        self.policies[argmin(sketch)].clone()
    }
}

/// Exact oracle for full-mapping classes: the cost separates by context, so
/// each context independently takes its cheapest action (lowest on ties).
#[derive(Debug, Clone)]
pub struct FactoredOracle<'a> {
    game: &'a BlockGame,
}

impl<'a> FactoredOracle<'a> {
    pub fn new(game: &'a BlockGame) -> Self {
        FactoredOracle { game }
    }
}

impl ClassificationOracle for FactoredOracle<'_> {
    fn game(&self) -> &BlockGame {
        self.game
    }

    fn sketch_len(&self) -> usize {
        self.game.contexts() * self.game.actions()
    }

    /// `S c [s, a] = Σ_{i: x_i = s} c[i, a] / √m`.
    fn sketch(&self, cost: &[f64]) -> Result<Vec<f64>> {
        self.game.check_dim(cost)?;
        let k = self.game.actions();
        let scale = 1.0 / (self.game.m() as f64).sqrt();
        let mut s = vec![0.0; self.sketch_len()];
        for i in 0..self.game.m() {
            let x = self.game.round_context(i);
            for a in 0..k {
                s[x * k + a] += cost[i * k + a] * scale;
            }
        }
        Ok(s)
    }

    fn sketch_point(&self, marginals: &[f64]) -> Vec<f64> {
        let k = self.game.actions();
        let m = self.game.m() as f64;
        let counts = self.game.context_counts();
        marginals.iter().enumerate().map(|(j, &p)| counts[j / k] as f64 * p / m).collect()
    }

    fn argmin_sketch(&self, sketch: &[f64]) -> Policy {
        Policy::new(sketch.chunks(self.game.actions()).map(argmin).collect())
    }
}

/// Picks the factored oracle for full mappings and enumeration otherwise.
pub fn make_oracle<'a>(
    game: &'a BlockGame,
    class: &PolicyClass,
    cap: usize,
) -> Result<Box<dyn ClassificationOracle + 'a>> {
    if class.contexts() != game.contexts() || class.actions() != game.actions() {
        return Err(Error::DimensionMismatch("class does not match the log".into()));
    }
    Ok(match class {
        PolicyClass::FullMapping { .. } => Box::new(FactoredOracle::new(game)),
        PolicyClass::Tabular { .. } => Box::new(EnumerationOracle::new(game, class, cap)?),
    })
}

/// `max |M̂(π, ρ)|` over all vertex pairs of the hull: the payoff scale of the
/// compact game actually played, as opposed to the a priori bound `L = K²`.
pub fn empirical_payoff_bound(game: &BlockGame, class: &PolicyClass, cap: usize) -> Result<f64> {
    let k = game.actions();
    let g = game.context_games();
    match class {
        PolicyClass::FullMapping { .. } => {
            let (mut hi, mut lo) = (0.0, 0.0);
            for block in g.chunks(k * k) {
                hi += block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                lo += block.iter().copied().fold(f64::INFINITY, f64::min);
            }
            Ok(f64::max(hi, -lo))
        }
        PolicyClass::Tabular { .. } => {
            let policies = class.enumerate(cap)?;
            let mut best: f64 = 0.0;
            for pi in &policies {
                for rho in &policies {
                    let v: f64 = (0..game.contexts()).map(|s| g[s * k * k + pi.act(s) * k + rho.act(s)]).sum();
                    best = best.max(v.abs());
                }
            }
            Ok(best)
        }
    }
}

/// `min_ρ W M̂ e_ρ` over the class, for a mixture given by its marginals.
pub fn empirical_margin(game: &BlockGame, class: &PolicyClass, marginals: &[f64], cap: usize) -> Result<f64> {
    let k = game.actions();
    let m = game.m() as f64;
    // h[s][b] = (1/m) Σ_{i: x_i = s, b_i = b} P̂_i(a_i, b) W_s(a_i)
    let mut h = vec![0.0; game.contexts() * k];
    for i in 0..game.m() {
        let x = game.round_context[i];
        h[x * k + game.b[i]] += game.value[i] * marginals[x * k + game.a[i]] / m;
    }
    match class {
        PolicyClass::FullMapping { .. } => {
            Ok(h.chunks(k).map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).sum())
        }
        PolicyClass::Tabular { .. } => Ok(class
            .enumerate(cap)?
            .iter()
            .map(|rho| (0..game.contexts()).map(|s| h[s * k + rho.act(s)]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)),
    }
}

/// `max_W min_U W M̂ U` over mixtures of an enumerable class, solved exactly.
pub fn empirical_game_value(game: &BlockGame, class: &PolicyClass, cap: usize) -> Result<f64> {
    let policies = class.enumerate(cap)?;
    let n = policies.len();
    let k = game.actions();
    let g = game.context_games();
    let mut payoff = vec![0.0; n * n];
    for (i, pi) in policies.iter().enumerate() {
        for (j, rho) in policies.iter().enumerate() {
            payoff[i * n + j] = (0..game.contexts()).map(|s| g[s * k * k + pi.act(s) * k + rho.act(s)]).sum();
        }
    }
    Ok(solve_matrix_game(&payoff, n, n, 1_000_000)?.value)
}
