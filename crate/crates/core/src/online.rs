//! Exp4.P with policy advice, two copies sparring against each other, and the
//! online-to-batch average of the row copy's policy distributions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ContextualEnvironment, PlayedRound, RegretTracker};
use crate::error::{Error, Result};
use crate::mixture::{mixture_normalize, PolicyMixture, ProductMixture};
use crate::policy::{Policy, PolicyClass};
use crate::rng::{stream, streams, StreamRng};
use crate::simplex::{sample_index, SimplexDistribution};

/// The experts an Exp4.P instance takes advice from.
#[derive(Debug, Clone, PartialEq)]
pub enum Experts {
    /// An explicit list. Copies of one policy split that policy's prior mass, so
    /// duplicating an expert changes nothing observable.
    List { contexts: usize, actions: usize, policies: Vec<Policy> },
    /// All `actions^contexts` maps, weighted through per-context tables.
    Product { contexts: usize, actions: usize },
}

impl Experts {
    pub fn contexts(&self) -> usize {
        match self {
            Experts::List { contexts, .. } | Experts::Product { contexts, .. } => *contexts,
        }
    }

    pub fn actions(&self) -> usize {
        match self {
            Experts::List { actions, .. } | Experts::Product { actions, .. } => *actions,
        }
    }

    /// `ln N` for `N` experts.
    pub fn ln_count(&self) -> f64 {
        match self {
            Experts::List { policies, .. } => (distinct(policies) as f64).ln(),
            Experts::Product { contexts, actions } => *contexts as f64 * (*actions as f64).ln(),
        }
    }
}

fn distinct(policies: &[Policy]) -> usize {
    policies.iter().collect::<std::collections::BTreeSet<_>>().len()
}

fn multiplicities(policies: &[Policy]) -> Vec<usize> {
    let mut counts = std::collections::BTreeMap::new();
    for p in policies {
        *counts.entry(p).or_insert(0usize) += 1;
    }
    policies.iter().map(|p| counts[p]).collect()
}

impl From<&PolicyClass> for Experts {
    fn from(class: &PolicyClass) -> Self {
        match class {
            PolicyClass::Tabular { contexts, actions, policies } => {
                Experts::List { contexts: *contexts, actions: *actions, policies: policies.clone() }
            }
            PolicyClass::FullMapping { contexts, actions } => {
                Experts::Product { contexts: *contexts, actions: *actions }
            }
        }
    }
}

/// A distribution over experts at one round.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyDistribution {
    /// One probability per listed expert.
    List(Vec<f64>),
    /// Independent per-context action tables.
    Product(Vec<SimplexDistribution>),
}

/// Exp4.P state. Weights live in log space and are re-centered after every
/// update.
#[derive(Debug, Clone)]
pub struct Exp4P {
    experts: Experts,
    log_weights: Vec<f64>,
    p_min: f64,
    p_min_capped: bool,
    bonus: f64,
    horizon: usize,
    round: usize,
    pending: Option<(usize, Vec<f64>)>,
}

impl Exp4P {
    /// `p_min = sqrt(ln N / (K T))`, capped at `1/K` when `T < K ln N` (see
    /// [`Exp4P::p_min_capped`]).
    pub fn new(experts: Experts, horizon: usize, delta: f64) -> Result<Self> {
        let k = experts.actions();
        if horizon == 0 || k == 0 || experts.contexts() == 0 {
            return Err(Error::BadParams("Exp4.P needs T >= 1 and a non-empty expert set".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::BadParams(format!("delta must be in (0, 1), got {delta}")));
        }
        let size = match &experts {
            Experts::List { policies, contexts, .. } => {
                if policies.is_empty() {
                    return Err(Error::BadParams("Exp4.P needs at least one expert".into()));
                }
                for p in policies {
                    p.check(*contexts, k)?;
                }
                policies.len()
            }
            Experts::Product { contexts, .. } => contexts * k,
        };
        let ln_n = experts.ln_count();
        let kt = k as f64 * horizon as f64;
        let raw = (ln_n / kt).sqrt();
        let p_min = raw.min(1.0 / k as f64);
        let bonus = ((ln_n - delta.ln()) / kt).sqrt();
        let log_weights = match &experts {
            Experts::List { policies, .. } => multiplicities(policies).iter().map(|&c| -(c as f64).ln()).collect(),
            Experts::Product { .. } => vec![0.0; size],
        };
        Ok(Exp4P { experts, log_weights, p_min, p_min_capped: raw > p_min, bonus, horizon, round: 0, pending: None })
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    /// True when the horizon is too short for the nominal `p_min`, so play is
    /// uniform and the regret guarantee does not apply.
    pub fn p_min_capped(&self) -> bool {
        self.p_min_capped
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn experts(&self) -> &Experts {
        &self.experts
    }

    /// Normalized expert weights.
    pub fn policy_distribution(&self) -> PolicyDistribution {
        match &self.experts {
            Experts::List { .. } => PolicyDistribution::List(softmax(&self.log_weights)),
            Experts::Product { actions, .. } => PolicyDistribution::Product(
                self.log_weights
                    .chunks(*actions)
                    .map(|row| SimplexDistribution::normalized(softmax(row)).expect("softmax is positive"))
                    .collect(),
            ),
        }
    }

    /// Aggregated advice `Σ_π w(π) 1{π(x) = a} / Σ_π w(π)`.
    fn advice(&self, context: usize) -> Vec<f64> {
        match &self.experts {
            Experts::List { actions, policies, .. } => {
                let w = softmax(&self.log_weights);
                let mut q = vec![0.0; *actions];
                for (p, wi) in policies.iter().zip(&w) {
                    q[p.act(context)] += wi;
                }
                q
            }
            Experts::Product { actions, .. } => softmax(&self.log_weights[context * actions..(context + 1) * actions]),
        }
    }

    /// Action distribution for `context`: `(1 - K p_min) q + p_min`.
    pub fn distribution(&self, context: usize) -> Result<Vec<f64>> {
        if context >= self.experts.contexts() {
            return Err(Error::ContextOutOfRange { context, contexts: self.experts.contexts() });
        }
        let k = self.experts.actions() as f64;
        Ok(self.advice(context).into_iter().map(|q| (1.0 - k * self.p_min) * q + self.p_min).collect())
    }

    /// Samples an action and remembers the distribution for the next update.
    pub fn act<R: Rng + ?Sized>(&mut self, context: usize, rng: &mut R) -> Result<(usize, Vec<f64>)> {
        if self.round >= self.horizon {
            return Err(Error::HorizonExceeded(self.horizon));
        }
        let p = self.distribution(context)?;
        let a = sample_index(&p, rng);
        self.pending = Some((context, p.clone()));
        Ok((a, p))
    }

    /// Importance-weighted update with reward `r01 ∈ [0, 1]` for `action`.
    pub fn update(&mut self, context: usize, action: usize, r01: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&r01) {
            return Err(Error::BadParams(format!("reward {r01} is outside [0, 1]")));
        }
        let p = match self.pending.take() {
            Some((x, p)) if x == context => p,
            _ => self.distribution(context)?,
        };
        let k = self.experts.actions();
        if action >= k {
            return Err(Error::ActionOutOfRange { action, actions: k });
        }
        // Allow for rounding in the mixing formula.
        if p[action] < self.p_min * (1.0 - 1e-12) {
            return Err(Error::ProbabilityUnderflow { p: p[action], p_min: self.p_min });
        }
        let r_hat = r01 / p[action];
        // Log-weight increment of any expert recommending `a`.
        let gain = |a: usize| {
            let y = if a == action { r_hat } else { 0.0 };
            0.5 * self.p_min * (y + self.bonus / p[a])
        };
        let gains: Vec<f64> = (0..k).map(gain).collect();
        match &self.experts {
            Experts::List { policies, .. } => {
                for (lw, pi) in self.log_weights.iter_mut().zip(policies) {
                    *lw += gains[pi.act(context)];
                }
                recenter(&mut self.log_weights);
            }
            Experts::Product { .. } => {
                let row = &mut self.log_weights[context * k..(context + 1) * k];
                row.iter_mut().zip(&gains).for_each(|(lw, g)| *lw += g);
                recenter(row);
            }
        }
        self.round += 1;
        Ok(())
    }
}

fn recenter(log_weights: &mut [f64]) {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    log_weights.iter_mut().for_each(|lw| *lw -= max);
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// Result of online-to-batch averaging.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnedMixture {
    Atoms(PolicyMixture),
    Product(ProductMixture),
}

impl LearnedMixture {
    /// Per-context action marginals.
    pub fn marginals(&self, contexts: usize, actions: usize) -> Vec<SimplexDistribution> {
        match self {
            LearnedMixture::Atoms(m) => m.marginals(contexts, actions),
            LearnedMixture::Product(p) => p.tables().to_vec(),
        }
    }

    /// An explicit atom list; product mixtures are expanded under `cap`.
    pub fn to_atoms(&self, cap: usize) -> Result<PolicyMixture> {
        match self {
            LearnedMixture::Atoms(m) => Ok(m.clone()),
            LearnedMixture::Product(p) => p.expand(cap),
        }
    }
}

/// Running average of per-round policy distributions.
#[derive(Debug, Clone)]
pub struct OnlineToBatch {
    experts: Experts,
    sums: Vec<f64>,
    rounds: usize,
}

impl OnlineToBatch {
    pub fn new(experts: Experts) -> Self {
        let size = match &experts {
            Experts::List { policies, .. } => policies.len(),
            Experts::Product { contexts, actions } => contexts * actions,
        };
        OnlineToBatch { experts, sums: vec![0.0; size], rounds: 0 }
    }

    pub fn push(&mut self, dist: &PolicyDistribution) -> Result<()> {
        let values: Vec<f64> = match dist {
            PolicyDistribution::List(w) => w.clone(),
            PolicyDistribution::Product(tables) => tables.iter().flat_map(|t| t.weights().to_vec()).collect(),
        };
        let shape_ok = matches!(
            (&self.experts, dist),
            (Experts::List { .. }, PolicyDistribution::List(_))
                | (Experts::Product { .. }, PolicyDistribution::Product(_))
        );
        if !shape_ok || values.len() != self.sums.len() {
            return Err(Error::DimensionMismatch("policy distribution does not match the experts".into()));
        }
        self.sums.iter_mut().zip(&values).for_each(|(s, v)| *s += v);
        self.rounds += 1;
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn finish(&self) -> Result<LearnedMixture> {
        if self.rounds == 0 {
            return Err(Error::EmptyMixture);
        }
        match &self.experts {
            Experts::List { policies, .. } => {
                Ok(LearnedMixture::Atoms(mixture_normalize(self.sums.iter().copied().zip(policies.iter().cloned()))?))
            }
            Experts::Product { actions, .. } => Ok(LearnedMixture::Product(ProductMixture::new(
                self.sums
                    .chunks(*actions)
                    .map(|row| SimplexDistribution::normalized(row.to_vec()))
                    .collect::<Result<_>>()?,
            )?)),
        }
    }
}

/// `(1/m) Σ_i w_i` over a recorded history.
pub fn online_to_batch(experts: &Experts, history: &[PolicyDistribution]) -> Result<LearnedMixture> {
    let mut avg = OnlineToBatch::new(experts.clone());
    for d in history {
        avg.push(d)?;
    }
    avg.finish()
}

/// One sparring round. In analysis mode the hypothetical rewards
/// `R_t(a, b_t)` (row) and `-R_t(a_t, b)` (column) are attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparringRound {
    pub round: usize,
    pub context: usize,
    pub a: usize,
    pub b: usize,
    pub r: i8,
    pub cumulative_regret: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row_rewards: Option<Vec<i8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub col_rewards: Option<Vec<i8>>,
}

#[derive(Debug, Clone, Default)]
pub struct SparringOptions {
    /// Materialize the hypothetical duel row and column each round.
    pub analysis: bool,
    /// Keep every round's policy distribution of the row copy.
    pub keep_history: bool,
}

#[derive(Debug, Clone)]
pub struct SparringOutput {
    pub transcript: Vec<SparringRound>,
    /// `(1/T) Σ_t w_t` of the row copy.
    pub average: LearnedMixture,
    pub history: Option<Vec<PolicyDistribution>>,
    pub p_min: f64,
}

impl SparringOutput {
    pub fn final_regret(&self) -> f64 {
        self.transcript.last().map_or(0.0, |r| r.cumulative_regret)
    }
}

/// Two Exp4.P copies playing the rows and the columns of the duel. Contexts and
/// duels come from the nature stream of `seed`, action draws from the learner
/// stream, and hypothetical duels (analysis mode only) from the analysis
/// stream, so the transcript does not depend on `options`.
pub fn sparring_exp4p(
    env: &ContextualEnvironment,
    class: &PolicyClass,
    experts: Experts,
    horizon: usize,
    delta: f64,
    seed: u64,
    options: &SparringOptions,
) -> Result<SparringOutput> {
    env.check_class(class)?;
    if experts.contexts() != env.num_contexts() || experts.actions() != env.k() {
        return Err(Error::DimensionMismatch("experts do not match the environment".into()));
    }
    let mut row = Exp4P::new(experts.clone(), horizon, delta)?;
    let mut col = Exp4P::new(experts.clone(), horizon, delta)?;
    let mut nature = stream(seed, streams::NATURE);
    let mut learner = stream(seed, streams::LEARNER);
    let mut analysis = stream(seed, streams::ANALYSIS);
    let mut tracker = RegretTracker::new(env, class)?;
    let mut average = OnlineToBatch::new(experts);
    let mut history = options.keep_history.then(Vec::new);
    let mut transcript = Vec::with_capacity(horizon);

    for t in 0..horizon {
        let x = env.sample_round(&mut nature);
        let dist = row.policy_distribution();
        average.push(&dist)?;
        if let Some(h) = history.as_mut() {
            h.push(dist);
        }
        let (a, _) = row.act(x, &mut learner)?;
        let (b, _) = col.act(x, &mut learner)?;
        let r = env.duel(x, a, b, &mut nature);
        row.update(x, a, (r as f64 + 1.0) / 2.0)?;
        col.update(x, b, (1.0 - r as f64) / 2.0)?;
        tracker.push(PlayedRound { context: x, a, b });
        let (row_rewards, col_rewards) = if options.analysis {
            let (rr, cr) = hypothetical_rewards(env, x, a, b, r, &mut analysis);
            (Some(rr), Some(cr))
        } else {
            (None, None)
        };
        transcript.push(SparringRound {
            round: t,
            context: x,
            a,
            b,
            r,
            cumulative_regret: tracker.regret(),
            row_rewards,
            col_rewards,
        });
    }
    Ok(SparringOutput { transcript, average: average.finish()?, history, p_min: row.p_min() })
}

fn hypothetical_rewards(
    env: &ContextualEnvironment,
    x: usize,
    a: usize,
    b: usize,
    r: i8,
    rng: &mut StreamRng,
) -> (Vec<i8>, Vec<i8>) {
    let k = env.k();
    let row = (0..k).map(|i| if i == a { r } else { env.duel(x, i, b, rng) }).collect();
    let col = (0..k).map(|j| if j == b { -r } else { -env.duel(x, a, j, rng) }).collect();
    (row, col)
}
