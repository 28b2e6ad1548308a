//! Contextual environments with finite support, duel sampling, exact meta-duel
//! matrices between policies, and regret accounting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::PreferenceMatrix;
use crate::policy::{Policy, PolicyClass};
use crate::rng::{stream, streams};

/// One context of the environment: its probability and its preference matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub q: f64,
    pub matrix: PreferenceMatrix,
}

/// A finite-support distribution over (context, preference matrix) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEnvironment {
    contexts: Vec<Context>,
    cdf: Vec<f64>,
    seed: u64,
}

impl ContextualEnvironment {
    pub fn new(contexts: Vec<Context>, seed: u64) -> Result<Self> {
        let k = contexts
            .first()
            .map(|c| c.matrix.k())
            .ok_or_else(|| Error::BadParams("environment needs at least one context".into()))?;
        if contexts.iter().any(|c| c.matrix.k() != k) {
            return Err(Error::DimensionMismatch("contexts disagree on the number of actions".into()));
        }
        if contexts.iter().any(|c| !(c.q.is_finite() && c.q >= 0.0)) {
            return Err(Error::InvalidDistribution("context probabilities must be nonnegative".into()));
        }
        let total: f64 = contexts.iter().map(|c| c.q).sum();
        if (total - 1.0).abs() > crate::simplex::MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("context probabilities sum to {total}")));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = contexts
            .iter()
            .map(|c| {
                acc += c.q;
                acc
            })
            .collect();
        // Pin the last positive-mass context to 1 so rounding never leaks past it.
        if let Some(last) = contexts.iter().rposition(|c| c.q > 0.0) {
            cdf[last..].iter_mut().for_each(|v| *v = 1.0);
        }
        Ok(Self { contexts, cdf, seed })
    }

    pub fn single(matrix: PreferenceMatrix, seed: u64) -> Self {
        Self::new(vec![Context { q: 1.0, matrix }], seed).expect("single context is valid")
    }

    pub fn k(&self) -> usize {
        self.contexts[0].matrix.k()
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self, context: usize) -> &PreferenceMatrix {
        &self.contexts[context].matrix
    }

    /// The full-mapping class over this environment's contexts and actions.
    pub fn full_mapping(&self) -> PolicyClass {
        PolicyClass::full_mapping(self.num_contexts(), self.k()).expect("environment is non-empty")
    }

    /// Nature's draw of a context index. The preference matrix belongs to the
    /// context and is looked up by the regret ledger, never shown to learners.
    pub fn sample_round<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1)
    }

    /// Outcome of one duel: `+1` with probability `(P(a,b)+1)/2`, else `-1`.
    pub fn duel<R: Rng + ?Sized>(&self, context: usize, a: usize, b: usize, rng: &mut R) -> i8 {
        let p = self.contexts[context].matrix.get(a, b);
        let u: f64 = rng.gen();
        if u < (p + 1.0) / 2.0 {
            1
        } else {
            -1
        }
    }

    /// `M(π,ρ) = Σ_s q_s P_s(π(x_s), ρ(x_s))`.
    pub fn meta_entry(&self, pi: &Policy, rho: &Policy) -> f64 {
        self.contexts.iter().enumerate().map(|(s, c)| c.q * c.matrix.get(pi.act(s), rho.act(s))).sum()
    }

    pub fn check_class(&self, class: &PolicyClass) -> Result<()> {
        if class.contexts() != self.num_contexts() || class.actions() != self.k() {
            return Err(Error::DimensionMismatch(format!(
                "class is {}x{} but environment has {} contexts and {} actions",
                class.contexts(),
                class.actions(),
                self.num_contexts(),
                self.k()
            )));
        }
        Ok(())
    }
}

/// The policy-level preference matrix, computed exactly over the support.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaMatrix {
    pub policies: Vec<Policy>,
    entries: Vec<f64>,
}

impl MetaMatrix {
    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.policies.len() + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

pub fn exact_meta_matrix(env: &ContextualEnvironment, class: &PolicyClass, cap: usize) -> Result<MetaMatrix> {
    env.check_class(class)?;
    let policies = class.enumerate(cap)?;
    let n = policies.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            entries[i * n + j] = env.meta_entry(&policies[i], &policies[j]);
        }
    }
    Ok(MetaMatrix { policies, entries })
}

/// One played round as seen by the regret ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayedRound {
    pub context: usize,
    pub a: usize,
    pub b: usize,
}

/// Incremental regret: `max_π ½ Σ_t [P_t(π(x_t), a_t) + P_t(π(x_t), b_t)]`.
///
/// For full mappings the maximum decomposes per context, so the tracker keeps a
/// `C × K` table of partial sums; for tabular classes it keeps one sum per
/// policy.
#[derive(Debug, Clone)]
pub struct RegretTracker<'a> {
    env: &'a ContextualEnvironment,
    kind: TrackerKind,
    rounds: usize,
}

#[derive(Debug, Clone)]
enum TrackerKind {
    Factored { sums: Vec<f64>, best: Vec<f64> },
    Listed { policies: Vec<Policy>, sums: Vec<f64> },
}

impl<'a> RegretTracker<'a> {
    pub fn new(env: &'a ContextualEnvironment, class: &PolicyClass) -> Result<Self> {
        env.check_class(class)?;
        let kind = match class {
            PolicyClass::FullMapping { contexts, actions } => {
                TrackerKind::Factored { sums: vec![0.0; contexts * actions], best: vec![0.0; *contexts] }
            }
            PolicyClass::Tabular { policies, .. } => {
                TrackerKind::Listed { policies: policies.clone(), sums: vec![0.0; policies.len()] }
            }
        };
        Ok(Self { env, kind, rounds: 0 })
    }

    pub fn push(&mut self, round: PlayedRound) {
        let p = self.env.matrix(round.context);
        let gain = |action: usize| 0.5 * (p.get(action, round.a) + p.get(action, round.b));
        match &mut self.kind {
            TrackerKind::Factored { sums, best } => {
                let k = p.k();
                let row = &mut sums[round.context * k..(round.context + 1) * k];
                for (action, s) in row.iter_mut().enumerate() {
                    *s += gain(action);
                }
                best[round.context] = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            TrackerKind::Listed { policies, sums } => {
                for (pi, s) in policies.iter().zip(sums.iter_mut()) {
                    *s += gain(pi.act(round.context));
                }
            }
        }
        self.rounds += 1;
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Current regret. Contexts never seen contribute zero.
    pub fn regret(&self) -> f64 {
        match &self.kind {
            TrackerKind::Factored { best, .. } => best.iter().sum(),
            TrackerKind::Listed { sums, .. } => sums.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub fn regret(env: &ContextualEnvironment, ledger: &[PlayedRound], class: &PolicyClass) -> Result<f64> {
    if ledger.is_empty() {
        return Err(Error::BadParams("regret needs at least one round".into()));
    }
    let mut tracker = RegretTracker::new(env, class)?;
    for &r in ledger {
        tracker.push(r);
    }
    Ok(tracker.regret())
}

/// Generator recipes for environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvKind {
    /// Actions in a cycle: `i` beats `i+1 mod k` with certainty.
    Cycle { k: usize },
    /// Action 0 beats every other action by `gap`; the rest tie.
    Condorcet { k: usize, gap: f64 },
    /// `others` extra arms below a certain 3-cycle `a1 → a2 → a3 → a1`, plus `a0`,
    /// an exact duplicate of `a1`. Arm order is `a0, a1, a2, a3, others...`.
    Clone { others: usize },
    /// The fixed five-arm matrix without a Condorcet winner.
    FiveArm,
    /// Upper-triangle entries uniform in [-1, 1].
    RandomSkew { k: usize },
    /// `P(a,b) = clamp(v(a) - v(b), -1, 1)`.
    Utility { values: Vec<f64> },
    /// A multi-context mixture of the listed single-context kinds.
    Composite { parts: Vec<CompositePart> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositePart {
    pub q: f64,
    #[serde(flatten)]
    pub kind: EnvKind,
}

pub fn five_arm_matrix() -> PreferenceMatrix {
    PreferenceMatrix::new(&[
        vec![0.0, 0.5, -0.5, 0.5, -0.95],
        vec![-0.5, 0.0, 0.5, -0.2, 0.5],
        vec![0.5, -0.5, 0.0, -0.2, 0.5],
        vec![-0.5, 0.2, 0.2, 0.0, 0.5],
        vec![0.95, -0.5, -0.5, -0.5, 0.0],
    ])
    .expect("constant matrix is valid")
}

/// The duplicated-arm construction with `others` extra arms (`others + 4` total).
pub fn clone_matrix(others: usize) -> PreferenceMatrix {
    // a1 beats a2, a2 beats a3, a3 beats a1; a0 copies a1's row.
    let top = |i: usize| if i == 0 { 1 } else { i };
    PreferenceMatrix::from_upper(others + 4, |a, b| match (a < 4, b < 4) {
        (true, true) => match (top(a), top(b)) {
            (x, y) if x == y => 0.0,
            (1, 2) | (2, 3) => 1.0,
            (1, 3) => -1.0,
            _ => unreachable!("a < b within the top block"),
        },
        (true, false) => 1.0,
        _ => 0.0,
    })
}

pub fn cycle_matrix(k: usize) -> PreferenceMatrix {
    PreferenceMatrix::from_upper(k, |a, b| {
        if b == a + 1 {
            1.0
        } else if a == 0 && b == k - 1 && k > 2 {
            -1.0
        } else {
            0.0
        }
    })
}

fn single_matrix<R: Rng>(kind: &EnvKind, rng: &mut R) -> Result<PreferenceMatrix> {
    match kind {
        EnvKind::Cycle { k } if *k >= 3 => Ok(cycle_matrix(*k)),
        EnvKind::Cycle { .. } => Err(Error::BadParams("cycle needs k >= 3".into())),
        EnvKind::Condorcet { k, gap } if *k >= 1 && (0.0..=1.0).contains(gap) && *gap > 0.0 => {
            Ok(PreferenceMatrix::from_upper(*k, |a, _| if a == 0 { *gap } else { 0.0 }))
        }
        EnvKind::Condorcet { .. } => Err(Error::BadParams("condorcet needs k >= 1 and gap in (0, 1]".into())),
        EnvKind::Clone { others } if *others >= 1 => Ok(clone_matrix(*others)),
        EnvKind::Clone { .. } => Err(Error::BadParams("clone needs at least one other arm".into())),
        EnvKind::FiveArm => Ok(five_arm_matrix()),
        EnvKind::RandomSkew { k } if *k >= 1 => Ok(PreferenceMatrix::from_upper(*k, |_, _| rng.gen_range(-1.0..=1.0))),
        EnvKind::RandomSkew { .. } => Err(Error::BadParams("random_skew needs k >= 1".into())),
        EnvKind::Utility { values } if !values.is_empty() && values.iter().all(|v| v.is_finite()) => {
            Ok(PreferenceMatrix::from_upper(values.len(), |a, b| values[a] - values[b]))
        }
        EnvKind::Utility { .. } => Err(Error::BadParams("utility needs finite values".into())),
        EnvKind::Composite { .. } => Err(Error::BadParams("composite parts cannot nest".into())),
    }
}

/// Builds an environment. Randomized kinds draw from the generator stream of
/// `seed`, so the result is a pure function of `(kind, seed)`.
pub fn make_environment(kind: &EnvKind, seed: u64) -> Result<ContextualEnvironment> {
    let mut rng = stream(seed, streams::GENERATOR);
    match kind {
        EnvKind::Composite { parts } => {
            let contexts = parts
                .iter()
                .map(|part| Ok(Context { q: part.q, matrix: single_matrix(&part.kind, &mut rng)? }))
                .collect::<Result<Vec<_>>>()?;
            ContextualEnvironment::new(contexts, seed).map_err(|e| Error::BadParams(e.to_string()))
        }
        single => Ok(ContextualEnvironment::single(single_matrix(single, &mut rng)?, seed)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::winners::find_condorcet;
    use proptest::prelude::*;

    fn two_context_env() -> ContextualEnvironment {
        let m1 = PreferenceMatrix::from_upper(2, |_, _| 0.4);
        let m2 = PreferenceMatrix::from_upper(2, |_, _| -0.2);
        ContextualEnvironment::new(vec![Context { q: 0.5, matrix: m1 }, Context { q: 0.5, matrix: m2 }], 0).unwrap()
    }

    #[test]
    fn rejects_bad_environments() {
        let m = PreferenceMatrix::zeros(2);
        assert!(ContextualEnvironment::new(vec![], 0).is_err());
        assert!(ContextualEnvironment::new(vec![Context { q: 0.5, matrix: m.clone() }], 0).is_err());
        let mixed = vec![Context { q: 0.5, matrix: m }, Context { q: 0.5, matrix: PreferenceMatrix::zeros(3) }];
        assert!(matches!(ContextualEnvironment::new(mixed, 0), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn sampling_contexts() {
        let env = ContextualEnvironment::single(PreferenceMatrix::zeros(2), 0);
        let mut rng = stream(3, 0);
        assert!((0..1000).all(|_| env.sample_round(&mut rng) == 0));

        let env = two_context_env();
        let n = 100_000;
        let zeros = (0..n).filter(|_| env.sample_round(&mut rng) == 0).count();
        // 3σ of a fair binomial at n = 1e5 is 0.0047.
        let f = zeros as f64 / n as f64;
        assert!((0.49..=0.51).contains(&f), "{f}");

        let m = PreferenceMatrix::zeros(2);
        let skewed =
            ContextualEnvironment::new(vec![Context { q: 1.0, matrix: m.clone() }, Context { q: 0.0, matrix: m }], 0)
                .unwrap();
        assert!((0..n).all(|_| skewed.sample_round(&mut rng) == 0));
    }

    #[test]
    fn duel_outcomes() {
        let sure = ContextualEnvironment::single(PreferenceMatrix::from_upper(2, |_, _| 1.0), 0);
        let mut rng = stream(5, 0);
        assert!((0..10_000).all(|_| sure.duel(0, 0, 1, &mut rng) == 1));
        assert!((0..10_000).all(|_| sure.duel(0, 1, 0, &mut rng) == -1));

        let fair = ContextualEnvironment::single(PreferenceMatrix::zeros(2), 0);
        let n = 100_000;
        // 3σ of the mean of ±1 coin flips at n = 1e5 is 0.0095.
        let mean = (0..n).map(|_| fair.duel(0, 0, 1, &mut rng) as f64).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 0.02, "{mean}");
        let mean = (0..n).map(|_| sure.duel(0, 1, 1, &mut rng) as f64).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 0.02, "{mean}");
    }

    #[test]
    fn meta_matrix_examples() {
        let env = two_context_env();
        let pi = Policy::new(vec![0, 0]);
        let rho = Policy::new(vec![1, 1]);
        assert!((env.meta_entry(&pi, &rho) - 0.1).abs() < 1e-15);
        assert_eq!(env.meta_entry(&pi, &pi), 0.0);

        let single = ContextualEnvironment::single(five_arm_matrix(), 0);
        let m = exact_meta_matrix(&single, &single.full_mapping(), 100).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m.get(i, j), five_arm_matrix().get(i, j));
            }
        }
        let cap = exact_meta_matrix(&two_context_env(), &PolicyClass::full_mapping(2, 2).unwrap(), 3);
        assert!(matches!(cap, Err(Error::ClassTooLarge { .. })));
    }

    #[test]
    fn meta_matrix_is_exactly_skew() {
        let env = make_environment(
            &EnvKind::Composite {
                parts: vec![
                    CompositePart { q: 0.3, kind: EnvKind::RandomSkew { k: 3 } },
                    CompositePart { q: 0.7, kind: EnvKind::RandomSkew { k: 3 } },
                ],
            },
            11,
        )
        .unwrap();
        let m = exact_meta_matrix(&env, &env.full_mapping(), 100).unwrap();
        for i in 0..m.len() {
            for j in 0..m.len() {
                assert_eq!(m.get(i, j), -m.get(j, i));
                assert!(m.get(i, j).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn meta_duels_match_exact_entries() {
        let env = make_environment(
            &EnvKind::Composite {
                parts: vec![
                    CompositePart { q: 0.25, kind: EnvKind::RandomSkew { k: 3 } },
                    CompositePart { q: 0.75, kind: EnvKind::Cycle { k: 3 } },
                ],
            },
            2,
        )
        .unwrap();
        let pi = Policy::new(vec![0, 2]);
        let rho = Policy::new(vec![1, 0]);
        let mut rng = stream(9, 0);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| {
                let x = env.sample_round(&mut rng);
                env.duel(x, pi.act(x), rho.act(x), &mut rng) as f64
            })
            .sum::<f64>()
            / n as f64;
        let exact = env.meta_entry(&pi, &rho);
        let sigma = ((1.0 - exact * exact) / n as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * sigma, "{mean} vs {exact}");
    }

    #[test]
    fn regret_examples() {
        let env = ContextualEnvironment::single(PreferenceMatrix::from_upper(2, |_, _| 0.6), 0);
        let class = env.full_mapping();
        let r = regret(&env, &[PlayedRound { context: 0, a: 1, b: 1 }], &class).unwrap();
        assert!((r - 0.6).abs() < 1e-15);

        let cond = make_environment(&EnvKind::Condorcet { k: 4, gap: 0.3 }, 0).unwrap();
        let ledger = vec![PlayedRound { context: 0, a: 0, b: 0 }; 50];
        assert!(regret(&cond, &ledger, &cond.full_mapping()).unwrap() <= 0.0);
        assert!(regret(&cond, &[], &cond.full_mapping()).is_err());
    }

    #[test]
    fn generators() {
        assert_eq!(make_environment(&EnvKind::FiveArm, 0).unwrap().matrix(0), &five_arm_matrix());
        let clone = make_environment(&EnvKind::Clone { others: 5 }, 0).unwrap();
        assert_eq!(clone.k(), 9);
        let p = clone.matrix(0);
        assert_eq!(p.get(0, 1), 0.0);
        for j in 2..9 {
            assert_eq!(p.get(0, j), p.get(1, j));
        }
        assert_eq!((p.get(1, 2), p.get(2, 3), p.get(3, 1)), (1.0, 1.0, 1.0));
        let util = make_environment(&EnvKind::Utility { values: vec![1.0, 0.5, 0.0] }, 0).unwrap();
        assert_eq!(find_condorcet(util.matrix(0)), Some(0));
        assert_eq!(util.matrix(0).get(0, 2), 1.0);
        let a = make_environment(&EnvKind::RandomSkew { k: 4 }, 5).unwrap();
        let b = make_environment(&EnvKind::RandomSkew { k: 4 }, 5).unwrap();
        let c = make_environment(&EnvKind::RandomSkew { k: 4 }, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.matrix(0), c.matrix(0));
        assert!(make_environment(&EnvKind::Cycle { k: 2 }, 0).is_err());
        assert!(make_environment(&EnvKind::Condorcet { k: 3, gap: 2.0 }, 0).is_err());
    }

    fn random_ledger() -> impl Strategy<Value = (u64, usize, usize, Vec<(usize, usize, usize)>)> {
        (any::<u64>(), 1usize..4, 2usize..4).prop_flat_map(|(seed, c, k)| {
            let rounds = proptest::collection::vec((0..c, 0..k, 0..k), 1..40);
            (Just(seed), Just(c), Just(k), rounds)
        })
    }

    fn random_env(seed: u64, c: usize, k: usize) -> ContextualEnvironment {
        let parts = (0..c).map(|_| CompositePart { q: 1.0 / c as f64, kind: EnvKind::RandomSkew { k } }).collect();
        make_environment(&EnvKind::Composite { parts }, seed).unwrap()
    }

    proptest! {
        #[test]
        fn factored_regret_matches_enumeration((seed, c, k, rounds) in random_ledger()) {
            let env = random_env(seed, c, k);
            let ledger: Vec<PlayedRound> = rounds.iter().map(|&(context, a, b)| PlayedRound { context, a, b }).collect();
            let fast = regret(&env, &ledger, &env.full_mapping()).unwrap();
            let tabular = PolicyClass::tabular(c, k, env.full_mapping().enumerate(256).unwrap()).unwrap();
            let listed = regret(&env, &ledger, &tabular).unwrap();
            // Brute force, written out independently.
            let brute = env.full_mapping().enumerate(256).unwrap().iter().map(|pi| {
                ledger.iter().map(|r| {
                    let p = env.matrix(r.context);
                    0.5 * (p.get(pi.act(r.context), r.a) + p.get(pi.act(r.context), r.b))
                }).sum::<f64>()
            }).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((fast - brute).abs() <= 1e-12);
            prop_assert!((listed - brute).abs() <= 1e-12);
        }

        #[test]
        fn regret_ignores_round_order((seed, c, k, rounds) in random_ledger()) {
            let env = random_env(seed, c, k);
            let ledger: Vec<PlayedRound> = rounds.iter().map(|&(context, a, b)| PlayedRound { context, a, b }).collect();
            let mut reversed = ledger.clone();
            reversed.reverse();
            let class = env.full_mapping();
            prop_assert!((regret(&env, &ledger, &class).unwrap() - regret(&env, &reversed, &class).unwrap()).abs() <= 1e-12);
        }
    }
}
