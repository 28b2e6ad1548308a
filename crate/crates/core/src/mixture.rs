//! Probability distributions over policies.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Policy, PolicyClass};
use crate::simplex::SimplexDistribution;

/// A weighted list of distinct policies whose weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMixture {
    atoms: Vec<MixtureAtom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureAtom {
    pub weight: f64,
    pub policy: Policy,
}

/// Merges atoms with identical policies, drops zero weights and rescales the rest
/// to unit mass. Atom order follows first appearance.
pub fn mixture_normalize<I>(atoms: I) -> Result<PolicyMixture>
where
    I: IntoIterator<Item = (f64, Policy)>,
{
    let mut merged: Vec<MixtureAtom> = Vec::new();
    let mut index: HashMap<Policy, usize> = HashMap::new();
    for (weight, policy) in atoms {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::NegativeWeight(weight));
        }
        match index.get(&policy) {
            Some(&i) => merged[i].weight += weight,
            None => {
                index.insert(policy.clone(), merged.len());
                merged.push(MixtureAtom { weight, policy });
            }
        }
    }
    merged.retain(|a| a.weight > 0.0);
    let total: f64 = merged.iter().map(|a| a.weight).sum();
    if merged.is_empty() || total <= 0.0 {
        return Err(Error::EmptyMixture);
    }
    for a in &mut merged {
        a.weight /= total;
    }
    Ok(PolicyMixture { atoms: merged })
}

impl PolicyMixture {
    pub fn point(policy: Policy) -> Self {
        PolicyMixture { atoms: vec![MixtureAtom { weight: 1.0, policy }] }
    }

    /// Uniform mixture over `policies` (duplicates merge).
    pub fn uniform(policies: impl IntoIterator<Item = Policy>) -> Result<Self> {
        mixture_normalize(policies.into_iter().map(|p| (1.0, p)))
    }

    pub fn atoms(&self) -> &[MixtureAtom] {
        &self.atoms
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    /// Drops atoms lighter than `threshold` and renormalizes.
    pub fn pruned(&self, threshold: f64) -> Result<Self> {
        mixture_normalize(self.atoms.iter().filter(|a| a.weight >= threshold).map(|a| (a.weight, a.policy.clone())))
    }

    pub fn check(&self, class: &PolicyClass) -> Result<()> {
        for a in &self.atoms {
            if !class.contains(&a.policy) {
                return Err(Error::BadParams(format!("policy {:?} is not in the class", a.policy.actions())));
            }
        }
        Ok(())
    }

    /// Per-context distributions of the action this mixture plays.
    pub fn marginals(&self, contexts: usize, actions: usize) -> Vec<SimplexDistribution> {
        let mut tables = vec![vec![0.0; actions]; contexts];
        for a in &self.atoms {
            for (x, row) in tables.iter_mut().enumerate() {
                row[a.policy.act(x)] += a.weight;
            }
        }
        tables.into_iter().map(|t| SimplexDistribution::normalized(t).expect("mixture has positive mass")).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Policy {
        let weights: Vec<f64> = self.atoms.iter().map(|a| a.weight).collect();
        &self.atoms[crate::simplex::sample_index(&weights, rng)].policy
    }
}

/// A product-form distribution over full-mapping policies: each context's action
/// is drawn independently from its own table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMixture {
    tables: Vec<SimplexDistribution>,
}

impl ProductMixture {
    pub fn new(tables: Vec<SimplexDistribution>) -> Result<Self> {
        let k = tables.first().map(|t| t.len()).ok_or(Error::EmptyMixture)?;
        if tables.iter().any(|t| t.len() != k) {
            return Err(Error::DimensionMismatch("product tables differ in action count".into()));
        }
        Ok(ProductMixture { tables })
    }

    pub fn tables(&self) -> &[SimplexDistribution] {
        &self.tables
    }

    /// Draws a policy lazily, one context at a time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Policy {
        Policy::new(self.tables.iter().map(|t| t.sample(rng)).collect())
    }

    /// Lists the product explicitly, skipping zero-probability policies. Fails if
    /// more than `cap` policies would be listed.
    pub fn expand(&self, cap: usize) -> Result<PolicyMixture> {
        let supports: Vec<Vec<usize>> =
            self.tables.iter().map(|t| (0..t.len()).filter(|&a| t.weights()[a] > 0.0).collect()).collect();
        let count = supports
            .iter()
            .try_fold(1usize, |acc, s| acc.checked_mul(s.len()))
            .filter(|&n| n <= cap)
            .ok_or_else(|| Error::ClassTooLarge { size: "product support".into(), cap })?;
        let mut atoms = Vec::with_capacity(count);
        let mut digits = vec![0usize; supports.len()];
        for _ in 0..count {
            let actions: Vec<usize> = digits.iter().zip(&supports).map(|(&d, s)| s[d]).collect();
            let weight = actions.iter().zip(&self.tables).map(|(&a, t)| t.weights()[a]).product::<f64>();
            atoms.push((weight, Policy::new(actions)));
            for (d, s) in digits.iter_mut().zip(&supports).rev() {
                *d += 1;
                if *d < s.len() {
                    break;
                }
                *d = 0;
            }
        }
        mixture_normalize(atoms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(a: &[usize]) -> Policy {
        Policy::new(a.to_vec())
    }

    #[test]
    fn normalizes_equal_weights() {
        let m = mixture_normalize(vec![(2.0, p(&[0])), (2.0, p(&[1]))]).unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert_eq!(m.atoms()[0].weight, 0.5);
        assert_eq!(m.atoms()[1].weight, 0.5);
    }

    #[test]
    fn merges_clones() {
        let m = mixture_normalize(vec![(1.0, p(&[0])), (1.0, p(&[0]))]).unwrap();
        assert_eq!(m, PolicyMixture::point(p(&[0])));
    }

    #[test]
    fn drops_zero_weights() {
        let m = mixture_normalize(vec![(0.3, p(&[0])), (0.0, p(&[1])), (0.1, p(&[2]))]).unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert!((m.atoms()[0].weight - 0.75).abs() < 1e-15);
        assert!((m.atoms()[1].weight - 0.25).abs() < 1e-15);
        assert_eq!(m.atoms()[1].policy, p(&[2]));
    }

    #[test]
    fn rejects_empty_and_negative() {
        assert_eq!(mixture_normalize(Vec::<(f64, Policy)>::new()), Err(Error::EmptyMixture));
        assert_eq!(mixture_normalize(vec![(0.0, p(&[0]))]), Err(Error::EmptyMixture));
        assert_eq!(mixture_normalize(vec![(-1.0, p(&[0]))]), Err(Error::NegativeWeight(-1.0)));
    }

    #[test]
    fn product_expansion_matches_marginals() {
        let tables = vec![
            SimplexDistribution::new(vec![0.25, 0.75]).unwrap(),
            SimplexDistribution::new(vec![1.0, 0.0]).unwrap(),
        ];
        let prod = ProductMixture::new(tables.clone()).unwrap();
        let expanded = prod.expand(100).unwrap();
        assert_eq!(expanded.atoms().len(), 2);
        assert_eq!(expanded.marginals(2, 2), tables);
        assert!(prod.expand(1).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in proptest::collection::vec((0.0f64..5.0, 0usize..4), 1..12)) {
            let atoms: Vec<(f64, Policy)> = raw.iter().map(|&(w, a)| (w, p(&[a]))).collect();
            if let Ok(once) = mixture_normalize(atoms) {
                let twice = mixture_normalize(once.atoms().iter().map(|a| (a.weight, a.policy.clone()))).unwrap();
                prop_assert_eq!(once.atoms().len(), twice.atoms().len());
                for (x, y) in once.atoms().iter().zip(twice.atoms()) {
                    prop_assert_eq!(&x.policy, &y.policy);
                    prop_assert!((x.weight - y.weight).abs() <= 1e-15);
                }
                let total: f64 = once.atoms().iter().map(|a| a.weight).sum();
                prop_assert!((total - 1.0).abs() <= 1e-9);
            }
        }
    }
}
