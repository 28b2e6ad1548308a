//! Deterministic context-to-action policies and finite policy classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default enumeration cap for full-mapping classes.
pub const DEFAULT_ENUMERATION_CAP: usize = 10_000;

/// A deterministic map from context index to action, stored as one action per
/// context.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(Vec<usize>);

impl Policy {
    pub fn new(actions: Vec<usize>) -> Self {
        Policy(actions)
    }

    /// The policy playing `action` in every one of `contexts` contexts.
    pub fn constant(contexts: usize, action: usize) -> Self {
        Policy(vec![action; contexts])
    }

    #[inline]
    pub fn act(&self, context: usize) -> usize {
        self.0[context]
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn contexts(&self) -> usize {
        self.0.len()
    }

    pub fn check(&self, contexts: usize, actions: usize) -> Result<()> {
        if self.0.len() != contexts {
            return Err(Error::DimensionMismatch(format!(
                "policy covers {} contexts, expected {contexts}",
                self.0.len()
            )));
        }
        match self.0.iter().find(|&&a| a >= actions) {
            Some(&action) => Err(Error::ActionOutOfRange { action, actions }),
            None => Ok(()),
        }
    }
}

/// A finite policy space.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyClass {
    /// An explicit, duplicate-free list of policies.
    Tabular { contexts: usize, actions: usize, policies: Vec<Policy> },
    /// Every one of the `actions^contexts` maps. Never materialized unless
    /// enumerated under a cap.
    FullMapping { contexts: usize, actions: usize },
}

impl PolicyClass {
    pub fn tabular(contexts: usize, actions: usize, policies: Vec<Policy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(Error::BadParams("tabular class needs at least one policy".into()));
        }
        for p in &policies {
            p.check(contexts, actions)?;
        }
        let mut sorted: Vec<&Policy> = policies.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::BadParams("tabular class contains duplicate policies".into()));
        }
        Ok(PolicyClass::Tabular { contexts, actions, policies })
    }

    pub fn full_mapping(contexts: usize, actions: usize) -> Result<Self> {
        if contexts == 0 || actions == 0 {
            return Err(Error::BadParams("full mapping needs contexts >= 1 and actions >= 1".into()));
        }
        Ok(PolicyClass::FullMapping { contexts, actions })
    }

    pub fn contexts(&self) -> usize {
        match self {
            PolicyClass::Tabular { contexts, .. } | PolicyClass::FullMapping { contexts, .. } => *contexts,
        }
    }

    pub fn actions(&self) -> usize {
        match self {
            PolicyClass::Tabular { actions, .. } | PolicyClass::FullMapping { actions, .. } => *actions,
        }
    }

    /// `|Π|`, or `None` if it does not fit in a `u64`.
    pub fn size(&self) -> Option<u64> {
        match self {
            PolicyClass::Tabular { policies, .. } => Some(policies.len() as u64),
            PolicyClass::FullMapping { contexts, actions } => {
                let exp = u32::try_from(*contexts).ok()?;
                (*actions as u64).checked_pow(exp)
            }
        }
    }

    /// `ln |Π|`; equals `C ln K` for full mappings.
    pub fn ln_size(&self) -> f64 {
        match self {
            PolicyClass::Tabular { policies, .. } => (policies.len() as f64).ln(),
            PolicyClass::FullMapping { contexts, actions } => *contexts as f64 * (*actions as f64).ln(),
        }
    }

    fn size_label(&self) -> String {
        match self {
            PolicyClass::FullMapping { contexts, actions } => match self.size() {
                Some(n) => n.to_string(),
                None => format!("{actions}^{contexts}"),
            },
            PolicyClass::Tabular { policies, .. } => policies.len().to_string(),
        }
    }

    pub fn is_full_mapping(&self) -> bool {
        matches!(self, PolicyClass::FullMapping { .. })
    }

    /// Materializes the class. Full mappings are listed in mixed-radix order with
    /// context 0 as the most significant digit.
    pub fn enumerate(&self, cap: usize) -> Result<Vec<Policy>> {
        match self {
            PolicyClass::Tabular { policies, .. } => Ok(policies.clone()),
            PolicyClass::FullMapping { .. } => {
                let n = self
                    .size()
                    .filter(|&n| n <= cap as u64)
                    .ok_or_else(|| Error::ClassTooLarge { size: self.size_label(), cap })?;
                Ok((0..n).map(|i| self.full_mapping_policy(i)).collect())
            }
        }
    }

    /// Policy number `index` in enumeration order of a full mapping.
    pub fn full_mapping_policy(&self, mut index: u64) -> Policy {
        let (contexts, actions) = (self.contexts(), self.actions() as u64);
        let mut acts = vec![0usize; contexts];
        for slot in acts.iter_mut().rev() {
            *slot = (index % actions) as usize;
            index /= actions;
        }
        Policy(acts)
    }

    pub fn contains(&self, policy: &Policy) -> bool {
        match self {
            PolicyClass::Tabular { policies, .. } => policies.contains(policy),
            PolicyClass::FullMapping { contexts, actions } => policy.check(*contexts, *actions).is_ok(),
        }
    }
}
