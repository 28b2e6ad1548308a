//! Exact certification of a policy mixture against the meta-duel matrix.

use serde::{Deserialize, Serialize};

use crate::env::ContextualEnvironment;
use crate::error::{Error, Result};
use crate::mixture::PolicyMixture;
use crate::policy::PolicyClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `min_ρ Σ_π W(π) M(π, ρ)` over every policy `ρ` of the class.
    pub margin: f64,
    pub epsilon: f64,
    pub pass: bool,
    pub mode: String,
    pub opponents: usize,
}

/// Certifies a mixture given by its per-context action marginals (row-major
/// `C × K`). `M(·, ρ)` is linear in the mixture and depends on it only through
/// these marginals, and the worst opponent mixture is a vertex, so scanning the
/// enumerated class gives the exact margin.
pub fn certify_marginals(
    env: &ContextualEnvironment,
    class: &PolicyClass,
    marginals: &[f64],
    epsilon: f64,
    cap: usize,
) -> Result<Certificate> {
    env.check_class(class)?;
    let k = env.k();
    if marginals.len() != env.num_contexts() * k {
        return Err(Error::DimensionMismatch("marginals do not match the environment".into()));
    }
    let opponents = class.enumerate(cap)?;
    // h[s][b] = q_s Σ_a W_s(a) P_s(a, b)
    let mut h = vec![0.0; env.num_contexts() * k];
    for (s, ctx) in env.contexts().iter().enumerate() {
        for a in 0..k {
            let w = marginals[s * k + a];
            if w == 0.0 {
                continue;
            }
            for b in 0..k {
                h[s * k + b] += ctx.q * w * ctx.matrix.get(a, b);
            }
        }
    }
    let margin = opponents
        .iter()
        .map(|rho| rho.actions().iter().enumerate().map(|(s, &b)| h[s * k + b]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(Certificate { margin, epsilon, pass: margin >= -epsilon, mode: "enumerated".into(), opponents: opponents.len() })
}

/// Certifies an explicit mixture: `margin = min_ρ Σ_atoms w M(π, ρ)`.
pub fn certify(
    env: &ContextualEnvironment,
    class: &PolicyClass,
    mixture: &PolicyMixture,
    epsilon: f64,
    cap: usize,
) -> Result<Certificate> {
    env.check_class(class)?;
    mixture.check(class)?;
    let opponents = class.enumerate(cap)?;
    let margin = opponents
        .iter()
        .map(|rho| mixture.atoms().iter().map(|a| a.weight * env.meta_entry(&a.policy, rho)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(Certificate { margin, epsilon, pass: margin >= -epsilon, mode: "enumerated".into(), opponents: opponents.len() })
}
