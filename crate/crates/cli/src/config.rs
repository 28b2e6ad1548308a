use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vnw_core::env::make_environment;
use vnw_core::io::{env_from_json, policies_from_json};
use vnw_core::policy::DEFAULT_ENUMERATION_CAP;
use vnw_core::{ContextualEnvironment, EnvKind, PolicyClass};

use crate::{at, read_file, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SparExp4,
    Fpl,
    Pgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Explore for `explore_rounds`, then exploit until `horizon`.
    #[default]
    ExploreThenExploit,
    /// Explore for `⌈K^{2/3} T^{2/3} Ψ^{1/3}⌉` rounds, `Ψ = ln(|Π|/δ)`.
    FullExploreExploit,
}

/// How solver round counts are chosen when not given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Sizing {
    /// `L` is the largest `|M̂|` entry over policy pairs and both solvers run
    /// `⌈36 L²/ε²⌉` rounds.
    #[default]
    Desk,
    /// `L = K²`; FPL runs until `2γ ≤ ε`, projected GD `⌈36 L²/ε²⌉` rounds.
    Theory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentSource {
    File { file: PathBuf },
    Generate(EnvKind),
}

fn default_cap() -> usize {
    DEFAULT_ENUMERATION_CAP
}

fn default_max_rounds() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSource,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub mode: Mode,
    pub epsilon: f64,
    pub delta: f64,
    /// Total rounds `T`. Optional in explore-then-exploit mode, where it
    /// defaults to `explore_rounds`.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub explore_rounds: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Tabular policy file; the full mapping class when absent.
    #[serde(default)]
    pub policies: Option<PathBuf>,
    #[serde(default)]
    pub sizing: Sizing,
    #[serde(default)]
    pub rounds: Option<usize>,
    #[serde(default)]
    pub inner_rounds: Option<usize>,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_cap")]
    pub enumeration_cap: usize,
}

impl ExperimentConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut config: ExperimentConfig = serde_json::from_str(&read_file(path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let EnvironmentSource::File { file } = &mut config.environment {
            *file = base.join(&*file);
        }
        if let Some(p) = config.policies.as_mut() {
            *p = base.join(&*p);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.epsilon) || !unit(self.delta) {
            return Err(CliError::Config("epsilon and delta must lie in (0, 1)".into()));
        }
        if self.horizon == Some(0)
            || self.explore_rounds == Some(0)
            || self.rounds == Some(0)
            || self.inner_rounds == Some(0)
        {
            return Err(CliError::Config("horizons and round counts must be positive".into()));
        }
        match (self.algorithm, self.mode) {
            (Algorithm::SparExp4, _) | (_, Mode::FullExploreExploit) if self.horizon.is_none() => {
                Err(CliError::Config("horizon is required".into()))
            }
            (Algorithm::Fpl | Algorithm::Pgd, Mode::ExploreThenExploit) if self.explore_rounds.is_none() => {
                Err(CliError::Config("explore_rounds is required in explore-then-exploit mode".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn environment(&self) -> Result<ContextualEnvironment, CliError> {
        match &self.environment {
            EnvironmentSource::File { file } => env_from_json(&read_file(file)?).map_err(at("environment")),
            EnvironmentSource::Generate(kind) => make_environment(kind, self.seed).map_err(at("environment")),
        }
    }

    pub fn policy_class(&self, env: &ContextualEnvironment) -> Result<PolicyClass, CliError> {
        load_class(self.policies.as_deref(), env)
    }
}

/// The tabular class in `path`, or the full mapping class of `env`.
pub fn load_class(path: Option<&Path>, env: &ContextualEnvironment) -> Result<PolicyClass, CliError> {
    let class = match path {
        Some(p) => policies_from_json(&read_file(p)?).map_err(at("policies"))?,
        None => env.full_mapping(),
    };
    env.check_class(&class).map_err(at("policies"))?;
    Ok(class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    #[test]
    fn generated_and_file_environments() {
        let c = parse(
            r#"{"environment": {"kind": "cycle", "k": 3}, "algorithm": "pgd", "epsilon": 0.2, "delta": 0.1,
                "explore_rounds": 100}"#,
        )
        .unwrap();
        assert_eq!(c.environment, EnvironmentSource::Generate(EnvKind::Cycle { k: 3 }));
        assert_eq!(c.mode, Mode::ExploreThenExploit);
        assert_eq!(c.sizing, Sizing::Desk);
        let c = parse(
            r#"{"environment": {"file": "e.json"}, "algorithm": "spar-exp4", "epsilon": 0.2, "delta": 0.1,
                "horizon": 10}"#,
        )
        .unwrap();
        assert!(matches!(c.environment, EnvironmentSource::File { .. }));
    }

    #[test]
    fn rejects_bad_values() {
        let base = |extra: &str| {
            format!(r#"{{"environment": {{"kind": "five_arm"}}, "algorithm": "fpl", "delta": 0.1 {extra}}}"#)
        };
        assert!(parse(&base(r#", "epsilon": 1.5, "explore_rounds": 5"#)).is_err());
        assert!(parse(&base(r#", "epsilon": 0.1"#)).is_err());
        assert!(parse(&base(r#", "epsilon": 0.1, "explore_rounds": 0"#)).is_err());
        assert!(parse(&base(r#", "epsilon": 0.1, "mode": "full-explore-exploit""#)).is_err());
        assert!(parse(&base(r#", "epsilon": 0.1, "explore_rounds": 5, "typo": 1"#)).is_err());
    }
}
