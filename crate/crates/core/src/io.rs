//! On-disk formats. Floats in matrices, environments, mixtures and CSV files
//! are written with 17 significant digits so they read back bit-for-bit.

use std::fmt::Write as _;

use serde::Deserialize;

use crate::batch::{DuelRecord, ExplorationLog};
use crate::env::{Context, ContextualEnvironment};
use crate::error::{Error, Result};
use crate::matrix::PreferenceMatrix;
use crate::mixture::{mixture_normalize, PolicyMixture};
use crate::policy::{Policy, PolicyClass};

/// Lossless decimal form of a finite float.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // Keep the sign bit of -0.0 out of output files.
        return "0.0000000000000000e0".into();
    }
    format!("{x:.16e}")
}

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

#[derive(Deserialize)]
struct MatrixFile {
    k: usize,
    entries: Vec<Vec<f64>>,
}

impl MatrixFile {
    fn into_matrix(self) -> Result<PreferenceMatrix> {
        if self.entries.len() != self.k {
            return Err(Error::DimensionMismatch(format!("k = {} but {} rows given", self.k, self.entries.len())));
        }
        PreferenceMatrix::new(&self.entries)
    }
}

pub fn matrix_to_json(p: &PreferenceMatrix) -> String {
    let mut out = String::new();
    write_matrix(&mut out, p, "  ");
    out.push('\n');
    out
}

fn write_matrix(out: &mut String, p: &PreferenceMatrix, indent: &str) {
    let _ = write!(out, "{{\n{indent}\"k\": {},\n{indent}\"entries\": [\n", p.k());
    for a in 0..p.k() {
        let row: Vec<String> = p.row(a).iter().map(|&x| fmt_f64(x)).collect();
        let sep = if a + 1 < p.k() { "," } else { "" };
        let _ = writeln!(out, "{indent}  [{}]{sep}", row.join(", "));
    }
    let close = &indent[..indent.len().saturating_sub(2)];
    let _ = write!(out, "{indent}]\n{close}}}");
}

pub fn matrix_from_json(text: &str) -> Result<PreferenceMatrix> {
    serde_json::from_str::<MatrixFile>(text).map_err(parse_err)?.into_matrix()
}

#[derive(Deserialize)]
struct EnvFile {
    contexts: Vec<ContextFile>,
    seed: u64,
}

#[derive(Deserialize)]
struct ContextFile {
    q: f64,
    matrix: MatrixFile,
}

pub fn env_to_json(env: &ContextualEnvironment) -> String {
    let mut out = String::from("{\n  \"contexts\": [\n");
    for (i, c) in env.contexts().iter().enumerate() {
        let _ = write!(out, "    {{\n      \"q\": {},\n      \"matrix\": ", fmt_f64(c.q));
        write_matrix(&mut out, &c.matrix, "        ");
        let sep = if i + 1 < env.num_contexts() { "," } else { "" };
        let _ = writeln!(out, "\n    }}{sep}");
    }
    let _ = write!(out, "  ],\n  \"seed\": {}\n}}\n", env.seed());
    out
}

pub fn env_from_json(text: &str) -> Result<ContextualEnvironment> {
    let file: EnvFile = serde_json::from_str(text).map_err(parse_err)?;
    let contexts = file
        .contexts
        .into_iter()
        .map(|c| Ok(Context { q: c.q, matrix: c.matrix.into_matrix()? }))
        .collect::<Result<Vec<_>>>()?;
    ContextualEnvironment::new(contexts, file.seed)
}

/// One JSON object per line, no header.
pub fn log_to_jsonl(log: &ExplorationLog) -> String {
    let mut out = String::new();
    for r in log.records() {
        let _ = writeln!(out, "{{\"i\":{},\"context\":{},\"a\":{},\"b\":{},\"r\":{}}}", r.i, r.context, r.a, r.b, r.r);
    }
    out
}

pub fn log_from_jsonl(text: &str, contexts: usize, actions: usize) -> Result<ExplorationLog> {
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<DuelRecord>(l).map_err(parse_err))
        .collect::<Result<Vec<_>>>()?;
    ExplorationLog::uniform(contexts, actions, records)
}

#[derive(Deserialize)]
struct MixtureFile {
    atoms: Vec<AtomFile>,
}

#[derive(Deserialize)]
struct AtomFile {
    weight: f64,
    policy: Vec<usize>,
}

/// `{"atoms": [{"weight": w, "policy": [...]}], "report": ...}`; `report` is
/// inserted verbatim and must already be JSON.
pub fn mixture_to_json(mixture: &PolicyMixture, report: &str) -> String {
    let mut out = String::from("{\n  \"atoms\": [\n");
    for (i, a) in mixture.atoms().iter().enumerate() {
        let policy: Vec<String> = a.policy.actions().iter().map(|x| x.to_string()).collect();
        let sep = if i + 1 < mixture.support_size() { "," } else { "" };
        let _ = writeln!(out, "    {{\"weight\": {}, \"policy\": [{}]}}{sep}", fmt_f64(a.weight), policy.join(", "));
    }
    let _ = write!(out, "  ],\n  \"report\": {report}\n}}\n");
    out
}

pub fn mixture_from_json(text: &str) -> Result<PolicyMixture> {
    let file: MixtureFile = serde_json::from_str(text).map_err(parse_err)?;
    mixture_normalize(file.atoms.into_iter().map(|a| (a.weight, Policy::new(a.policy))))
}

#[derive(Deserialize)]
struct PoliciesFile {
    contexts: usize,
    actions: usize,
    policies: Vec<Vec<usize>>,
}

/// A tabular class: `{"contexts": C, "actions": K, "policies": [[...], ...]}`.
pub fn policies_from_json(text: &str) -> Result<PolicyClass> {
    let file: PoliciesFile = serde_json::from_str(text).map_err(parse_err)?;
    PolicyClass::tabular(file.contexts, file.actions, file.policies.into_iter().map(Policy::new).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::explore_uniform;
    use crate::env::{five_arm_matrix, make_environment, CompositePart, EnvKind};

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -0.95, 1.0 / 3.0, 1e-300, -0.0, 0.0, 0.5] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(-0.0), fmt_f64(0.0));
    }

    #[test]
    fn matrix_round_trip() {
        let p = five_arm_matrix();
        let text = matrix_to_json(&p);
        assert_eq!(matrix_from_json(&text).unwrap(), p);
        assert!(matches!(
            matrix_from_json(r#"{"k": 2, "entries": [[0, 0.5], [0.5, 0]]}"#),
            Err(Error::SkewSymmetryViolation(0, 1))
        ));
        assert!(matrix_from_json(r#"{"k": 3, "entries": [[0]]}"#).is_err());
    }

    #[test]
    fn env_round_trip() {
        let env = make_environment(
            &EnvKind::Composite {
                parts: vec![
                    CompositePart { q: 0.25, kind: EnvKind::RandomSkew { k: 3 } },
                    CompositePart { q: 0.75, kind: EnvKind::Cycle { k: 3 } },
                ],
            },
            17,
        )
        .unwrap();
        let text = env_to_json(&env);
        let back = env_from_json(&text).unwrap();
        assert_eq!(back, env);
        assert_eq!(env_to_json(&back), text);
    }

    #[test]
    fn log_round_trip() {
        let env = make_environment(&EnvKind::Cycle { k: 3 }, 0).unwrap();
        let log = explore_uniform(&env, 25, 4).unwrap();
        let text = log_to_jsonl(&log);
        assert_eq!(text.lines().count(), 25);
        assert_eq!(log_from_jsonl(&text, 1, 3).unwrap(), log);
        assert!(log_from_jsonl(&text, 1, 2).is_err());
    }

    #[test]
    fn mixture_round_trip() {
        let m = mixture_normalize(vec![(1.0, Policy::new(vec![0, 2])), (2.0, Policy::new(vec![1, 1]))]).unwrap();
        let text = mixture_to_json(&m, "{}");
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["report"].is_object());
        assert_eq!(mixture_from_json(&text).unwrap(), m);
    }

    #[test]
    fn policies_file() {
        let class = policies_from_json(r#"{"contexts": 2, "actions": 3, "policies": [[0, 1], [2, 2]]}"#).unwrap();
        assert_eq!(class.size(), Some(2));
        assert!(policies_from_json(r#"{"contexts": 2, "actions": 3, "policies": [[0, 3]]}"#).is_err());
    }
}
