use std::path::Path;
use std::process::{Command, Output};

fn vnw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vnw")).current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn winners_of_the_five_arm_matrix() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&vnw(dir.path(), &["make-env", "--kind", "five-arm"])), 0);
    let out = vnw(dir.path(), &["winners", "--env", "env.json", "--eps", "1e-6"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["labels"]["von_neumann_support"], serde_json::json!([1, 2, 3]));
    assert_eq!(v["labels"]["random_walk"], 4);
    assert_eq!(v["report"]["copeland_strict"], serde_json::json!([2, 2, 2, 3, 1]));
    let csv = vnw(dir.path(), &["winners", "--env", "env.json", "--format", "csv"]);
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 6);
}

#[test]
fn malformed_input_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), r#"{"k": 2, "entries": [[0, 0.5], [0.5, 0]]}"#).unwrap();
    assert_eq!(code(&vnw(dir.path(), &["winners", "--matrix", "m.json"])), 2);
    assert_eq!(code(&vnw(dir.path(), &["winners", "--matrix", "missing.json"])), 2);
    assert_eq!(code(&vnw(dir.path(), &["make-env", "--kind", "cycle", "--k", "1"])), 2);
    assert_eq!(code(&vnw(dir.path(), &["make-env", "--kind", "cycle", "--k", "3"])), 0);
    assert_eq!(code(&vnw(dir.path(), &["winners", "--env", "env.json", "--context", "2"])), 2);
    assert_eq!(code(&vnw(dir.path(), &["explore", "--env", "env.json", "--m", "0"])), 2);
}

#[test]
fn horizon_shorter_than_exploration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"environment": {"kind": "cycle", "k": 3}, "algorithm": "pgd", "epsilon": 0.2, "delta": 0.1,
        "explore_rounds": 500, "horizon": 100}"#;
    std::fs::write(dir.path().join("c.json"), config).unwrap();
    let out = vnw(dir.path(), &["run", "--config", "c.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("shorter"));
}

#[test]
fn five_arm_pipeline_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"environment": {"kind": "five_arm"}, "algorithm": "pgd", "epsilon": 0.2, "delta": 0.1,
        "explore_rounds": 8000, "horizon": 10000, "seed": 2}"#;
    std::fs::write(dir.path().join("c.json"), config).unwrap();
    let out = vnw(dir.path(), &["run", "--config", "c.json", "--out-dir", "out"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    let cert = json(&o.join("certificate.json"));
    assert_eq!(cert["pass"], true);
    assert_eq!(cert["mode"], "enumerated");
    assert!(cert["margin"].as_f64().unwrap() >= -0.2);
    let regret = std::fs::read_to_string(o.join("regret.csv")).unwrap();
    assert!(regret.starts_with("round,context,a,b,r,cumulative_regret\n"));
    assert_eq!(regret.lines().count(), 10_001);
    assert_eq!(std::fs::read_to_string(o.join("log.jsonl")).unwrap().lines().count(), 8000);
    let mixture = json(&o.join("mixture.json"));
    assert_eq!(mixture["report"]["algorithm"], "projected_gd");

    // The saved mixture certifies through the standalone subcommand too.
    let out = vnw(&o, &["certify", "--env", "env.json", "--mixture", "mixture.json", "--eps", "0.2"]);
    assert_eq!(code(&out), 0);
    let out = vnw(&o, &["certify", "--env", "env.json", "--mixture", "mixture.json", "--eps", "0.001"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn sparring_run_with_a_tabular_class() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = r#"{"kind": "composite", "parts": [{"q": 0.5, "kind": "cycle", "k": 3},
        {"q": 0.5, "kind": "condorcet", "k": 3, "gap": 0.4}]}"#;
    std::fs::write(d.join("spec.json"), spec).unwrap();
    std::fs::write(d.join("pol.json"), r#"{"contexts": 2, "actions": 3, "policies": [[0, 0], [1, 0], [2, 1]]}"#)
        .unwrap();
    assert_eq!(code(&vnw(d, &["make-env", "--spec", "spec.json", "--seed", "1"])), 0);
    let out = vnw(
        d,
        &[
            "spar-exp4",
            "--env",
            "env.json",
            "--policies",
            "pol.json",
            "--T",
            "2000",
            "--seed",
            "7",
            "--out",
            "run.csv",
            "--mixture-out",
            "mix.json",
            "--analysis",
            "analysis.jsonl",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.join("run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2001);
    let first: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(d.join("analysis.jsonl")).unwrap().lines().next().unwrap())
            .unwrap();
    assert_eq!(first["row_rewards"].as_array().unwrap().len(), 3);
    let mix = json(&d.join("mix.json"));
    assert!(mix["atoms"].as_array().unwrap().len() <= 3);

    // A short horizon caps p_min at 1/K and says so.
    let out = vnw(d, &["spar-exp4", "--env", "env.json", "--T", "3", "--out", "short.csv"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("p_min"));
}

#[test]
fn staged_commands_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&vnw(d, &["make-env", "--kind", "five-arm", "--out-dir", "s"])), 0);
    for out in ["a.jsonl", "b.jsonl"] {
        assert_eq!(code(&vnw(d, &["explore", "--env", "s/env.json", "--m", "500", "--seed", "3", "--out", out])), 0);
    }
    assert_eq!(std::fs::read(d.join("a.jsonl")).unwrap(), std::fs::read(d.join("b.jsonl")).unwrap());
    for out in ["a.json", "b.json"] {
        let args =
            ["train-fpl", "--log", "a.jsonl", "--env", "s/env.json", "--eps", "0.3", "--seed", "9", "--out", out];
        assert_eq!(code(&vnw(d, &args)), 0);
    }
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
    // Theory sizing on this log asks for far more rounds than allowed.
    let out = vnw(d, &["train-fpl", "--log", "a.jsonl", "--env", "s/env.json", "--eps", "0.3", "--sizing", "theory"]);
    assert_eq!(code(&out), 2);
}
