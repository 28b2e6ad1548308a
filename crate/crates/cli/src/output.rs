use std::fmt::Write as _;

use serde::Serialize;
use vnw_core::io::fmt_f64;
use vnw_core::online::SparringRound;
use vnw_core::{Certificate, GameSolution, WinnerReport};

pub const ROUNDS_HEADER: &str = "round,context,a,b,r,cumulative_regret";

/// Per-round CSV with a header line.
pub fn rounds_csv(rounds: &[SparringRound]) -> String {
    let mut out = String::with_capacity(32 * (rounds.len() + 1));
    out.push_str(ROUNDS_HEADER);
    out.push('\n');
    for r in rounds {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.round, r.context, r.a, r.b, r.r, fmt_f64(r.cumulative_regret));
    }
    out
}

#[derive(Serialize)]
pub struct CertificateFile<'a> {
    pub mixture: &'a str,
    #[serde(flatten)]
    pub certificate: &'a Certificate,
}

pub fn certificate_json(mixture: &str, certificate: &Certificate) -> String {
    let mut s = serde_json::to_string_pretty(&CertificateFile { mixture, certificate }).expect("serializable");
    s.push('\n');
    s
}

pub fn certificate_csv(mixture: &str, c: &Certificate) -> String {
    format!(
        "mixture,margin,epsilon,pass,mode,opponents\n{mixture},{},{},{},{},{}\n",
        fmt_f64(c.margin),
        fmt_f64(c.epsilon),
        c.pass,
        c.mode,
        c.opponents
    )
}

/// Winner labels are 1-indexed, matching how arms are numbered for users.
#[derive(Serialize)]
pub struct WinnerLabels {
    pub condorcet: Option<usize>,
    pub von_neumann_support: Vec<usize>,
    pub copeland_strict: Vec<usize>,
    pub borda: Vec<usize>,
    pub random_walk: usize,
}

#[derive(Serialize)]
pub struct WinnersOutput<'a> {
    pub solution: &'a GameSolution,
    pub report: &'a WinnerReport,
    pub labels: WinnerLabels,
}

fn argmax_set(values: &[f64]) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&i| values[i] == best).map(|i| i + 1).collect()
}

pub fn winner_labels(solution: &GameSolution, report: &WinnerReport) -> WinnerLabels {
    let strict: Vec<f64> = report.copeland_strict.iter().map(|&s| s as f64).collect();
    WinnerLabels {
        condorcet: report.condorcet.map(|a| a + 1),
        von_neumann_support: (0..solution.strategy.len())
            .filter(|&a| solution.strategy.weights()[a] > 0.0)
            .map(|a| a + 1)
            .collect(),
        copeland_strict: argmax_set(&strict),
        borda: argmax_set(&report.borda),
        random_walk: report.random_walk.winner + 1,
    }
}

pub fn winners_json(solution: &GameSolution, report: &WinnerReport) -> String {
    let out = WinnersOutput { solution, report, labels: winner_labels(solution, report) };
    let mut s = serde_json::to_string_pretty(&out).expect("serializable");
    s.push('\n');
    s
}

pub fn winners_csv(solution: &GameSolution, report: &WinnerReport) -> String {
    let mut out = String::from("arm,von_neumann,copeland_strict,copeland_weak,copeland_net,borda,random_walk\n");
    for a in 0..solution.strategy.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            a + 1,
            fmt_f64(solution.strategy.weights()[a]),
            report.copeland_strict[a],
            report.copeland_weak[a],
            report.copeland_net[a],
            fmt_f64(report.borda[a]),
            fmt_f64(report.random_walk.stationary.weights()[a])
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use vnw_core::env::five_arm_matrix;
    use vnw_core::winners::winner_report;

    #[test]
    fn csv_header_and_rows() {
        let rounds = vec![SparringRound {
            round: 0,
            context: 1,
            a: 2,
            b: 0,
            r: -1,
            cumulative_regret: 0.5,
            row_rewards: None,
            col_rewards: None,
        }];
        assert_eq!(rounds_csv(&rounds), "round,context,a,b,r,cumulative_regret\n0,1,2,0,-1,5.0000000000000000e-1\n");
    }

    #[test]
    fn five_arm_labels() {
        let p = five_arm_matrix();
        let s = vnw_core::solve_von_neumann(&p, 1e-6).unwrap();
        let r = winner_report(&p).unwrap();
        let labels = winner_labels(&s, &r);
        assert_eq!(labels.von_neumann_support, vec![1, 2, 3]);
        assert_eq!(labels.copeland_strict, vec![4]);
        assert_eq!(labels.borda, vec![4]);
        assert_eq!(labels.random_walk, 4);
        assert_eq!(labels.condorcet, None);
        assert_eq!(winners_csv(&s, &r).lines().count(), 6);
    }
}
