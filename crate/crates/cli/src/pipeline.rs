use std::path::Path;

use vnw_core::batch::{empirical_payoff_bound, estimator_blocks, explore_uniform_with, make_oracle};
use vnw_core::certify::certify_marginals;
use vnw_core::env::{PlayedRound, RegretTracker};
use vnw_core::io::{env_to_json, log_to_jsonl, mixture_to_json};
use vnw_core::online::{sparring_exp4p, SparringOptions, SparringRound};
use vnw_core::rng::{stream, streams};
use vnw_core::solvers::{fpl_rounds, pgd_rounds, projected_gd, sized_rounds, sparring_fpl};
use vnw_core::{Certificate, ContextualEnvironment, Experts, ExplorationLog, PolicyClass, PolicyMixture, SolverOutput};

use crate::config::{Algorithm, ExperimentConfig, Mode, Sizing};
use crate::output::{certificate_json, rounds_csv};
use crate::{at, write_file, CliError};

#[derive(Debug, Clone)]
pub struct TrainParams {
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub sizing: Sizing,
    pub rounds: Option<usize>,
    pub inner_rounds: Option<usize>,
    pub max_rounds: usize,
    pub cap: usize,
}

/// Solves the compact game of a log with FPL or projected GD.
pub fn train_batch(
    log: &ExplorationLog,
    class: &PolicyClass,
    algorithm: Algorithm,
    params: &TrainParams,
) -> Result<SolverOutput, CliError> {
    let game = estimator_blocks(log);
    let oracle = make_oracle(&game, class, params.cap).map_err(at("oracle"))?;
    let l = match params.sizing {
        Sizing::Desk => {
            let l = empirical_payoff_bound(&game, class, params.cap).map_err(at("payoff bound"))?;
            // An all-zero estimate makes every mixture optimal; any scale works.
            if l > 0.0 {
                l
            } else {
                game.l()
            }
        }
        Sizing::Theory => game.l(),
    };
    let sized = |rounds: f64| sized_rounds(rounds, params.max_rounds).map_err(at("sizing"));
    match algorithm {
        Algorithm::Fpl => {
            let n = match (params.rounds, params.sizing) {
                (Some(n), _) => n,
                (None, Sizing::Desk) => sized(pgd_rounds(l, params.epsilon))?,
                (None, Sizing::Theory) => sized(fpl_rounds(l, log.m(), params.epsilon, params.delta))?,
            };
            sparring_fpl(&game, oracle.as_ref(), n, l, params.seed).map_err(at("sparring fpl"))
        }
        Algorithm::Pgd => {
            let default = || sized(pgd_rounds(l, params.epsilon));
            let n_out = params.rounds.map_or_else(default, Ok)?;
            let n_in = params.inner_rounds.map_or_else(default, Ok)?;
            projected_gd(&game, oracle.as_ref(), n_out, n_in, l).map_err(at("projected gd"))
        }
        Algorithm::SparExp4 => Err(CliError::Config("spar-exp4 does not train from a log".into())),
    }
}

/// `⌈K^{2/3} T^{2/3} Ψ^{1/3}⌉` with `Ψ = ln(|Π|/δ)`.
pub fn full_explore_rounds(k: usize, horizon: usize, ln_class_size: f64, delta: f64) -> usize {
    let psi = ln_class_size - delta.ln();
    ((k as f64).powf(2.0 / 3.0) * (horizon as f64).powf(2.0 / 3.0) * psi.cbrt()).ceil() as usize
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub explore_rounds: Option<usize>,
    pub horizon: usize,
    pub certificate: Certificate,
    pub final_regret: f64,
}

pub const ENV_FILE: &str = "env.json";
pub const LOG_FILE: &str = "log.jsonl";
pub const MIXTURE_FILE: &str = "mixture.json";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const REGRET_FILE: &str = "regret.csv";

/// Runs a whole experiment and writes its artifacts to `out_dir`. A failing
/// certificate is reported in the summary, not as an error.
pub fn run_pipeline(config: &ExperimentConfig, out_dir: &Path) -> Result<PipelineSummary, CliError> {
    config.validate()?;
    let env = config.environment()?;
    let class = config.policy_class(&env)?;
    write_file(&out_dir.join(ENV_FILE), &env_to_json(&env))?;

    let (mixture, report, transcript, explore_rounds, horizon) = match config.algorithm {
        Algorithm::SparExp4 => {
            let horizon = config.horizon.expect("validated");
            let out = sparring_exp4p(
                &env,
                &class,
                Experts::from(&class),
                horizon,
                config.delta,
                config.seed,
                &SparringOptions::default(),
            )
            .map_err(at("sparring exp4.p"))?;
            let mixture = out.average.to_atoms(config.enumeration_cap).map_err(at("online to batch"))?;
            let report = format!("{{\"algorithm\":\"sparring_exp4p\",\"rounds\":{horizon}}}");
            (mixture, report, out.transcript, None, horizon)
        }
        Algorithm::Fpl | Algorithm::Pgd => {
            let (m, horizon) = match config.mode {
                Mode::ExploreThenExploit => {
                    let m = config.explore_rounds.expect("validated");
                    (m, config.horizon.unwrap_or(m))
                }
                Mode::FullExploreExploit => {
                    let t = config.horizon.expect("validated");
                    (full_explore_rounds(env.k(), t, class.ln_size(), config.delta), t)
                }
            };
            if horizon < m {
                return Err(CliError::Config(format!("horizon {horizon} is shorter than the {m} exploration rounds")));
            }
            let mut nature = stream(config.seed, streams::NATURE);
            let mut learner = stream(config.seed, streams::LEARNER);
            let log = explore_uniform_with(&env, m, &mut nature, &mut learner).map_err(at("explore"))?;
            write_file(&out_dir.join(LOG_FILE), &log_to_jsonl(&log))?;
            let params = TrainParams {
                epsilon: config.epsilon,
                delta: config.delta,
                seed: config.seed,
                sizing: config.sizing,
                rounds: config.rounds,
                inner_rounds: config.inner_rounds,
                max_rounds: config.max_rounds,
                cap: config.enumeration_cap,
            };
            let solved = train_batch(&log, &class, config.algorithm, &params)?;
            let mixture = solved.mixture().map_err(at("mixture"))?;
            let report = serde_json::to_string(&solved.report).expect("serializable");
            let transcript = explore_then_exploit(&env, &class, &log, &mixture, horizon, &mut nature, &mut learner)?;
            (mixture, report, transcript, Some(m), horizon)
        }
    };

    write_file(&out_dir.join(MIXTURE_FILE), &mixture_to_json(&mixture, &report))?;
    let marginals: Vec<f64> =
        mixture.marginals(env.num_contexts(), env.k()).iter().flat_map(|t| t.weights().to_vec()).collect();
    let certificate =
        certify_marginals(&env, &class, &marginals, config.epsilon, config.enumeration_cap).map_err(at("certify"))?;
    write_file(&out_dir.join(CERTIFICATE_FILE), &certificate_json(MIXTURE_FILE, &certificate))?;
    write_file(&out_dir.join(REGRET_FILE), &rounds_csv(&transcript))?;
    Ok(PipelineSummary {
        explore_rounds,
        horizon,
        final_regret: transcript.last().map_or(0.0, |r| r.cumulative_regret),
        certificate,
    })
}

/// The exploration rounds of `log` followed by `horizon - m` rounds where both
/// actions are drawn independently from the mixture's marginal at the context.
fn explore_then_exploit(
    env: &ContextualEnvironment,
    class: &PolicyClass,
    log: &ExplorationLog,
    mixture: &PolicyMixture,
    horizon: usize,
    nature: &mut vnw_core::rng::StreamRng,
    learner: &mut vnw_core::rng::StreamRng,
) -> Result<Vec<SparringRound>, CliError> {
    let marginals = mixture.marginals(env.num_contexts(), env.k());
    let mut tracker = RegretTracker::new(env, class).map_err(at("regret"))?;
    let mut transcript = Vec::with_capacity(horizon);
    let mut record = |round: usize, context: usize, a: usize, b: usize, r: i8| {
        tracker.push(PlayedRound { context, a, b });
        transcript.push(SparringRound {
            round,
            context,
            a,
            b,
            r,
            cumulative_regret: tracker.regret(),
            row_rewards: None,
            col_rewards: None,
        });
    };
    for d in log.records() {
        record(d.i, d.context, d.a, d.b, d.r);
    }
    for t in log.m()..horizon {
        let x = env.sample_round(nature);
        let a = marginals[x].sample(learner);
        let b = marginals[x].sample(learner);
        let r = env.duel(x, a, b, nature);
        record(t, x, a, b, r);
    }
    Ok(transcript)
}
