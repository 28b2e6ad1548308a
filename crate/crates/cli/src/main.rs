use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vnw_cli::config::load_class;
use vnw_cli::output::{certificate_csv, certificate_json, rounds_csv, winners_csv, winners_json};
use vnw_cli::{
    at, read_file, run_pipeline, train_batch, write_file, Algorithm, CliError, ExperimentConfig, Sizing, TrainParams,
};
use vnw_core::batch::explore_uniform;
use vnw_core::certify::certify;
use vnw_core::env::make_environment;
use vnw_core::io::{
    env_from_json, env_to_json, log_from_jsonl, log_to_jsonl, matrix_from_json, mixture_from_json, mixture_to_json,
};
use vnw_core::online::{sparring_exp4p, SparringOptions};
use vnw_core::policy::DEFAULT_ENUMERATION_CAP;
use vnw_core::winners::winner_report;
use vnw_core::{solve_von_neumann, ContextualEnvironment, EnvKind, Experts};

#[derive(Parser)]
#[command(name = "vnw", version, about = "Von Neumann winners for contextual dueling bandits")]
struct Cli {
    /// Seed for every random stream (default 0; overrides a config file's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for outputs without an explicit path.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Format of reports printed to stdout (winners, certify).
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an environment file.
    MakeEnv(MakeEnvArgs),
    /// Winner concepts of one preference matrix.
    Winners(WinnersArgs),
    /// Uniform exploration; writes a JSON-lines log.
    Explore(ExploreArgs),
    /// Sparring follow-the-perturbed-leader on a saved log.
    TrainFpl(TrainArgs),
    /// Projected gradient descent on a saved log.
    TrainPgd(TrainArgs),
    /// Two Exp4.P learners sparring online; writes a per-round CSV.
    SparExp4(SparArgs),
    /// Exact certificate of a mixture against the environment.
    Certify(CertifyArgs),
    /// The whole pipeline from a config file.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cycle,
    Condorcet,
    Clone,
    FiveArm,
    RandomSkew,
    Utility,
}

#[derive(Args)]
struct MakeEnvArgs {
    #[arg(long, value_enum, required_unless_present = "spec")]
    kind: Option<Kind>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    gap: f64,
    /// Arms below the clone cycle.
    #[arg(long, default_value_t = 1)]
    others: usize,
    /// Utilities, comma separated.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Generator recipe as JSON, e.g. a composite of several contexts.
    #[arg(long, conflicts_with = "kind")]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WinnersArgs {
    #[arg(long, required_unless_present = "env", conflicts_with = "env")]
    matrix: Option<PathBuf>,
    #[arg(long)]
    env: Option<PathBuf>,
    /// Context label (1-indexed) when reading an environment.
    #[arg(long, default_value_t = 1)]
    context: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    log: PathBuf,
    /// Environment the log came from; defaults to env.json beside the log.
    #[arg(long)]
    env: Option<PathBuf>,
    /// Tabular policy class; the full mapping class when absent.
    #[arg(long)]
    policies: Option<PathBuf>,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = Sizing::Desk)]
    sizing: Sizing,
    /// Solver rounds (N, or N_out for projected GD).
    #[arg(long)]
    rounds: Option<usize>,
    /// Projection rounds N_in (projected GD only).
    #[arg(long)]
    inner_rounds: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    max_rounds: usize,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SparArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long = "T")]
    horizon: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long)]
    policies: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the averaged mixture here.
    #[arg(long)]
    mixture_out: Option<PathBuf>,
    /// Also write JSON lines with each round's hypothetical duel row and column.
    #[arg(long)]
    analysis: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    mixture: PathBuf,
    #[arg(long)]
    policies: Option<PathBuf>,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
    /// Also write the certificate here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_env(path: &Path) -> Result<ContextualEnvironment, CliError> {
    env_from_json(&read_file(path)?).map_err(at("environment"))
}

fn unit_interval(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must lie in (0, 1)")))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    let out_or = |out: Option<PathBuf>, name: &str| out.unwrap_or_else(|| cli.out_dir.join(name));
    match cli.command {
        Command::MakeEnv(args) => {
            let kind = match (&args.spec, args.kind) {
                (Some(path), _) => {
                    serde_json::from_str::<EnvKind>(&read_file(path)?).map_err(|e| CliError::Config(e.to_string()))?
                }
                (None, Some(Kind::Cycle)) => EnvKind::Cycle { k: args.k },
                (None, Some(Kind::Condorcet)) => EnvKind::Condorcet { k: args.k, gap: args.gap },
                (None, Some(Kind::Clone)) => EnvKind::Clone { others: args.others },
                (None, Some(Kind::FiveArm)) => EnvKind::FiveArm,
                (None, Some(Kind::RandomSkew)) => EnvKind::RandomSkew { k: args.k },
                (None, Some(Kind::Utility)) => EnvKind::Utility { values: args.values },
                (None, None) => unreachable!("clap requires --kind or --spec"),
            };
            let env = make_environment(&kind, seed).map_err(at("make-env"))?;
            write_file(&out_or(args.out, "env.json"), &env_to_json(&env))
        }
        Command::Winners(args) => {
            let p = match (&args.matrix, &args.env) {
                (Some(path), _) => matrix_from_json(&read_file(path)?).map_err(at("matrix"))?,
                (None, Some(path)) => {
                    let env = load_env(path)?;
                    if args.context == 0 || args.context > env.num_contexts() {
                        return Err(CliError::Config(format!(
                            "context label {} is outside 1..={}",
                            args.context,
                            env.num_contexts()
                        )));
                    }
                    env.matrix(args.context - 1).clone()
                }
                (None, None) => unreachable!("clap requires --matrix or --env"),
            };
            let solution = solve_von_neumann(&p, args.eps).map_err(at("solve"))?;
            let report = winner_report(&p).map_err(at("winners"))?;
            match cli.format {
                Format::Json => print!("{}", winners_json(&solution, &report)),
                Format::Csv => print!("{}", winners_csv(&solution, &report)),
            }
            Ok(())
        }
        Command::Explore(args) => {
            let env = load_env(&args.env)?;
            let log = explore_uniform(&env, args.m, seed).map_err(at("explore"))?;
            write_file(&out_or(args.out, "log.jsonl"), &log_to_jsonl(&log))
        }
        Command::TrainFpl(args) => train(args, Algorithm::Fpl, seed, &out_or),
        Command::TrainPgd(args) => train(args, Algorithm::Pgd, seed, &out_or),
        Command::SparExp4(args) => {
            unit_interval("delta", args.delta)?;
            let env = load_env(&args.env)?;
            let class = load_class(args.policies.as_deref(), &env)?;
            let options = SparringOptions { analysis: args.analysis.is_some(), keep_history: false };
            let out = sparring_exp4p(&env, &class, Experts::from(&class), args.horizon, args.delta, seed, &options)
                .map_err(at("sparring exp4.p"))?;
            if out.p_min * env.k() as f64 >= 1.0 - 1e-12 {
                eprintln!("warning: the horizon is short enough that p_min is capped at 1/K; play is uniform");
            }
            write_file(&out_or(args.out, "run.csv"), &rounds_csv(&out.transcript))?;
            if let Some(path) = args.analysis {
                let lines: String =
                    out.transcript.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect();
                write_file(&path, &lines)?;
            }
            if let Some(path) = args.mixture_out {
                let mixture = out.average.to_atoms(args.cap).map_err(at("online to batch"))?;
                let report = format!("{{\"algorithm\":\"sparring_exp4p\",\"rounds\":{}}}", args.horizon);
                write_file(&path, &mixture_to_json(&mixture, &report))?;
            }
            Ok(())
        }
        Command::Certify(args) => {
            unit_interval("eps", args.eps)?;
            let env = load_env(&args.env)?;
            let class = load_class(args.policies.as_deref(), &env)?;
            let mixture = mixture_from_json(&read_file(&args.mixture)?).map_err(at("mixture"))?;
            let cert = certify(&env, &class, &mixture, args.eps, args.cap).map_err(at("certify"))?;
            let name = args.mixture.display().to_string();
            let text = match cli.format {
                Format::Json => certificate_json(&name, &cert),
                Format::Csv => certificate_csv(&name, &cert),
            };
            print!("{text}");
            if let Some(path) = args.out {
                write_file(&path, &text)?;
            }
            if cert.pass {
                Ok(())
            } else {
                Err(CliError::CertificationFailed { margin: cert.margin, epsilon: cert.epsilon })
            }
        }
        Command::Run(args) => {
            let mut config = ExperimentConfig::load(&args.config)?;
            if let Some(s) = cli.seed {
                config.seed = s;
            }
            let summary = run_pipeline(&config, &cli.out_dir)?;
            let c = &summary.certificate;
            println!(
                "horizon {} explore {} margin {} epsilon {} pass {} regret {}",
                summary.horizon,
                summary.explore_rounds.map_or("-".to_string(), |m| m.to_string()),
                c.margin,
                c.epsilon,
                c.pass,
                summary.final_regret
            );
            if c.pass {
                Ok(())
            } else {
                Err(CliError::CertificationFailed { margin: c.margin, epsilon: c.epsilon })
            }
        }
    }
}

fn train(
    args: TrainArgs,
    algorithm: Algorithm,
    seed: u64,
    out_or: &dyn Fn(Option<PathBuf>, &str) -> PathBuf,
) -> Result<(), CliError> {
    unit_interval("eps", args.eps)?;
    unit_interval("delta", args.delta)?;
    let env_path = args.env.clone().unwrap_or_else(|| args.log.parent().unwrap_or(Path::new("")).join("env.json"));
    let env = load_env(&env_path)?;
    let class = load_class(args.policies.as_deref(), &env)?;
    let log = log_from_jsonl(&read_file(&args.log)?, env.num_contexts(), env.k()).map_err(at("log"))?;
    let params = TrainParams {
        epsilon: args.eps,
        delta: args.delta,
        seed,
        sizing: args.sizing,
        rounds: args.rounds,
        inner_rounds: args.inner_rounds,
        max_rounds: args.max_rounds,
        cap: args.cap,
    };
    let solved = train_batch(&log, &class, algorithm, &params)?;
    let mixture = solved.mixture().map_err(at("mixture"))?;
    let report = serde_json::to_string(&solved.report).expect("serializable");
    write_file(&out_or(args.out, "mixture.json"), &mixture_to_json(&mixture, &report))
}
