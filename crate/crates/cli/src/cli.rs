use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use retrovote_core::attacks::{
    mean_phantom_empirical, mean_phantom_ratio, median_phantom_bound, median_phantom_empirical,
    quadratic_collusion_oracle, PhantomOracleInput,
};
use retrovote_core::prefgen::load_preference_matrix;
use retrovote_core::{
    BudgetMode, DistributionSpec, Engine, Error, Execution, ParetoSupport, ProjectSelection,
    SimulationConfig,
};
use serde::Serialize;

use crate::server;

pub const EXIT_INVALID_CONFIG: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_RUN_FAILED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "retrovote",
    version,
    about = "Retroactive funding vote simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo campaign and write the report.
    Simulate(Box<SimulateArgs>),
    /// Evaluate a closed-form attack result next to its brute-force value.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistributionArg {
    Pareto,
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SupportArg {
    Lomax,
    Standard,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BudgetModeArg {
    BudgetPreserving,
    Literal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SelectionArg {
    TopBySupporters,
    RandomPair,
}

#[derive(Debug, Default, Args)]
pub struct SimulateArgs {
    /// Config document to start from; flags override its fields.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub voters: Option<usize>,
    #[arg(long)]
    pub projects: Option<usize>,
    #[arg(long)]
    pub tokens: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Normalization constant c (sum of voter weights).
    #[arg(long)]
    pub constant: Option<f64>,
    #[arg(long, value_enum)]
    pub distribution: Option<DistributionArg>,
    /// Pareto shape.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Pareto support: lomax starts at 0, standard at 1.
    #[arg(long, value_enum)]
    pub support: Option<SupportArg>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub attackers: Option<usize>,
    #[arg(long)]
    pub colluding: Option<usize>,
    #[arg(long, value_enum)]
    pub selection: Option<SelectionArg>,
    #[arg(long, value_enum)]
    pub budget_mode: Option<BudgetModeArg>,
    /// Preference table to use for every iteration instead of sampling.
    #[arg(long, value_name = "PATH")]
    pub preferences: Option<PathBuf>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Run iterations on the calling thread only.
    #[arg(long, conflicts_with = "threads")]
    pub sequential: bool,
    #[arg(long, default_value = "report.json", value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Two voters, two projects: honest versus pooled quadratic utility.
    QuadraticCollusion {
        #[arg(long, default_value_t = 1.0)]
        tokens: f64,
        #[arg(long)]
        json: bool,
    },
    /// Shrinkage of a mean when k near-zero ballots are added.
    MeanPhantom {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: usize,
        /// Allocations to attack; n unit allocations when omitted.
        #[arg(long, value_delimiter = ',')]
        allocs: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-12)]
        epsilon: f64,
        #[arg(long)]
        json: bool,
    },
    /// Upper bound on a median after k near-zero ballots are added.
    MedianPhantom {
        #[arg(long, value_delimiter = ',', required = true)]
        allocs: Vec<f64>,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1e-9)]
        epsilon: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "RETROVOTE_PORT", default_value_t = server::DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Simulations allowed to run at once; further requests wait.
    #[arg(long)]
    pub max_concurrent: Option<usize>,
}

/// A failure carrying the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Oracle(cmd) => oracle(&cmd),
        Command::Serve(args) => serve(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn config_error(e: Error) -> Failure {
    match e {
        Error::Io(_) => Failure::new(EXIT_IO, e.to_string()),
        _ => Failure::new(EXIT_INVALID_CONFIG, e.to_string()),
    }
}

/// Applies `args` on top of the config document (or the defaults).
pub fn build_config(args: &SimulateArgs) -> Result<SimulationConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| {
                Failure::new(EXIT_INVALID_CONFIG, format!("{}: {e}", path.display()))
            })?
        }
        None => SimulationConfig::default(),
    };

    macro_rules! set {
        ($field:ident, $target:expr) => {
            if let Some(v) = args.$field {
                $target = v;
            }
        };
    }
    set!(seed, config.seed);
    set!(iterations, config.iterations);
    set!(voters, config.n_voters);
    set!(projects, config.n_projects);
    set!(tokens, config.total_tokens);
    set!(epsilon, config.epsilon);
    set!(constant, config.normalization_constant);
    set!(colluding, config.project_attack.colluding_count);
    if let Some(n) = args.attackers {
        config.voter_attack.attacker_count = Some(n);
    }
    if let Some(s) = args.selection {
        config.project_attack.selection = match s {
            SelectionArg::TopBySupporters => ProjectSelection::TopBySupporters,
            SelectionArg::RandomPair => ProjectSelection::RandomPair,
        };
    }
    if let Some(m) = args.budget_mode {
        config.project_attack.budget_mode = match m {
            BudgetModeArg::BudgetPreserving => BudgetMode::BudgetPreserving,
            BudgetModeArg::Literal => BudgetMode::Literal,
        };
    }
    config.distribution = distribution(args, config.distribution)?;
    Ok(config)
}

fn distribution(
    args: &SimulateArgs,
    current: DistributionSpec,
) -> Result<DistributionSpec, Failure> {
    let kind = match args.distribution {
        Some(kind) => kind,
        None => match current {
            DistributionSpec::Pareto { .. } => DistributionArg::Pareto,
            DistributionSpec::Uniform {} => DistributionArg::Uniform,
            DistributionSpec::Gaussian { .. } => DistributionArg::Gaussian,
        },
    };
    let mismatch = |flag: &str| {
        Failure::new(
            EXIT_INVALID_CONFIG,
            format!("--{flag} does not apply to the {kind:?} distribution"),
        )
    };
    Ok(match kind {
        DistributionArg::Pareto => {
            let (alpha, support) = match current {
                DistributionSpec::Pareto { alpha, support } => (alpha, support),
                _ => match DistributionSpec::default() {
                    DistributionSpec::Pareto { alpha, support } => (alpha, support),
                    _ => unreachable!("default distribution is Pareto"),
                },
            };
            if args.mu.is_some() {
                return Err(mismatch("mu"));
            }
            if args.sigma.is_some() {
                return Err(mismatch("sigma"));
            }
            DistributionSpec::Pareto {
                alpha: args.alpha.unwrap_or(alpha),
                support: match args.support {
                    Some(SupportArg::Lomax) => ParetoSupport::Lomax,
                    Some(SupportArg::Standard) => ParetoSupport::Standard,
                    None => support,
                },
            }
        }
        DistributionArg::Uniform => {
            for (flag, set) in [
                ("alpha", args.alpha.is_some()),
                ("support", args.support.is_some()),
                ("mu", args.mu.is_some()),
                ("sigma", args.sigma.is_some()),
            ] {
                if set {
                    return Err(mismatch(flag));
                }
            }
            DistributionSpec::Uniform {}
        }
        DistributionArg::Gaussian => {
            if args.alpha.is_some() {
                return Err(mismatch("alpha"));
            }
            if args.support.is_some() {
                return Err(mismatch("support"));
            }
            let (mu, sigma) = match current {
                DistributionSpec::Gaussian { mu, sigma } => (mu, sigma),
                _ => match DistributionSpec::gaussian() {
                    DistributionSpec::Gaussian { mu, sigma } => (mu, sigma),
                    _ => unreachable!(),
                },
            };
            DistributionSpec::Gaussian {
                mu: args.mu.unwrap_or(mu),
                sigma: args.sigma.unwrap_or(sigma),
            }
        }
    })
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let mut config = build_config(args)?;

    let preferences = match &args.preferences {
        Some(path) => {
            let m = load_preference_matrix(path, None)
                .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
            let dims = (m.n_voters(), m.n_projects());
            // The table fixes the shape unless the flags say otherwise.
            if args.voters.is_none() {
                config.n_voters = dims.0;
            }
            if args.projects.is_none() {
                config.n_projects = dims.1;
            }
            Some(m)
        }
        None => None,
    };

    let mut engine = Engine::new(config).map_err(config_error)?;
    if let Some(m) = preferences {
        engine = engine.with_preferences(m).map_err(config_error)?;
    }
    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel {
            threads: args.threads,
        }
    };
    let report = engine
        .with_execution(execution)
        .run()
        .map_err(|e| match e {
            Error::ThreadPool(_) => Failure::new(EXIT_INVALID_CONFIG, e.to_string()),
            _ => Failure::new(EXIT_RUN_FAILED, e.to_string()),
        })?;

    print!("{}", report.mean_table());
    report
        .write_json(&args.out)
        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", args.out.display())))?;
    eprintln!(
        "{} of {} iterations completed in {:.2}s; report written to {}",
        report.completed_iterations,
        report.config.iterations,
        report.runtime_seconds,
        args.out.display()
    );
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::new(EXIT_RUN_FAILED, e.to_string()))?;
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct MeanPhantomOutput {
    n: usize,
    k: usize,
    ratio: f64,
    empirical_ratio: f64,
}

#[derive(Serialize)]
struct MedianPhantomOutput {
    k: usize,
    bound: f64,
    bound_index: usize,
    median_index: usize,
    saturated: bool,
    empirical: f64,
}

fn oracle(cmd: &OracleCommand) -> Result<(), Failure> {
    let usage = |msg: String| Failure::new(EXIT_INVALID_CONFIG, msg);
    match cmd {
        OracleCommand::QuadraticCollusion { tokens, json } => {
            let out = quadratic_collusion_oracle(*tokens).map_err(|e| usage(e.to_string()))?;
            if *json {
                return print_json(&out);
            }
            println!("honest utility    {:.7}", out.honest_utility);
            println!("collusion utility {:.7}", out.collusion_utility);
            println!("ratio             {:.7}", out.gain_ratio);
        }
        OracleCommand::MeanPhantom {
            n,
            k,
            allocs,
            epsilon,
            json,
        } => {
            let allocs = match (allocs, n) {
                (Some(a), Some(n)) if a.len() != *n => {
                    return Err(usage(format!("--n {n} but {} allocations given", a.len())))
                }
                (Some(a), _) => a.clone(),
                (None, Some(n)) => vec![1.0; *n],
                (None, None) => return Err(usage("one of --n or --allocs is required".into())),
            };
            if allocs.is_empty() {
                return Err(usage("need at least one allocation".into()));
            }
            let pre = mean_phantom_empirical(&allocs, 0, 0.0);
            if !(pre.is_finite() && pre > 0.0) {
                return Err(usage("allocations must have a positive mean".into()));
            }
            let out = MeanPhantomOutput {
                n: allocs.len(),
                k: *k,
                ratio: mean_phantom_ratio(allocs.len(), *k),
                empirical_ratio: mean_phantom_empirical(&allocs, *k, *epsilon) / pre,
            };
            if *json {
                return print_json(&out);
            }
            println!("ratio     {}", out.ratio);
            println!("empirical {}", out.empirical_ratio);
        }
        OracleCommand::MedianPhantom {
            allocs,
            k,
            epsilon,
            json,
        } => {
            let input =
                PhantomOracleInput::new(allocs.clone(), *k).map_err(|e| usage(e.to_string()))?;
            if *epsilon >= input.allocations()[0] {
                return Err(usage(format!(
                    "--epsilon {epsilon} must be below the smallest allocation"
                )));
            }
            let bound = median_phantom_bound(&input);
            let out = MedianPhantomOutput {
                k: *k,
                bound: bound.value,
                bound_index: bound.index,
                median_index: bound.median_index,
                saturated: bound.saturated,
                empirical: median_phantom_empirical(allocs, *k, *epsilon),
            };
            if *json {
                return print_json(&out);
            }
            println!("bound     {}", out.bound);
            println!("index     {}", out.bound_index);
            println!("empirical {}", out.empirical);
            if out.saturated {
                println!("(bound saturated at the smallest allocation)");
            }
        }
    }
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<(), Failure> {
    let limit = args
        .max_concurrent
        .unwrap_or_else(server::default_worker_limit);
    if limit == 0 {
        return Err(Failure::new(
            EXIT_INVALID_CONFIG,
            "--max-concurrent must be positive",
        ));
    }
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| Failure::new(EXIT_IO, format!("could not start runtime: {e}")))?;
    runtime
        .block_on(server::serve(&args.host, args.port, limit))
        .map_err(|e| Failure::new(EXIT_IO, format!("{e:#}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> SimulateArgs {
        let mut argv = vec!["retrovote", "simulate"];
        argv.extend_from_slice(args);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Simulate(a) => *a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn no_flags_give_defaults() {
        assert_eq!(
            build_config(&parse(&[])).unwrap(),
            SimulationConfig::default()
        );
    }

    #[test]
    fn flags_override_fields() {
        let c = build_config(&parse(&[
            "--seed",
            "42",
            "--iterations",
            "7",
            "--voters",
            "10",
            "--projects",
            "20",
            "--epsilon",
            "0.001",
            "--constant",
            "50",
            "--alpha",
            "3",
            "--support",
            "standard",
            "--budget-mode",
            "literal",
            "--attackers",
            "4",
            "--colluding",
            "3",
        ]))
        .unwrap();
        assert_eq!(
            (c.seed, c.iterations, c.n_voters, c.n_projects),
            (42, 7, 10, 20)
        );
        assert_eq!((c.epsilon, c.normalization_constant), (0.001, 50.0));
        assert_eq!(
            c.distribution,
            DistributionSpec::Pareto {
                alpha: 3.0,
                support: ParetoSupport::Standard
            }
        );
        assert_eq!(c.project_attack.budget_mode, BudgetMode::Literal);
        assert_eq!(c.voter_attack.attacker_count, Some(4));
        assert_eq!(c.project_attack.colluding_count, 3);
    }

    #[test]
    fn distribution_flags_must_match_kind() {
        let c = build_config(&parse(&["--distribution", "gaussian", "--sigma", "0.5"])).unwrap();
        assert_eq!(
            c.distribution,
            DistributionSpec::Gaussian {
                mu: 1.0,
                sigma: 0.5
            }
        );
        assert!(build_config(&parse(&["--distribution", "uniform", "--alpha", "2"])).is_err());
        assert!(build_config(&parse(&["--mu", "2"])).is_err());
    }
}
