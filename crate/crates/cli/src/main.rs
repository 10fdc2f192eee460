//! Command-line front end: config-driven solve / simulate / evaluate /
//! compare / sweep with CSV + JSON artifacts and a reproducibility manifest.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Validation(String),
    Solver(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl From<recycle_control::Error> for CliError {
    fn from(e: recycle_control::Error) -> Self {
        use recycle_control::Error::*;
        match e {
            Validation(m) | Domain(m) => CliError::Validation(m),
            Solver(m) => CliError::Solver(m),
            Eval(m) => CliError::Solver(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

const EXIT_CODE_HELP: &str = "Exit codes:
  0  success
  2  config error (unreadable or invalid config file / flags)
  3  validation error (parameter invariants violated)
  4  solver or evaluation error
  5  i/o error (artifacts could not be written)";

#[derive(Parser)]
#[command(
    name = "recycle-control",
    version,
    about = "Solve, simulate and evaluate the regulated recycling-rate pricing/investment model",
    after_help = EXIT_CODE_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the value-function boundary problem; writes hjb_solution.csv (x, W, Y)
    Solve(CommonArgs),
    /// Simulate regulated sample paths; writes path_####.csv (t, r, L, U, u, p)
    Simulate(CommonArgs),
    /// Monte Carlo estimate of the discounted profit for one policy
    Evaluate(CommonArgs),
    /// Evaluate the solved slope k* against other slopes under common random numbers
    Compare(CommonArgs),
    /// Re-solve and re-evaluate across values of one model parameter
    Sweep(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Simulate(_) => "simulate",
            Command::Evaluate(_) => "evaluate",
            Command::Compare(_) => "compare",
            Command::Sweep(_) => "sweep",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::Simulate(a)
            | Command::Evaluate(a)
            | Command::Compare(a)
            | Command::Sweep(a) => a,
        }
    }
}

/// Shared flags; any value given here overrides the config file, which in
/// turn overrides the built-in defaults.
#[derive(Args)]
struct CommonArgs {
    /// Config file: flat TOML, or a manifest.json emitted by a previous run
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for path-parallel evaluation
    #[arg(long)]
    threads: Option<usize>,

    // model parameters
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Diffusion variance sigma^2
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    a0: Option<f64>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
    #[arg(long)]
    c_v: Option<f64>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long)]
    c_l: Option<f64>,

    // simulation
    #[arg(long)]
    r0: Option<f64>,
    /// Simulation horizon T
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Seed for single-path simulation
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    regulated: Option<bool>,
    /// Number of paths written by `simulate`
    #[arg(long)]
    sim_paths: Option<usize>,

    // shooting
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    eps_boundary: Option<f64>,
    #[arg(long)]
    k_lo: Option<f64>,
    #[arg(long)]
    k_hi: Option<f64>,
    #[arg(long)]
    tol_k: Option<f64>,
    #[arg(long)]
    tol_terminal: Option<f64>,

    // evaluation
    #[arg(long)]
    n_paths: Option<usize>,
    /// Base seed for Monte Carlo path streams
    #[arg(long)]
    base_seed: Option<u64>,
    /// Monte Carlo horizon (default 40/alpha)
    #[arg(long)]
    eval_t: Option<f64>,
    /// Policy: "optimal", "zero" or "fixed:<u>:<p>"
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    disc_allowance: Option<f64>,

    // compare / sweep
    /// Slopes compared against the solved k*, comma separated
    #[arg(long, value_delimiter = ',')]
    k_values: Option<Vec<f64>>,
    /// Parameter swept by `sweep`
    #[arg(long)]
    param_name: Option<String>,
    /// Sweep values, comma separated
    #[arg(long, value_delimiter = ',')]
    param_values: Option<Vec<f64>>,
}

fn resolve_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        config::load_file(path, &mut cfg)?;
    }
    macro_rules! over {
        ($($f:ident),* $(,)?) => {
            $(if let Some(v) = &args.$f { cfg.$f = v.clone(); })*
        };
    }
    over!(
        gamma, delta, sigma2, alpha, a0, a1, a2, c_v, p0, c_l, r0, t, dt, seed, regulated,
        sim_paths, grid_n, eps_boundary, k_lo, k_hi, tol_k, tol_terminal, n_paths, base_seed,
        policy, disc_allowance, k_values
    );
    if let Some(v) = &args.out {
        cfg.output_dir = v.clone();
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if args.eval_t.is_some() {
        cfg.eval_t = args.eval_t;
    }
    if args.param_name.is_some() {
        cfg.param_name = args.param_name.clone();
    }
    if let Some(v) = &args.param_values {
        cfg.param_values = v.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let name = cli.command.name();
    let cfg = resolve_config(cli.command.args())?;
    match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(|| commands::dispatch(name, &cfg))
        }
        None => commands::dispatch(name, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
