//! `avar-lab`: asymptotic-variance computations from the command line.
//!
//! Reports go to stdout (or `--out`) as JSON or CSV; diagnostics go to
//! stderr as one JSON object per line. Exit codes: 0 success, 2 invalid
//! input, 3 horizon too short for batch means, 4 numerical failure.

mod commands;
mod failure;
mod input;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use failure::Failure;

pub const THREADS_ENV: &str = "AVAR_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "avar-lab",
    version,
    about = "Asymptotic variance of Markov processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact variance, variational values, gap and sector constant of a finite chain.
    Chain(ChainArgs),
    /// Variance of a reflected diffusion on the half-line by quadrature.
    Diffusion1d(Diffusion1dArgs),
    /// Batch-means Monte Carlo estimate.
    Simulate(SimulateArgs),
    /// Mean exit time from a set of states and its spectral bound.
    Exittime(ExittimeArgs),
    /// Re-runs the invocation recorded in a report's manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    /// Model file `{"n": .., "Q": [[..]], "labels": [..], "f": [..]}`.
    #[arg(long)]
    pub model: String,
    /// Observable as comma-separated values; defaults to the model's `f`.
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    /// Subtract the stationary mean from `f` instead of rejecting it.
    #[arg(long)]
    pub center: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Simpson,
    Trapezoid,
}

#[derive(Debug, Clone, Args)]
pub struct Diffusion1dArgs {
    /// Spec `{"a": .., "pi": .., "x0": .., "x_max": .., "n_grid": ..}`.
    #[arg(long)]
    pub model: String,
    /// Observable as an expression in `x`; defaults to the spec's `f`.
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    /// Second spec with a smaller coefficient and the same density and grid.
    #[arg(long)]
    pub compare: Option<String>,
    #[arg(long, value_enum, default_value_t = RuleArg::Simpson)]
    pub rule: RuleArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(subcommand)]
    pub target: SimTarget,
}

#[derive(Debug, Clone, Subcommand)]
pub enum SimTarget {
    /// Two-dimensional Ornstein-Uhlenbeck process with rotation strength `c`.
    Ou(OuArgs),
    /// Finite chain by exact jump simulation.
    Chain(SimChainArgs),
    /// Reflected half-line diffusion by Euler-Maruyama.
    Halfline(SimHalflineArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimCommon {
    #[arg(long)]
    pub seed: u64,
    /// Horizon per replica, burn-in included.
    #[arg(long = "T", default_value_t = 1e5)]
    pub horizon: f64,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub burn_in: f64,
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Exact,
    Euler,
}

#[derive(Debug, Clone, Args)]
pub struct OuArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub c: f64,
    /// Direction of the linear observable `x -> v.x`.
    #[arg(long, allow_hyphen_values = true, default_value = "1,0")]
    pub v: String,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Exact)]
    pub integrator: IntegratorArg,
    #[command(flatten)]
    pub common: SimCommon,
}

#[derive(Debug, Clone, Args)]
pub struct SimChainArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    #[command(flatten)]
    pub common: SimCommon,
}

#[derive(Debug, Clone, Args)]
pub struct SimHalflineArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    #[command(flatten)]
    pub common: SimCommon,
}

#[derive(Debug, Clone, Args)]
pub struct ExittimeArgs {
    #[arg(long)]
    pub model: String,
    /// States as comma-separated indices or labels.
    #[arg(long)]
    pub omega: String,
    /// Reject non-reversible chains instead of warning.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A report written by any other subcommand.
    pub report: String,
    #[arg(long)]
    pub out: Option<String>,
}

fn configure_threads() -> Result<Option<usize>, Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::usage(format!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    // A second initialization only happens in tests and is harmless.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(Some(n))
}

fn run(args: Vec<String>) -> Result<(), Failure> {
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(Failure::usage(e.to_string().trim_end().to_string())),
    };
    let threads = configure_threads()?;
    let recorded: Vec<String> = args[1..].to_vec();
    match cli.command {
        Command::Replay(r) => {
            let recorded = input::read_manifest_args(&r.report)?;
            let mut argv = vec![args[0].clone()];
            argv.extend(recorded.iter().cloned());
            let cli = Cli::try_parse_from(&argv).map_err(|e| Failure::usage(e.to_string()))?;
            if matches!(cli.command, Command::Replay(_)) {
                return Err(Failure::usage(
                    "a replay manifest cannot itself be a replay".into(),
                ));
            }
            commands::dispatch(cli.command, recorded, threads, Some(r.out))
        }
        command => commands::dispatch(command, recorded, threads, None),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::from(failure.code)
        }
    }
}
