use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Frequency-constrained look-ahead dispatch with virtual inertia and droop
/// allocation.
#[derive(Debug, Parser)]
#[command(name = "fcsd", version, disable_help_subcommand = true)]
pub struct Cli {
    /// Seed for every random draw; overrides the scenario's own seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Print a one-line JSON summary on stdout instead of text.
    #[arg(long, global = true)]
    pub json_summary: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one look-ahead window.
    Solve(SolveArgs),
    /// Run a full day of receding-horizon solves.
    Roll(RollArgs),
    /// Build nadir half-planes and report their classification error.
    Cha(ChaArgs),
    /// Simulate the frequency response to a step disturbance.
    SimulateFreq(SimulateArgs),
    /// Check convexity of the nadir in (H, D) by sampled Hessians.
    CheckConvexity(ConvexityArgs),
    /// Quantiles of a univariate Gaussian mixture.
    Quantile(QuantileArgs),
    /// Audit a saved window solution against the exact constraints.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    /// Case file, or `case24` for the bundled desk case.
    #[arg(long, value_name = "PATH", default_value = "case24")]
    pub case: String,
    /// Disturbance as a fraction of total load (replaces the case's rule).
    #[arg(long, value_name = "X")]
    pub kappa: Option<f64>,
    /// Violation probability for every chance constraint.
    #[arg(long, value_name = "X")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Scenario file, or `day1` for the bundled day.
    #[arg(long, value_name = "PATH", default_value = "day1")]
    pub scenario: String,
    /// Horizon configuration file (defaults: 15-min steps, 16-step window,
    /// re-solve and commit every 4 steps).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Training samples per nadir half-plane set.
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,
    /// Keep the frequency rows in fixed mode.
    #[arg(long)]
    pub enforce_frequency_in_fixed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Online,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModesArg {
    Both,
    Online,
    Fixed,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Which solve instant of the scenario to use.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub solve_index: usize,
    /// Online allocation of inertia and droop, or fixed per-unit values.
    #[arg(long, value_enum, default_value = "online")]
    pub mode: ModeArg,
    /// Directory for `solution.json`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RollArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Which dispatch modes to run.
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModesArg,
    /// Output directory for the CSV tables and `metadata.json`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChaArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Training sample sizes; one column per size.
    #[arg(long, value_name = "N,...", value_delimiter = ',', default_value = "50000")]
    pub samples: Vec<usize>,
    /// Uniform test points for the classification error.
    #[arg(long, value_name = "N", default_value_t = 10_000)]
    pub test_samples: usize,
    /// Total load used for the disturbance, MW.
    #[arg(long, value_name = "MW", default_value_t = 2750.0, conflicts_with = "disturbance_pu")]
    pub load: f64,
    /// Disturbance, per-unit on the system base.
    #[arg(long, value_name = "PU")]
    pub disturbance_pu: Option<f64>,
    /// Write the half-plane set of the largest size as JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// System inertia, s (default: the case's fixed-parameter value).
    #[arg(long, value_name = "S")]
    pub h: Option<f64>,
    /// System damping, per-unit (default: the case's fixed-parameter value).
    #[arg(long, value_name = "PU")]
    pub d: Option<f64>,
    /// Total load used for the disturbance, MW.
    #[arg(long, value_name = "MW", default_value_t = 2750.0, conflicts_with = "disturbance_pu")]
    pub load: f64,
    /// Disturbance, per-unit on the system base.
    #[arg(long, value_name = "PU")]
    pub disturbance_pu: Option<f64>,
    /// Integration step, s.
    #[arg(long, value_name = "S", default_value_t = 1e-3)]
    pub dt: f64,
    /// Simulated time, s.
    #[arg(long, value_name = "S", default_value_t = 30.0)]
    pub t_end: f64,
    /// Write the trajectory as CSV, keeping every `--every`-th step.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Row stride of the trajectory CSV.
    #[arg(long, value_name = "N", default_value_t = 10, requires = "out")]
    pub every: usize,
}

#[derive(Debug, Args)]
pub struct ConvexityArgs {
    /// Number of sampled parameter sets.
    #[arg(long, value_name = "N", default_value_t = 100_000)]
    pub samples: usize,
    /// Finite-difference step as a fraction of each range.
    #[arg(long, value_name = "X", default_value_t = 1e-4)]
    pub fd_step: f64,
    /// Relative tolerance on the smallest eigenvalue.
    #[arg(long, value_name = "X", default_value_t = 1e-8)]
    pub psd_tol: f64,
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    /// Component weights; rescaled to sum to one.
    #[arg(long, value_name = "W,...", value_delimiter = ',', required = true)]
    pub weights: Vec<f64>,
    /// Component means.
    #[arg(long, value_name = "M,...", value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub means: Vec<f64>,
    /// Component variances; zero gives a point mass.
    #[arg(long, value_name = "V,...", value_delimiter = ',', required = true)]
    pub variances: Vec<f64>,
    /// Probability levels.
    #[arg(long, value_name = "A,...", value_delimiter = ',', default_value = "0.01,0.05,0.5,0.95,0.99")]
    pub alpha: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Case file, or `case24` for the bundled desk case.
    #[arg(long, value_name = "PATH", default_value = "case24")]
    pub case: String,
    /// `solution.json` written by `solve`.
    #[arg(long, value_name = "PATH")]
    pub solution: PathBuf,
    /// Tolerance on linear constraints, MW or MWh.
    #[arg(long, value_name = "X", default_value_t = 1e-6)]
    pub tol: f64,
}
