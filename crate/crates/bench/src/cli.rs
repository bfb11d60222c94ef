use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "varfista",
    version,
    about = "Adaptive FISTA solver, audits and rate experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and print the certificate.
    Solve(SolveArgs),
    /// Iterations to terminate over a list of tolerances, with a log-log fit.
    Slope(SlopeArgs),
    /// Run audited solves over a generated corpus.
    AuditSuite(SuiteArgs),
    /// Write a generated instance to a file.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    VarFista,
    Fista,
    Proxgrad,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::VarFista => "var-fista",
            SolverKind::Fista => "fista",
            SolverKind::Proxgrad => "proxgrad",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Instance file, or a generator spec such as `gen:n=20,eig=-1:10`.
    #[arg(long)]
    pub instance: String,
    #[arg(long, value_enum, default_value = "var-fista")]
    pub solver: SolverKind,
    /// Stop once the certificate residual is at most this.
    #[arg(long)]
    pub rho: f64,
    /// Initial stepsize (var-fista, default 1) or fixed step (baselines, default gamma/M).
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Audit the run against the solver's invariants (var-fista only).
    #[arg(long)]
    pub audit: bool,
    /// Generator seed for `gen:` specs that do not set one.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write a JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SlopeArgs {
    #[arg(long)]
    pub instance: String,
    /// Comma-separated tolerances, or `hi..lo` for one per decade
    /// (`hi..lo:count` for `count` log-spaced values).
    #[arg(long, default_value = "1e-1..1e-5")]
    pub rho_list: String,
    /// Write the table and fitted slope as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    pub lambda0: f64,
    #[arg(long, default_value_t = 2.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SuiteArgs {
    #[arg(long, default_value_t = 20)]
    pub n_instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Iteration cap per run.
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    /// Tolerance; the default keeps runs going until the cap.
    #[arg(long, default_value_t = 1e-300)]
    pub rho: f64,
    #[arg(long, default_value_t = 20)]
    pub dim: usize,
    #[arg(long)]
    pub convex_only: bool,
    /// Replace each gradient with a biased one (negative control).
    #[arg(long, hide = true)]
    pub inject_gradient_fault: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Generator spec, e.g. `gen:n=2,eig=-1:3,box=-1:1,c=1`.
    #[arg(long)]
    pub spec: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}
