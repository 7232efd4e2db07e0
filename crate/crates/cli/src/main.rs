//! `plc`: batch front end for simulating and fitting product life cycles.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or configuration,
//! 3 a fit that did not converge within its budget.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use plc_core::PlcError;

#[derive(Debug, Parser)]
#[command(
    name = "plc",
    version,
    about = "Product life cycle simulation and fitting"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for stochastic commands; overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Output format for series and fit results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    PlotData,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble the life cycle of a scenario and write its components.
    Simulate(SimulateArgs),
    /// Estimate parameters from observed series.
    Fit(FitArgs),
    /// Run the brand competition model.
    Compete(CompeteArgs),
    /// Simulate proportionate growth and test the sizes for lognormality.
    Sizedist(SizedistArgs),
    /// Tabulate the market volume against the real price.
    Volume(VolumeArgs),
    /// Tabulate the logistic substitution of one product by another.
    Substitute(SubstituteArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario section in the config file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Built-in parameter set: colour_tv, bw_tv, c_class, s_class.
    #[arg(long, conflicts_with = "scenario")]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Sampling step in years; overrides the scenario.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulated span in years; overrides the scenario.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    /// Full life cycle from sales (and optional penetration and prices).
    Plc,
    /// Gompertz diffusion from a penetration series.
    Gompertz,
    /// Price floor and decline rate from a price series.
    Price,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum, default_value_t = FitKind::Plc)]
    pub kind: FitKind,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Sales CSV (`t,value`).
    #[arg(long)]
    pub sales: Option<PathBuf>,
    /// Penetration CSV (`t,value`), fractions of the potential.
    #[arg(long)]
    pub penetration: Option<PathBuf>,
    /// Price CSV (`t,value`).
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Decline rate held fixed in a Gompertz fit.
    #[arg(long)]
    pub decline_rate: Option<f64>,
    /// Parameters held at their starting value, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub fix: Vec<String>,
    /// Evaluation budget of each simplex run.
    #[arg(long)]
    pub max_evals: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompeteArgs {
    /// Number of steps; overrides the config.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SizedistArgs {
    #[arg(long)]
    pub units: Option<usize>,
    /// Number of growth steps T.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub volatility: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    /// Market potential M.
    #[arg(long, default_value_t = 1.0)]
    pub potential: f64,
    /// Upper-class agents M_U.
    #[arg(long, default_value_t = 0.0)]
    pub upper: f64,
    /// Natural price mu_m.
    #[arg(long, default_value_t = 1.0)]
    pub natural_price: f64,
    /// Width Theta of the lower-class income window.
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    #[arg(long, default_value_t = 5.0)]
    pub to: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct SubstituteArgs {
    /// Fitness of the substituting product.
    #[arg(long)]
    pub f1: f64,
    /// Fitness of the incumbent.
    #[arg(long)]
    pub f2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// Initial share of the substituting product.
    #[arg(long, default_value_t = 0.01)]
    pub initial_share: f64,
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum Failure {
    Model(PlcError),
    NotConverged(String),
}

impl From<PlcError> for Failure {
    fn from(e: PlcError) -> Self {
        Failure::Model(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Model(PlcError::Io { .. }) => 1,
            Failure::Model(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Model(e) => write!(f, "{e}"),
            Failure::NotConverged(what) => {
                write!(f, "{what} did not converge; best-so-far result written")
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
