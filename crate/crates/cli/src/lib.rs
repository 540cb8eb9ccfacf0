//! Command-line front end: configuration, subcommand dispatch, seeds and
//! persistence of results.

pub mod config;
pub mod output;
pub mod plan;
pub mod run;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{
    BlocksOpts, BoundsOpts, ConvergeOpts, DualOpts, GeometryOpts, ParamsOpts, RunOpts, SimulateOpts, SurviveOpts,
    SweepOpts,
};

/// Version of the CSV and JSON layouts described in SCHEMA.md.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CPENV_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    /// The configuration violates a precondition; nothing was run.
    Config(String),
    /// The run itself failed.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "cpenv", version, about = "Contact process in a dynamic random environment")]
pub struct Cli {
    /// Configuration file (TOML, or JSON when the name ends in .json)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunOpts,
    #[command(flatten)]
    pub params: ParamsOpts,
    #[command(flatten)]
    pub geometry: GeometryOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export a single trajectory
    Simulate(SimulateOpts),
    /// Estimate finite-horizon survival
    Survive(SurviveOpts),
    /// Estimate the block conditions and the occupation events of the block argument
    Blocks(BlocksOpts),
    /// Coupled forward/dual estimate of the duality identity
    DualCheck(DualOpts),
    /// Exact small-lattice checks: duality and environment stationarity
    Oracle(DualOpts),
    /// Extinction threshold and the branching bound delta_p
    Bounds(BoundsOpts),
    /// Parameter sweep of survival, or bisection for a pseudo-critical value
    Sweep(SweepOpts),
    /// Complete-convergence diagnostic
    Converge(ConvergeOpts),
    /// Merge sharded result files of one run
    Merge {
        /// JSON result files written by sharded runs
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Survive(_) => "survive",
            Command::Blocks(_) => "blocks",
            Command::DualCheck(_) => "dual-check",
            Command::Oracle(_) => "oracle",
            Command::Bounds(_) => "bounds",
            Command::Sweep(_) => "sweep",
            Command::Converge(_) => "converge",
            Command::Merge { .. } => "merge",
        }
    }
}

/// Parse, validate and execute; returns the human-readable summary.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let plan = plan::Plan::from_cli(cli)?;
    run::execute(&plan)
}
