mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Two-tier 5G site planning for joint throughput and positioning.
#[derive(Parser, Debug)]
#[command(name = "siteplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic topology.
    Generate(GenerateArgs),
    /// Plan a deployment and association.
    Plan(PlanArgs),
    /// Per-cell PEB of a deployment over a grid.
    PebMap(PebMapArgs),
    /// Run several planners over budgets and seeds.
    Compare(CompareArgs),
    /// Exhaustive search for the optimal plan.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON file pinning solver and planner settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// H, SU or DU.
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Deployment budget written into the topology (default: every site).
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Throughput-positioning ratio in Mbit/s per m^2.
    #[arg(long)]
    pub tpr: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Write routine traces as JSON lines to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct PebMapArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated site indices, or a plan JSON file.
    #[arg(long)]
    pub deployment: String,
    #[arg(long, default_value_t = 25.0)]
    pub grid_spacing: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated planners: joint (alias loko), bse, sdr-toa, oracle,
    /// random.
    #[arg(long, default_value = "joint,bse,sdr-toa")]
    pub planners: String,
    #[arg(long)]
    pub tpr: Option<f64>,
    /// Inclusive budget range `a..b`, or a single budget.
    #[arg(long)]
    pub budget_range: Option<String>,
    /// Number of seeds, run as 0..n.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub tpr: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Cap on subsets times test points.
    #[arg(long)]
    pub max_evals: Option<u128>,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Plan(a) => commands::plan(&a),
        Command::PebMap(a) => commands::peb_map(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Oracle(a) => commands::oracle(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
