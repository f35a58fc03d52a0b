//! `evtspd`: instance generation, ALNS and exact solves, LP export and the
//! charging-segment sweep.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "evtspd", version, about = "EV and drone routing with partial recharging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random instances as JSON files.
    Generate(GenerateArgs),
    /// Run ALNS on instances, optionally against the exact oracle.
    Solve(SolveArgs),
    /// Write the MILP of each instance as an LP file with an audit.
    Export(ExportArgs),
    /// Sweep the number of charging segments over an instance batch.
    ExperimentR(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    customers: u64,
    #[arg(long, default_value_t = 2)]
    stations: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Seed of the first instance; instance k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "m-copies", default_value_t = 2)]
    m_copies: usize,
    #[arg(long, default_value = "instances")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    /// Linear charging.
    Pl,
    /// Piecewise-linear charging.
    Pp,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Pl)]
    variant: VariantArg,
    /// Segments of the piecewise-linear charging model (pp only).
    #[arg(long, default_value_t = 4)]
    segments: usize,
    /// Charging curve CSV with header `time_s,soc`; the built-in curve otherwise.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Maximum number of customers the EV visits during one sortie.
    #[arg(long = "maxleg")]
    max_leg: Option<usize>,
    /// Charge launch and retrieve handling times.
    #[arg(long)]
    lrt: bool,
    /// Weight-dependent drone range.
    #[arg(long)]
    range: bool,
    /// Dummy copies per station; the instance setting otherwise.
    #[arg(long = "m-copies")]
    m_copies: Option<usize>,
}

#[derive(Args, Clone)]
struct BudgetArgs {
    /// ALNS time limit in seconds.
    #[arg(long, default_value_t = 5.0)]
    time: f64,
    /// ALNS iteration limit; replaces the time limit and makes runs reproducible.
    #[arg(long)]
    iters: Option<u64>,
    /// ALNS random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Also solve exactly and report the gap.
    #[arg(long)]
    oracle: bool,
    /// Oracle time limit in seconds.
    #[arg(long = "oracle-time")]
    oracle_time: Option<f64>,
    /// Write the per-iteration run report of each instance.
    #[arg(long)]
    report: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "lp")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Segment counts to sweep; 1 is linear charging.
    #[arg(long = "rs", value_delimiter = ',', default_values_t = [1usize, 2, 4, 6])]
    rs: Vec<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => run::generate(&a),
        Command::Solve(a) => run::solve(&a),
        Command::Export(a) => run::export(&a),
        Command::ExperimentR(a) => run::experiment_r(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
