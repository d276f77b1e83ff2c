use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "fairclust", version, about = "Individually fair graph clustering")]
struct Cli {
    /// JSON object or key=value file with defaults for the subcommand's flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a planted-partition graph with sensitive groups
    Generate(GenerateArgs),
    /// Fit one model and write memberships, manifest and metrics
    Cluster(ClusterArgs),
    /// Run a lambda x k grid and write the results table and chart data
    Sweep(SweepArgs),
    /// Score an existing membership file
    Metrics(MetricsArgs),
    /// Check an edge list or dense adjacency matrix for structural problems
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Layout {
    Random,
    Aligned,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Exponent {
    Quarter,
    Half,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Number of sensitive groups
    #[arg(long, default_value_t = 2)]
    g: usize,
    #[arg(long, default_value_t = fairclust_core::sbm::DEFAULT_P_IN)]
    p_in: f64,
    #[arg(long, default_value_t = fairclust_core::sbm::DEFAULT_P_OUT)]
    p_out: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Layout::Random)]
    layout: Layout,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// File name prefix for the four outputs
    #[arg(long, default_value = "sbm")]
    prefix: String,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = fairclust_core::solver::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = fairclust_core::solver::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = fairclust_core::solver::DEFAULT_EPS)]
    eps: f64,
    /// Root applied in the membership update
    #[arg(long, value_enum, default_value_t = Exponent::Quarter)]
    exponent: Exponent,
    /// Drop the regularizer entirely
    #[arg(long)]
    no_reg: bool,
    /// Leave same-group self pairs out of the repulsion graph
    #[arg(long)]
    zero_diagonal: bool,
    /// Zero wall-clock fields so outputs are byte-stable
    #[arg(long)]
    deterministic: bool,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    groups: PathBuf,
    /// Ground-truth `node,cluster` file for accuracy
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also write H.csv and W.csv
    #[arg(long)]
    dump_factors: bool,
    /// Also write the dense contrastive matrix and Laplacian as C.csv, L.csv
    #[arg(long)]
    dump_laplacian: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    groups: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    k_grid: Vec<usize>,
    /// Explicit lambda values; otherwise zero plus a geometric series
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50)]
    lambda_count: usize,
    #[arg(long, default_value_t = 100.0)]
    lambda_max: f64,
    #[arg(long, default_value_t = 3.0)]
    lambda_median: f64,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Worker threads; FAIRCLUST_THREADS caps this
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also write an SVG chart per k
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    groups: PathBuf,
    #[arg(long)]
    membership: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Cluster count; defaults to the largest id plus one
    #[arg(long)]
    k: Option<usize>,
    /// Write the JSON here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Edge list
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    graph: Option<PathBuf>,
    /// Dense adjacency matrix, one row per line
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Group file to check against the node count
    #[arg(long)]
    groups: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match config::merge_config(std::env::args_os().collect(), &Cli::command()) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Validate(a) => commands::validate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
