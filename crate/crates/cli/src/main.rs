use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod table;

/// Multiscale flatness numbers of point samples.
#[derive(Debug, Parser)]
#[command(name = "flatness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a sample of a reference family, plus a `.meta.json` sidecar.
    Generate(GenerateArgs),
    /// Compute the dyadic profiles of a point cloud.
    Analyze(AnalyzeArgs),
    /// Evaluate inequality checks on one or more clouds or analyze reports.
    Verify(VerifyArgs),
    /// Print a report as a plot-ready CSV table or as JSON.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// thin_triangle, gapped_segment, lipschitz_graph, dyadic_snowflake,
    /// circle_arc or flat_disk.
    #[arg(long)]
    family: String,
    /// Family parameter as `name=value`; repeat for each parameter.
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
    /// Output file; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args)]
struct ProfileArgs {
    /// Intrinsic dimension.
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 0.3)]
    eps_margin: f64,
    #[arg(long, default_value_t = 2, allow_hyphen_values = true)]
    i_min: i32,
    #[arg(long, default_value_t = 6, allow_hyphen_values = true)]
    i_max: i32,
    /// Largest number of centers per scale.
    #[arg(long, default_value_t = 32)]
    centers: usize,
    /// Net resolution relative to the radius.
    #[arg(long, default_value_t = 1.0 / 200.0)]
    net_resolution: f64,
    /// Balls with more points are thinned before the distortion scans.
    #[arg(long, default_value_t = 4096)]
    pair_cap: usize,
    /// Subsample draws for the intrinsic lower bounds.
    #[arg(long, default_value_t = 20)]
    draws: usize,
    /// Fail when a smallness hypothesis is violated.
    #[arg(long)]
    enforce_gate: bool,
    /// Restarts of the plane search.
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Numbers {
    All,
    Extrinsic,
    Intrinsic,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Numbers::All)]
    numbers: Numbers,
    #[command(flatten)]
    profile: ProfileArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Point cloud or analyze report; repeat for a family of inputs.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Comma-separated subset of precise_A, precise_B, sum_A, sum_B,
    /// converse_alpha, converse_beta.
    #[arg(long)]
    statements: String,
    /// Exponents of the sum checks.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    lambda: Vec<f64>,
    /// JSON report; the table goes to the same path with extension `.csv`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    profile: ProfileArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn init_threads() -> Result<()> {
    if let Ok(value) = std::env::var(commands::THREADS_ENV) {
        let threads: usize = value
            .parse()
            .with_context(|| format!("{} must be a positive integer, got `{value}`", commands::THREADS_ENV))?;
        if threads == 0 {
            bail!("{} must be a positive integer", commands::THREADS_ENV);
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    init_threads()?;
    match cli.command {
        Command::Generate(args) => commands::generate(&args).map(|_| true),
        Command::Analyze(args) => commands::analyze(&args).map(|_| true),
        Command::Verify(args) => commands::verify(&args),
        Command::Report(args) => commands::report(&args).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
