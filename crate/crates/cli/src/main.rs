//! `hdclt`: config-driven frontend to the simulation library.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "hdclt", version, about = "High-dimensional CLT and bootstrap approximation experiments")]
struct Cli {
    /// Worker threads; affects wall-clock time only, never output.
    #[arg(long, global = true, env = "HDCLT_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Override a config leaf, e.g. `--set estimate_rho.R=20000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from a design and write it to disk.
    Simulate(RunArgs),
    /// Evaluate the bound quantities from population moments or a dataset.
    Bounds(RunArgs),
    /// Monte Carlo estimate of the Gaussian approximation error over a set family.
    EstimateRho(RunArgs),
    /// Bootstrap approximation error conditional on a dataset.
    Bootstrap(RunArgs),
    /// Approximation error and bounds over a grid of sample sizes.
    RateScan(RunArgs),
    /// Gaussian orthant anti-concentration check.
    Nazarov(RunArgs),
    /// Smooth-max sandwich check.
    Smoothmax(RunArgs),
}

type Runner = fn(&Config) -> CliResult<()>;

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs, Runner) {
        match self {
            Command::Simulate(a) => ("simulate", a, commands::simulate),
            Command::Bounds(a) => ("bounds", a, commands::bounds),
            Command::EstimateRho(a) => ("estimate-rho", a, commands::estimate_rho_cmd),
            Command::Bootstrap(a) => ("bootstrap", a, commands::bootstrap),
            Command::RateScan(a) => ("rate-scan", a, commands::rate_scan_cmd),
            Command::Nazarov(a) => ("nazarov", a, commands::nazarov),
            Command::Smoothmax(a) => ("smoothmax", a, commands::smoothmax),
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let workers = match cli.workers {
        Some(0) => return Err(CliError::config("workers", "must be at least 1")),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::config("workers", e.to_string()))?;
    let (name, args, exec) = cli.command.parts();
    let cfg = Config::load(&args.config, name, &args.overrides)?;
    exec(&cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hdclt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
