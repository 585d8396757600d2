//! `netkit` — key-rate sweeps and verification for CV MDI star networks.
//!
//! Subcommands: `rate`, `max-distance`, `finite-size`, `verify`,
//! `mc-sample`. Exit codes: 0 success, 1 computation or verification
//! failure, 2 usage error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::FileConfig;
use output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "netkit",
    version,
    about = "Key rates, distances and verification for CV MDI star networks",
    after_help = "The NETKIT_THREADS environment variable caps sweep parallelism.\n\
                  Config files hold key=value lines; flags take precedence over them."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct CommonOpts {
    /// Flat key=value config file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output format: csv or json-lines
    #[arg(long, global = true)]
    format: Option<String>,

    /// Output path (defaults to standard output)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Key-rate sweep over distance for one protocol
    Rate(commands::RateArgs),
    /// Maximum secure distance versus number of users
    MaxDistance(commands::MaxDistanceArgs),
    /// Composable finite-size rates over block sizes
    FiniteSize(commands::FiniteSizeArgs),
    /// Oracle-equivalence and Monte Carlo verification suites
    Verify(commands::VerifyArgs),
    /// Monte Carlo sampling with empirical covariance records
    McSample(commands::McSampleArgs),
}

/// Errors carrying their process exit code.
pub enum CliError {
    /// Bad flags, grids or config values: exit 2.
    Usage(String),
    /// Computation or verification failure: exit 1.
    Run(String),
}

impl From<netkit::Error> for CliError {
    fn from(e: netkit::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(format!("io error: {e}"))
    }
}

fn configure_threads_from_env() -> Result<(), CliError> {
    match std::env::var("NETKIT_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .map_err(|_| CliError::Usage(format!("NETKIT_THREADS must be a positive integer, got '{v}'")))?;
            if n == 0 {
                return Err(CliError::Usage(
                    "NETKIT_THREADS must be a positive integer".into(),
                ));
            }
            netkit::exec::configure_threads(Some(n));
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

fn load_common(opts: &CommonOpts) -> Result<(FileConfig, Format, Option<PathBuf>), CliError> {
    let cfg = match &opts.config {
        Some(path) => FileConfig::load(path).map_err(CliError::Usage)?,
        None => FileConfig::empty(),
    };
    let format_name = cfg
        .resolve(&opts.format, "format")
        .map_err(CliError::Usage)?
        .unwrap_or_else(|| "csv".to_string());
    let format: Format = format_name.parse().map_err(CliError::Usage)?;
    let out = match &opts.out {
        Some(p) => Some(p.clone()),
        None => cfg.get("out").map(PathBuf::from),
    };
    Ok((cfg, format, out))
}

fn write_table(table: &output::Table, format: Format, out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            table.write(format, &mut f)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write(format, &mut lock)?;
        }
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    configure_threads_from_env()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Rate(args) => commands::cmd_rate(args),
        Command::MaxDistance(args) => commands::cmd_max_distance(args),
        Command::FiniteSize(args) => commands::cmd_finite_size(args),
        Command::Verify(args) => commands::cmd_verify(args),
        Command::McSample(args) => commands::cmd_mc_sample(args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
