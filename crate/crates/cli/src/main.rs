//! `bathyflow`: batch driver for the hierarchy solver, its verification,
//! the normal form and the streamline tools.
//!
//! Exit codes: 0 success, 1 I/O, 2 configuration, 3 validation,
//! 4 divergence, 5 verification failed, 6 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use bathyflow::config::RunConfig;
use bathyflow::Error;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bathyflow", version, about = "Travelling waves over decaying bathymetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the mode solves.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Comma-separated amplitudes for the residual-scaling fit.
    #[arg(long, global = true, value_name = "a,b,c")]
    mu_sweep: Option<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Build the hierarchy and write layer dumps and the convergence report.
    Solve,
    /// Check the artifacts of `solve`.
    Verify,
    /// Birkhoff normal form at the elliptic equilibrium.
    Nf,
    /// Streamlines and the action stability probe.
    Trace,
    /// Summarise whatever artifacts are present.
    Report,
}

pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;
pub const EXIT_VERIFY: u8 = 5;
pub const EXIT_NUMERICAL: u8 = 6;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Parse(_) | Error::Parameter(_) | Error::Json(_) | Error::Bathymetry(_) => EXIT_CONFIG,
        Error::Validation(_) => EXIT_VALIDATION,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Mode { source, .. } => exit_code(source),
        Error::Domain(_) | Error::Solver(_) | Error::Symmetry(_) | Error::NormalForm(_) => {
            EXIT_NUMERICAL
        }
    }
}

fn parse_sweep(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("--mu-sweep: {s:?} is not a number")))
        })
        .collect()
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Parameter("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.outputs.directory = out.clone();
    }
    if let Some(s) = &cli.mu_sweep {
        cfg.run.mu_sweep = parse_sweep(s)?;
        if cfg.run.mu_sweep.iter().any(|mu| !(*mu > 0.0 && mu.is_finite())) {
            return Err(Error::Parameter("--mu-sweep values must be positive".into()));
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<commands::Outcome, Error> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::Parameter("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parameter(format!("--jobs: {e}")))?;
    }
    if let Command::Report = cli.command {
        let dir = match (&cli.out, &cli.config) {
            (Some(d), _) => d.clone(),
            (None, Some(_)) => load(cli)?.outputs.directory,
            (None, None) => PathBuf::from("out"),
        };
        return commands::report(&dir);
    }
    let cfg = load(cli)?;
    match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Verify => commands::verify(&cfg),
        Command::Nf => commands::nf(&cfg),
        Command::Trace => commands::trace(&cfg),
        Command::Report => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BATHYFLOW_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::VerifyFailed) => {
            eprintln!("bathyflow: verification failed");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(e) => {
            eprintln!("bathyflow: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
