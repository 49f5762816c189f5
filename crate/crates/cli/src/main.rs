//! `sshift`: batch front-end for the spectral-shift library.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Failure};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "sshift", version, about = "Scattering data, spectral shift and finite-size energies in one dimension")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Tolerance for `verify`; overrides SSHIFT_TOL and the config.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// t, r1, r2 on a wavenumber grid (CSV).
    Scatter,
    /// ξ(λ) on an energy grid (CSV).
    Ssf,
    /// Fumi term by the ξ integral and by the contour (JSON).
    Fumi,
    /// Box eigenvalues up to the cutoff (CSV).
    Boxspec,
    /// Energy differences along the η-fixed length sequence (CSV).
    Converge,
    /// Finite-size energy (JSON).
    Fse {
        /// Half-line problem on [0, L].
        #[arg(long)]
        halfline: bool,
        /// Also extrapolate the box sequence.
        #[arg(long)]
        extrapolate: bool,
    },
    /// Determinant identities against the tolerance (JSON).
    Verify,
}

fn tolerance(cli: Option<f64>, config: &RunConfig) -> Result<f64, Failure> {
    if let Some(t) = cli {
        return if t > 0.0 { Ok(t) } else { Err(Failure::Config(format!("--tol must be positive, got {t}"))) };
    }
    if let Ok(s) = std::env::var("SSHIFT_TOL") {
        return match s.parse::<f64>() {
            Ok(t) if t > 0.0 => Ok(t),
            _ => Err(Failure::Config(format!("SSHIFT_TOL: expected a positive number, got '{s}'"))),
        };
    }
    Ok(config.raw.verify.tol)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Config(e.to_string()))?;
    }
    let config = RunConfig::load(cli.config.as_deref()).map_err(|e| Failure::Config(e.to_string()))?;
    let tol = tolerance(cli.tol, &config)?;
    let ctx = Context { config, out: cli.out, tol };
    match cli.command {
        Command::Scatter => commands::scatter(&ctx),
        Command::Ssf => commands::ssf(&ctx),
        Command::Fumi => commands::fumi(&ctx),
        Command::Boxspec => commands::boxspec(&ctx),
        Command::Converge => commands::converge(&ctx),
        Command::Fse { halfline, extrapolate } => commands::fse(&ctx, halfline, extrapolate),
        Command::Verify => commands::verify(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sshift: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
