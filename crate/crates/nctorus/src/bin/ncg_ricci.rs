//! Experiment runner for the noncommutative-torus curvature pipelines.
//!
//! Exit codes: 0 success, 2 tolerance violation, 3 input/config error.

use clap::{Parser, Subcommand};
use nctorus::config::ExperimentConfig;
use nctorus::{cli, NcError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ncg-ricci", about = "Ricci curvature of conformal noncommutative two-tori")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; defaults to the built-in reference config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the truncation grid size N.
    #[arg(long, global = true)]
    grid_n: Option<i32>,
    /// Override a named tolerance, e.g. --tol spectral_rel=0.02 (repeatable).
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tolerances: Vec<String>,
    /// Rayon thread count (falls back to NCG_RICCI_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Ricci density via the curvature theorem and the raw c₂ pipeline.
    Ricci,
    /// Scalar curvature density R^γ only.
    Scalar,
    /// Residual grid of the F/g rearrangement identity against S.
    VerifyIdentity,
    /// Heat-trace oracle vs the local Ricci functional.
    SpectralCheck,
    /// b₂″ normal form against the frozen golden expansion.
    B2Report,
}

fn run(args: &Args) -> nctorus::Result<bool> {
    let threads = args
        .threads
        .or_else(|| std::env::var("NCG_RICCI_THREADS").ok()?.parse().ok());
    if let Some(n) = threads {
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = args.grid_n {
        cfg.grid.n = n;
    }
    for spec in &args.tolerances {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| NcError::BadConfig(format!("--tol expects NAME=VALUE, got {spec}")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| NcError::BadConfig(format!("bad tolerance value in {spec}")))?;
        cfg.tolerances.insert(name.to_string(), value);
    }
    cfg.validate()?;
    nctorus::functions::warm_up()?;

    let out = args.out.as_deref();
    match args.command {
        Command::Ricci => cli::cmd_ricci(&cfg, out),
        Command::Scalar => cli::cmd_scalar(&cfg, out),
        Command::VerifyIdentity => cli::cmd_verify_identity(&cfg, out),
        Command::SpectralCheck => cli::cmd_spectral_check(&cfg, out),
        Command::B2Report => cli::cmd_b2_report(&cfg, out),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("tolerance violation (see report)");
            ExitCode::from(2)
        }
        Err(e @ (NcError::BadConfig(_) | NcError::Io(_) | NcError::Serde(_))) => {
            eprintln!("config error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("pipeline error: {e}");
            ExitCode::from(2)
        }
    }
}
