use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use freqlab::experiment::{emit_reports, run_experiment, ExperimentConfig, Mode};
use freqlab::Error;

/// Frequency-function experiments for Δ²u = Vu.
///
/// Exit status: 0 all checks pass, 1 a check failed, 2 invalid config,
/// 3 runtime or output error.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides `output_dir` from the config.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Profiles, plot data and checks.
    Run { config: PathBuf },
    /// Checks only (checks.json).
    Verify { config: PathBuf },
    /// Profile CSV and plot data only.
    Profile { config: PathBuf },
    /// Solve the configured boundary value problem and dump the field.
    Solve { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, path) = match cli.command {
        Command::Run { config } => (Mode::Run, config),
        Command::Verify { config } => (Mode::Verify, config),
        Command::Profile { config } => (Mode::Profile, config),
        Command::Solve { config } => (Mode::Solve, config),
    };
    let cfg = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let results = match run_experiment(&cfg, mode) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let dir = cli.out.unwrap_or_else(|| cfg.output_dir.clone());
    match emit_reports(&results, &dir, mode) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: cannot write reports to {}: {e}", dir.display());
            return ExitCode::from(3);
        }
    }
    for c in &results.checks {
        println!(
            "{} {:<24} lhs={:.6e} rhs={:.6e} C={:.4e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.lhs,
            c.rhs_without_constant,
            c.implied_constant
        );
    }
    if results.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
