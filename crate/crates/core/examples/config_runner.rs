//! Run a TOML experiment through the library, the way the CLI does.
//!
//! cargo run --release --example config_runner -- configs/quartic.toml

use std::path::PathBuf;

use freqlab::experiment::{emit_reports, run_experiment, ExperimentConfig, Mode};

fn main() -> freqlab::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/harmonic.toml")
    });
    let cfg = ExperimentConfig::load(&path)?;
    let results = run_experiment(&cfg, Mode::Run)?;
    let dir = std::env::temp_dir().join("freqlab-config-runner");
    for p in emit_reports(&results, &dir, Mode::Run)? {
        println!("wrote {}", p.display());
    }
    for c in &results.checks {
        println!("{} {:<24} C = {:.4e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.implied_constant);
    }
    println!("all pass: {}", results.all_pass());
    Ok(())
}
