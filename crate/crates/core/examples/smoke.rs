//! Runs the whole pipeline on the shipped synthetic fixture.
//!
//! cargo run --release --example smoke

use abxkit::smoke::{run_smoke, shipped_fixture, SmokeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = tempfile::tempdir()?;
    let report = run_smoke(&shipped_fixture(), work.path(), &SmokeConfig::default())?;
    print!("{}", report.to_key_values());
    if !report.failures().is_empty() {
        std::process::exit(1);
    }
    Ok(())
}
