//! Run a scenario file from code and print the manifest.
//!
//! cargo run --example scenario_run -- scenarios/radial_lp.toml

use std::path::PathBuf;

use strat_lab::scenario::Scenario;

fn main() -> strat_lab::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/radial_lp.toml")));
    let scenario = Scenario::load(&path)?;
    let out = std::env::temp_dir().join("strat-lab-example");
    let report = scenario.run(&out)?;
    print!("{}", std::fs::read_to_string(&report.manifest)?);
    Ok(())
}
