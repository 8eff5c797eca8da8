//! Cavity decay, cooperativity and mode volumes from the default configuration.
//!
//! `cargo run --example rate_algebra`

use microcavity::scenario::run_params;
use microcavity::ScenarioConfig;

fn main() -> microcavity::Result<()> {
    let report = run_params(&ScenarioConfig::default())?;
    print!("{}", report.render());
    Ok(())
}
