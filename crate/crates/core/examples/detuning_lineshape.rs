//! Reflected fraction versus laser detuning: fixed coupling against the
//! drop- and laser-averaged lineshape.
//!
//! `cargo run --example detuning_lineshape`

use microcavity::reflection::{averaged_lineshape, reflected_fraction_detuned};
use microcavity::ScenarioConfig;

fn main() -> microcavity::Result<()> {
    let cfg = ScenarioConfig::default();
    let spec = cfg.lineshape()?;
    let geom = cfg.mode_geometry()?;
    let deltas = cfg.scan_deltas();
    for mean_neff in [0.6, 1.1] {
        let averaged = averaged_lineshape(&spec, &geom, mean_neff, &deltas)?;
        println!("<N_eff> = {mean_neff}");
        println!("{:>8} {:>10} {:>10}", "delta", "fixed", "averaged");
        for (d, a) in deltas.iter().zip(&averaged) {
            let fixed =
                reflected_fraction_detuned(spec.visibility, spec.coupling() * mean_neff, *d);
            println!("{d:>8.2} {fixed:>10.4} {a:>10.4}");
        }
    }
    Ok(())
}
