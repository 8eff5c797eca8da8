//! Excess count noise from cavity-length jitter, linearized and sampled.
//!
//! `cargo run --example cavity_jitter`

use microcavity::detector_chain::{cavity_jitter_noise, JitterMethod, LengthJitter};
use microcavity::ScenarioConfig;

fn main() -> microcavity::Result<()> {
    let cfg = ScenarioConfig::default();
    let cavity = cfg.cavity_spec()?;
    let v = cfg.visibility()?;
    let counts = cfg.probe.i_max * cfg.noise.bin_width_s / cfg.chain_spec().net_efficiency();
    println!(
        "{:>8} {:>8} {:>12} {:>12}",
        "rms_pm", "C_tot", "linearized", "sampled"
    );
    for rms in [100e-12, 300e-12, 1e-9] {
        let jitter = LengthJitter {
            rms,
            offset: cfg.noise.jitter_offset_m,
        };
        for c_tot in [0.0, 0.23] {
            let lin =
                cavity_jitter_noise(v, c_tot, &jitter, &cavity, counts, JitterMethod::Linearized)?;
            let mc = cavity_jitter_noise(
                v,
                c_tot,
                &jitter,
                &cavity,
                counts,
                JitterMethod::MonteCarlo {
                    samples: 20_000,
                    seed: 1,
                },
            )?;
            println!("{:>8.0} {c_tot:>8.2} {lin:>12.3e} {mc:>12.3e}", rms * 1e12);
        }
    }
    Ok(())
}
