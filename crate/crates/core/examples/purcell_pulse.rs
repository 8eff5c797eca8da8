//! Cavity emission when the excitation beam switches on, on resonance and
//! with the cavity half a free spectral range away.
//!
//! `cargo run --release --example purcell_pulse`

use microcavity::scenario::run_pulse;
use microcavity::ScenarioConfig;

fn main() -> microcavity::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.pulse.drops = 8;
    for detuning in [0.0, cfg.half_fsr_hz()] {
        cfg.pulse.cavity_detuning_hz = detuning;
        let run = run_pulse(&cfg)?;
        let total: f64 = run.emission_counts.iter().sum();
        println!(
            "cavity detuning {detuning:.3e} Hz: {total} emission counts, onset bin {:?}, turn-on bin {}",
            run.onset_bin, run.turn_on_bin
        );
    }
    Ok(())
}
