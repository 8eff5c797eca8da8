//! Calibrated time-of-flight signal of the falling cloud.
//!
//! `cargo run --release --example time_of_flight`

use microcavity::scenario::run_tof;
use microcavity::ScenarioConfig;

fn main() -> microcavity::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.tof.drops = 8;
    let run = run_tof(&cfg)?;
    if let Some(cal) = &run.calibration {
        println!(
            "calibration factor {:.4} ({:.3e} atoms)",
            cal.factor, cal.calibrated.atom_count
        );
    }
    let (t, n) = run.peak();
    println!("peak <N_eff> {n:.3} at {:.2} ms", t * 1e3);
    for (k, t) in run.bins.centers().iter().enumerate().step_by(4) {
        println!(
            "{:7.2} ms  N_eff {:6.3}  counts {:7.2}",
            t * 1e3,
            run.n_eff[k],
            run.counts[k]
        );
    }
    Ok(())
}
