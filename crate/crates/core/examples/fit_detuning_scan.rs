//! Synthetic detuning scan fitted back for the mean effective atom number.
//!
//! `cargo run --release --example fit_detuning_scan -- 1.1`

use microcavity::fitting::{fit_scan, profile_uncertainty, synthesize_scan, ScanNoise};
use microcavity::ScenarioConfig;

fn main() -> microcavity::Result<()> {
    let truth: f64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1.1);
    let cfg = ScenarioConfig::default();
    let geom = cfg.mode_geometry()?;
    let data = synthesize_scan(
        &cfg.lineshape()?,
        &geom,
        truth,
        &cfg.scan_deltas(),
        &ScanNoise::default(),
        7,
        0,
    )?;
    let fit_cfg = cfg.fit_config();
    let fit = fit_scan(&data, &geom, &fit_cfg)?;
    let profile = profile_uncertainty(&fit, &data, &geom, &fit_cfg)?;
    println!("truth {truth}");
    println!(
        "fit   {:.4} +- {:.4} (chi2/dof {:.2}, {} iterations)",
        fit.mean_neff.value,
        fit.mean_neff.std_error,
        fit.reduced_chi2(),
        fit.iterations
    );
    println!(
        "profile interval [{:.4}, {:.4}]",
        profile.lower, profile.upper
    );
    Ok(())
}
