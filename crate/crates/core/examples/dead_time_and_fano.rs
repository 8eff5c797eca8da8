//! Detector dead time and the variance-to-mean ratio of shot-noise counts.
//!
//! `cargo run --release --example dead_time_and_fano`

use microcavity::cloud_mc::TimeBins;
use microcavity::detector_chain::{
    dead_time_correct, dead_time_forward, fano, fano_sigma, generate_trials, loss_correct_fano,
    ConstantRate, DetectionChainSpec,
};

fn main() -> microcavity::Result<()> {
    let chain = DetectionChainSpec::default();
    let eta = chain.net_efficiency();
    println!(
        "measured rate at 419e3 s^-1: {:.1}",
        dead_time_forward(419e3, chain.dead_time)
    );

    let bins = TimeBins {
        start: 0.0,
        width: 10e-6,
        count: 200,
    };
    let drops = 48;
    let series = generate_trials(|_| ConstantRate(419e3 / eta), &chain, &bins, drops, 1)?;
    let corrected = dead_time_correct(&series, chain.dead_time)?;
    let f: Vec<f64> = fano(&corrected)?.into_iter().flatten().collect();
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    println!(
        "mean counts per bin {:.3}",
        series.total() / (drops * bins.count) as f64
    );
    println!(
        "mean f {mean:.4}, loss corrected {:.4}",
        loss_correct_fano(mean, eta)?
    );
    println!("single-bin band +-{:.3}", 3.0 * fano_sigma(drops) / eta);
    Ok(())
}
