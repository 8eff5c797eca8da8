//! Visibility, cooperativity and effective atom number from three count rates.
//!
//! `cargo run --example count_rate_inversion -- 419e3 272e3 315e3`

use microcavity::cavity_core::{cooperativity, kappa_from_geometry, CavitySpec};
use microcavity::constants::{two_pi_times, F3_ZEEMAN_FACTOR};
use microcavity::reflection::{invert_to_cooperativity, CountRateTriple};

fn main() -> microcavity::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let counts = match args[..] {
        [i_max, i_min, i_atoms] => CountRateTriple {
            i_max,
            i_min,
            i_atoms,
        },
        _ => CountRateTriple::fiber_chip(),
    };
    let kappa = kappa_from_geometry(&CavitySpec::fiber_chip())?;
    let c = cooperativity(two_pi_times(100e6), kappa, two_pi_times(3e6))?;
    let inv = invert_to_cooperativity(&counts, c, F3_ZEEMAN_FACTOR)?;
    println!("rates        {counts:?}");
    println!("visibility   {:.4}", inv.visibility);
    println!("purcell      {:.4}", inv.purcell);
    println!("C_tot        {:.4}", inv.c_tot);
    println!("N_eff        {:.4}", inv.n_eff);
    Ok(())
}
