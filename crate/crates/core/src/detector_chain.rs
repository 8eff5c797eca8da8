//! Photon detection chain: Poisson arrivals, beamsplitter and quantum
//! efficiency losses, non-paralyzable APD dead time, binning, and the
//! variance-to-mean analysis of binned counts across repeated drops.
//!
//! The net efficiency is `transmission * efficiency` (0.9 x 0.6 = 0.54 by
//! default). Loss correction of the Fano factor uses this product.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use rayon::prelude::*;

use crate::cavity_core::{kappa_from_geometry, CavitySpec};
use crate::cloud_mc::TimeBins;
use crate::error::{ensure_non_negative, Error, Result};
use crate::reflection::reflected_fraction_cavity_offset;
use crate::rng::{substream, tag};

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionChainSpec {
    /// Fraction of the reflected light passed by the beamsplitter.
    pub transmission: f64,
    /// APD quantum efficiency.
    pub efficiency: f64,
    /// Non-paralyzable dead time (s).
    pub dead_time: f64,
}

impl Default for DetectionChainSpec {
    fn default() -> Self {
        Self {
            transmission: 0.9,
            efficiency: 0.6,
            dead_time: 44e-9,
        }
    }
}

impl DetectionChainSpec {
    pub fn ideal() -> Self {
        Self {
            transmission: 1.0,
            efficiency: 1.0,
            dead_time: 0.0,
        }
    }

    pub fn net_efficiency(&self) -> f64 {
        self.transmission * self.efficiency
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("transmission", self.transmission),
            ("efficiency", self.efficiency),
        ] {
            if !(x > 0.0 && x <= 1.0) {
                return Err(Error::domain(format!("{name} must lie in (0, 1], got {x}")));
            }
        }
        ensure_non_negative("dead time", self.dead_time)
    }
}

/// Photon arrival rate (s^-1) as a function of time.
pub trait RateFunction: Sync {
    fn rate(&self, t: f64) -> f64;
    /// Upper bound of the rate on `[t0, t1)`.
    fn bound(&self, t0: f64, t1: f64) -> f64;
}

impl<T: RateFunction + ?Sized> RateFunction for &T {
    fn rate(&self, t: f64) -> f64 {
        (**self).rate(t)
    }

    fn bound(&self, t0: f64, t1: f64) -> f64 {
        (**self).bound(t0, t1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantRate(pub f64);

impl RateFunction for ConstantRate {
    fn rate(&self, _t: f64) -> f64 {
        self.0
    }

    fn bound(&self, _t0: f64, _t1: f64) -> f64 {
        self.0
    }
}

/// Rate constant over each of a set of bins and zero outside them.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseRate {
    pub bins: TimeBins,
    pub rates: Vec<f64>,
}

impl RateFunction for PiecewiseRate {
    fn rate(&self, t: f64) -> f64 {
        self.bins.index_of(t).map_or(0.0, |k| self.rates[k])
    }

    fn bound(&self, t0: f64, t1: f64) -> f64 {
        let lo = ((t0 - self.bins.start) / self.bins.width).floor().max(0.0) as usize;
        let hi = (((t1 - self.bins.start) / self.bins.width).ceil().max(0.0) as usize)
            .min(self.rates.len());
        self.rates
            .get(lo..hi)
            .map_or(0.0, |r| r.iter().copied().fold(0.0, f64::max))
    }
}

/// Which corrections have been applied to a [`CountSeries`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corrections {
    pub dead_time: Option<f64>,
}

/// Binned counts for one or more trials (drops), `counts[trial][bin]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountSeries {
    pub bins: TimeBins,
    pub counts: Vec<Vec<f64>>,
    pub corrections: Corrections,
}

impl CountSeries {
    pub fn trials(&self) -> usize {
        self.counts.len()
    }

    /// Mean over trials of every bin.
    pub fn bin_means(&self) -> Vec<f64> {
        let n = self.trials().max(1) as f64;
        (0..self.bins.count)
            .map(|k| self.counts.iter().map(|c| c[k]).sum::<f64>() / n)
            .collect()
    }

    /// Sum over trials of every bin.
    pub fn bin_totals(&self) -> Vec<f64> {
        (0..self.bins.count)
            .map(|k| self.counts.iter().map(|c| c[k]).sum())
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }
}

fn simulate_trial<R: RateFunction>(
    rate: &R,
    chain: &DetectionChainSpec,
    bins: &TimeBins,
    seed: u64,
    trial: u64,
) -> Result<Vec<f64>> {
    let mut rng = substream(seed, tag::COUNTS, trial);
    let eta = chain.net_efficiency();
    let mut counts = vec![0.0; bins.count];
    let mut last = f64::NEG_INFINITY;
    for (k, count) in counts.iter_mut().enumerate() {
        let (a, b) = (bins.edge(k), bins.edge(k + 1));
        let bound = rate.bound(a, b);
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::domain(format!(
                "rate bound {bound} on [{a}, {b}) is invalid"
            )));
        }
        if bound == 0.0 {
            continue;
        }
        let mut t = a;
        loop {
            t += rng.sample::<f64, _>(Exp1) / bound;
            if t >= b {
                break;
            }
            let r = rate.rate(t);
            if r < 0.0 {
                return Err(Error::domain(format!("negative photon rate {r} at t={t}")));
            }
            // Lewis-Shedler thinning and detection loss in one draw.
            if rng.random::<f64>() * bound >= eta * r {
                continue;
            }
            if t - last < chain.dead_time {
                continue;
            }
            last = t;
            *count += 1.0;
        }
    }
    Ok(counts)
}

/// Single-trial forward simulation of the detection chain.
pub fn generate_counts<R: RateFunction>(
    rate: &R,
    chain: &DetectionChainSpec,
    bins: &TimeBins,
    seed: u64,
) -> Result<CountSeries> {
    generate_trials(|_| rate, chain, bins, 1, seed)
}

/// Independent trials; trial `i` uses the rate returned for `i` and its own
/// RNG substream, so results do not depend on thread scheduling.
pub fn generate_trials<R: RateFunction>(
    rate_for: impl Fn(usize) -> R + Sync,
    chain: &DetectionChainSpec,
    bins: &TimeBins,
    trials: usize,
    seed: u64,
) -> Result<CountSeries> {
    chain.validate()?;
    bins.validate()?;
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let counts = (0..trials)
        .into_par_iter()
        .map(|i| simulate_trial(&rate_for(i), chain, bins, seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(CountSeries {
        bins: *bins,
        counts,
        corrections: Corrections::default(),
    })
}

/// Measured rate after a non-paralyzable dead time: `R / (1 + R tau)`.
pub fn dead_time_forward(rate: f64, dead_time: f64) -> f64 {
    rate / (1.0 + rate * dead_time)
}

/// Inverts the non-paralyzable loss: `n = r / (1 - r tau)`.
pub fn dead_time_inverse(measured: f64, dead_time: f64) -> Result<f64> {
    let x = measured * dead_time;
    if x >= 1.0 {
        return Err(Error::Saturation {
            rate: measured,
            dead_time,
        });
    }
    Ok(measured / (1.0 - x))
}

/// Per-bin dead-time correction of the count rate.
pub fn dead_time_correct(series: &CountSeries, dead_time: f64) -> Result<CountSeries> {
    ensure_non_negative("dead time", dead_time)?;
    let width = series.bins.width;
    let counts = series
        .counts
        .iter()
        .map(|trial| {
            trial
                .iter()
                .map(|&c| Ok(dead_time_inverse(c / width, dead_time)? * width))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CountSeries {
        bins: series.bins,
        counts,
        corrections: Corrections {
            dead_time: Some(dead_time),
        },
    })
}

/// Variance-to-mean ratio of every bin across trials (unbiased variance).
/// Bins with zero mean are `None`.
pub fn fano(series: &CountSeries) -> Result<Vec<Option<f64>>> {
    let n = series.trials();
    if n < 2 {
        return Err(Error::domain(format!(
            "variance-to-mean needs at least 2 trials, got {n}"
        )));
    }
    Ok((0..series.bins.count)
        .map(|k| {
            let mean = series.counts.iter().map(|c| c[k]).sum::<f64>() / n as f64;
            if mean <= 0.0 {
                return None;
            }
            let var = series
                .counts
                .iter()
                .map(|c| (c[k] - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            Some(var / mean)
        })
        .collect())
}

/// Standard deviation of a Poisson Fano estimate over `trials` drops.
pub fn fano_sigma(trials: usize) -> f64 {
    (2.0 / (trials as f64 - 1.0)).sqrt()
}

/// Undoes binomial thinning with net efficiency `eta`:
/// `f_corr = 1 + (f - 1) / eta`.
pub fn loss_correct_fano(f: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!(
            "efficiency must lie in (0, 1], got {eta}"
        )));
    }
    Ok(1.0 + (f - 1.0) / eta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JitterMethod {
    /// Delta method to second order: `f'^2 s^2 + f''^2 s^4 / 2`. Valid while the rms
    /// detuning is small against `kappa`.
    Linearized,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

/// Cavity-length fluctuation acting on the reflected intensity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LengthJitter {
    /// Rms length excursion (m).
    pub rms: f64,
    /// Static offset of the locked length from resonance (m).
    pub offset: f64,
}

impl LengthJitter {
    /// Cavity detuning in units of `kappa` produced by a length change `dl`:
    /// `d omega / omega = -dl / L`.
    pub fn detuning_per_length(spec: &CavitySpec) -> Result<f64> {
        Ok(-spec.omega / spec.length / kappa_from_geometry(spec)?)
    }
}

/// Excess variance-to-mean of the reflected counts caused by cavity-length
/// jitter, at `counts_at_max` expected counts per bin for full reflection.
pub fn cavity_jitter_noise(
    visibility: f64,
    c_tot: f64,
    jitter: &LengthJitter,
    spec: &CavitySpec,
    counts_at_max: f64,
    method: JitterMethod,
) -> Result<f64> {
    ensure_non_negative("jitter rms", jitter.rms)?;
    ensure_non_negative("counts per bin", counts_at_max)?;
    let per_length = LengthJitter::detuning_per_length(spec)?;
    let d0 = per_length * jitter.offset;
    let sigma = (per_length * jitter.rms).abs();
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let f = |d: f64| reflected_fraction_cavity_offset(visibility, c_tot, d);
    let (mean, var) = match method {
        JitterMethod::Linearized => {
            let h = 1e-3 * (2.0 * c_tot + 1.0);
            let d1 = (f(d0 + h) - f(d0 - h)) / (2.0 * h);
            let d2 = (f(d0 + h) - 2.0 * f(d0) + f(d0 - h)) / (h * h);
            (
                f(d0),
                d1 * d1 * sigma.powi(2) + 0.5 * d2 * d2 * sigma.powi(4),
            )
        }
        JitterMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::domain("jitter Monte Carlo needs at least 2 samples"));
            }
            let mut rng = substream(seed, tag::JITTER, 0);
            let normal = Normal::new(d0, sigma).map_err(|e| Error::domain(e.to_string()))?;
            let ys: Vec<f64> = (0..samples).map(|_| f(normal.sample(&mut rng))).collect();
            let m = ys.iter().sum::<f64>() / samples as f64;
            let v = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (samples - 1) as f64;
            (m, v)
        }
    };
    Ok(counts_at_max * var / mean)
}
