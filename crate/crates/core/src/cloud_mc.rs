//! Monte Carlo release of a MOT cloud through the cavity mode.
//!
//! Only a tiny fraction of a millimetre-sized cloud ever crosses a mode a few
//! microns wide, so [`sample_cloud`] stratifies every draw. The vertical phase
//! space is sampled from the true distribution; for each vertical draw the
//! horizontal coordinates are drawn twice, once conditioned on the atom
//! crossing the mode plane inside a slab around the mode footprint and once
//! conditioned on missing it. The two samples carry the exact conditional
//! probabilities as weights, so the ensemble is unbiased for the whole cloud
//! and `sum(weight) == atom_count`.
//!
//! The frame is fixed: `z` points up and gravity pulls along `-z`.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cavity_core::CouplingRates;
use crate::constants::{BOLTZMANN, PLANCK, RB85_MASS, STANDARD_GRAVITY};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::mode_field::{c_tot_from_neff, mode_intensity, ModeGeometry};
use crate::rng::{substream, tag};

/// Transverse distance (in waists) beyond which the mode is treated as dark.
/// The Gaussian factor there is `exp(-50)`.
pub const TRANSVERSE_CUTOFF_WAISTS: f64 = 5.0;

/// Vertical draws per RNG substream.
const CHUNK: usize = 2048;

/// Initial state of the released MOT cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudSpec {
    /// Physical atoms in the cloud (0 for an empty release).
    pub atom_count: f64,
    /// Height of the cloud center above the mode center (m).
    pub height: f64,
    /// Horizontal offset of the cloud center from the mode center (m).
    pub offset: [f64; 2],
    pub rms_radius: f64,
    pub temperature: f64,
    pub mass: f64,
}

impl Default for CloudSpec {
    fn default() -> Self {
        Self {
            atom_count: 2e7,
            height: 7e-3,
            offset: [0.0, 0.0],
            rms_radius: 0.5e-3,
            temperature: 10e-6,
            mass: RB85_MASS,
        }
    }
}

impl CloudSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("atom_count", self.atom_count)?;
        ensure_positive("cloud height", self.height)?;
        ensure_non_negative("rms radius", self.rms_radius)?;
        ensure_non_negative("temperature", self.temperature)?;
        ensure_positive("atomic mass", self.mass)?;
        if !self.offset.iter().all(|x| x.is_finite()) {
            return Err(Error::domain("cloud offset must be finite"));
        }
        Ok(())
    }

    /// One-dimensional rms velocity `sqrt(k_B T / m)`.
    pub fn rms_velocity(&self) -> f64 {
        (BOLTZMANN * self.temperature / self.mass).sqrt()
    }

    /// Single-photon recoil velocity at `wavelength`.
    pub fn recoil_velocity(&self, wavelength: f64) -> f64 {
        PLANCK / (self.mass * wavelength)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InternalState {
    Bright,
    /// Pumped into the uncoupled hyperfine ground state.
    Dark,
}

/// One weighted Monte Carlo atom. `position` and `velocity` hold at `epoch`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomSample {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub epoch: f64,
    pub weight: f64,
    pub state: InternalState,
}

impl AtomSample {
    /// Closed-form ballistic state at absolute time `t`.
    pub fn at(&self, t: f64, gravity: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        let dt = t - self.epoch;
        (
            self.position + self.velocity * dt + 0.5 * gravity * dt * dt,
            self.velocity + gravity * dt,
        )
    }
}

/// Everything the transit and excitation stages need to know about the
/// cavity: its mode, the antinode coupling and the field of gravity.
#[derive(Clone, Debug)]
pub struct Apparatus {
    pub geometry: ModeGeometry,
    pub rates: CouplingRates,
    pub zeeman_factor: f64,
    /// Magnitude of the downward acceleration (m/s^2).
    pub gravity: f64,
}

impl Apparatus {
    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.gravity)
    }

    /// Half-extent of the mode region along `z`.
    fn vertical_half_extent(&self) -> f64 {
        let a = self.geometry.axis();
        let r = TRANSVERSE_CUTOFF_WAISTS * self.geometry.waist;
        0.5 * self.geometry.length * a.z.abs() + r * (1.0 - a.z * a.z).max(0.0).sqrt()
    }

    /// Half-extents of the mode footprint along `x` and `y`.
    fn horizontal_half_extents(&self) -> [f64; 2] {
        let a = self.geometry.axis();
        let r = TRANSVERSE_CUTOFF_WAISTS * self.geometry.waist;
        let ext = |c: f64| 0.5 * self.geometry.length * c.abs() + r * (1.0 - c * c).max(0.0).sqrt();
        [ext(a.x), ext(a.y)]
    }
}

/// Probability mass and truncated draw of a normal variable in `[lo, hi]`.
fn truncated_normal(
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    rng: &mut ChaCha8Rng,
) -> (f64, Option<f64>) {
    if sd == 0.0 {
        let inside = (lo..=hi).contains(&mean);
        return (if inside { 1.0 } else { 0.0 }, inside.then_some(mean));
    }
    let n = Normal::standard();
    // Reflect so the interval sits in the lower tail, where the CDF keeps
    // full relative precision.
    let (a, b, sign) = if (lo - mean) / sd > 0.0 {
        ((mean - hi) / sd, (mean - lo) / sd, -1.0)
    } else {
        ((lo - mean) / sd, (hi - mean) / sd, 1.0)
    };
    let (pa, pb) = (n.cdf(a), n.cdf(b));
    let mass = pb - pa;
    if mass <= 0.0 {
        return (0.0, None);
    }
    let u: f64 = rng.random();
    let z = n.inverse_cdf(pa + u * mass).clamp(a, b);
    (mass, Some(mean + sign * z * sd))
}

/// Time for an atom at height `dz` above the mode plane with vertical
/// velocity `vz` to fall through the plane.
fn crossing_time(dz: f64, vz: f64, g: f64) -> Option<f64> {
    let disc = vz * vz + 2.0 * g * dz;
    (dz > 0.0 && disc >= 0.0).then(|| (vz + disc.sqrt()) / g)
}

/// Draws `sample_budget` vertical phase-space points and up to two weighted
/// samples per point (inside and outside the mode slab).
pub fn sample_cloud(
    spec: &CloudSpec,
    apparatus: &Apparatus,
    seed: u64,
    sample_budget: usize,
) -> Result<Vec<AtomSample>> {
    spec.validate()?;
    ensure_positive("gravity", apparatus.gravity)?;
    if sample_budget == 0 {
        return Err(Error::domain("sample budget must be >= 1"));
    }
    if spec.atom_count == 0.0 {
        return Ok(Vec::new());
    }
    let origin = *apparatus.geometry.origin();
    let center = Vector3::new(
        origin.x + spec.offset[0],
        origin.y + spec.offset[1],
        origin.z + spec.height,
    );
    let (sr, sv, g) = (spec.rms_radius, spec.rms_velocity(), apparatus.gravity);
    let share = spec.atom_count / sample_budget as f64;
    let half_z = apparatus.vertical_half_extent();
    let half_xy = apparatus.horizontal_half_extents();

    let chunks = sample_budget.div_ceil(CHUNK);
    let parts: Vec<Vec<AtomSample>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, tag::CLOUD, c as u64);
            let n = CHUNK.min(sample_budget - c * CHUNK);
            let mut out = Vec::with_capacity(2 * n);
            for _ in 0..n {
                let z0 = center.z + sr * rng.sample::<f64, _>(StandardNormal);
                let vz = sv * rng.sample::<f64, _>(StandardNormal);
                let t_c = crossing_time(z0 - origin.z, vz, g);
                // Horizontal drift allowance while inside the mode's vertical extent.
                let margin = {
                    let v_cross = (vz * vz + 2.0 * g * (z0 - origin.z)).max(0.0).sqrt();
                    6.0 * sv * 2.0 * half_z / v_cross.max(1e-9)
                };
                let slab_half = [half_xy[0] + margin, half_xy[1] + margin];
                let mut slab = None;
                let mut slab_mass = 0.0;
                if let Some(t_c) = t_c {
                    let sx = (sr * sr + sv * sv * t_c * t_c).sqrt();
                    let mut coords = [(0.0, 0.0); 2];
                    let mut mass = 1.0;
                    for axis in 0..2 {
                        let a = slab_half[axis];
                        let o = [origin.x, origin.y][axis];
                        let mu = [center.x, center.y][axis];
                        let (m, draw) = truncated_normal(mu, sx, o - a, o + a, &mut rng);
                        mass *= m;
                        let Some(x_cross) = draw else {
                            mass = 0.0;
                            break;
                        };
                        // (x0, v) conditioned on x0 + v t_c = x_cross.
                        let (x0, v) = if sx > 0.0 {
                            let frac = sr * sr / (sx * sx);
                            let m0 = mu + (x_cross - mu) * frac;
                            let s0 = sr * sv * t_c / sx;
                            let x0 = m0 + s0 * rng.sample::<f64, _>(StandardNormal);
                            (x0, (x_cross - x0) / t_c)
                        } else {
                            (mu, 0.0)
                        };
                        coords[axis] = (x0, v);
                    }
                    if mass > 0.0 {
                        slab_mass = mass;
                        slab = Some(coords);
                    }
                }
                // Fold a negligible remainder into the slab sample.
                let outside = 1.0 - slab_mass;
                let (w_in, w_out) = if outside < 1e-12 {
                    (share, 0.0)
                } else {
                    (share * slab_mass, share * outside)
                };
                if let Some([(x0, vx), (y0, vy)]) = slab {
                    out.push(AtomSample {
                        position: Vector3::new(x0, y0, z0),
                        velocity: Vector3::new(vx, vy, vz),
                        epoch: 0.0,
                        weight: w_in,
                        state: InternalState::Bright,
                    });
                }
                if w_out > 0.0 {
                    let (p, v) =
                        draw_outside_slab(&mut rng, center, sr, sv, t_c, origin, slab_half);
                    out.push(AtomSample {
                        position: Vector3::new(p[0], p[1], z0),
                        velocity: Vector3::new(v[0], v[1], vz),
                        epoch: 0.0,
                        weight: w_out,
                        state: InternalState::Bright,
                    });
                }
            }
            out
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

/// Rejection draw of the horizontal coordinates conditioned on missing the slab.
fn draw_outside_slab(
    rng: &mut ChaCha8Rng,
    center: Vector3<f64>,
    sr: f64,
    sv: f64,
    t_c: Option<f64>,
    origin: Vector3<f64>,
    slab_half: [f64; 2],
) -> ([f64; 2], [f64; 2]) {
    loop {
        let p = [
            center.x + sr * rng.sample::<f64, _>(StandardNormal),
            center.y + sr * rng.sample::<f64, _>(StandardNormal),
        ];
        let v = [
            sv * rng.sample::<f64, _>(StandardNormal),
            sv * rng.sample::<f64, _>(StandardNormal),
        ];
        let Some(t_c) = t_c else {
            return (p, v);
        };
        let inside = (0..2).all(|a| {
            let o = [origin.x, origin.y][a];
            (p[a] + v[a] * t_c - o).abs() <= slab_half[a]
        });
        if !inside {
            return (p, v);
        }
    }
}

/// Ballistic propagation of every sample to absolute time `t`.
pub fn propagate(
    samples: &[AtomSample],
    t: f64,
    gravity: &Vector3<f64>,
) -> Result<Vec<AtomSample>> {
    samples
        .iter()
        .map(|s| {
            if !(t >= s.epoch) {
                return Err(Error::domain(format!(
                    "cannot propagate sample from t={} back to t={t}",
                    s.epoch
                )));
            }
            let (position, velocity) = s.at(t, gravity);
            Ok(AtomSample {
                position,
                velocity,
                epoch: t,
                ..s.clone()
            })
        })
        .collect()
}

/// Time-resolved ensemble coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitTrace {
    pub times: Vec<f64>,
    pub c_tot: Vec<f64>,
    pub n_eff: Vec<f64>,
    /// Weighted number of bright atoms in the whole cloud.
    pub bright: Vec<f64>,
}

impl TransitTrace {
    /// Time and value of the largest `N_eff`.
    pub fn peak(&self) -> Option<(f64, f64)> {
        smoothed_peak(&self.times, &self.n_eff, 0)
    }

    /// Peak of the centered moving average over `2 half + 1` points.
    pub fn smoothed_peak(&self, half: usize) -> Option<(f64, f64)> {
        smoothed_peak(&self.times, &self.n_eff, half)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * factor).collect();
        Self {
            times: self.times.clone(),
            c_tot: s(&self.c_tot),
            n_eff: s(&self.n_eff),
            bright: s(&self.bright),
        }
    }
}

/// Points on each side averaged when locating the peak of a binned trace.
pub const PEAK_SMOOTHING: usize = 2;

/// Argmax of the centered moving average of `values` (window truncated at
/// the ends), with the time of the central point.
pub fn smoothed_peak(times: &[f64], values: &[f64], half: usize) -> Option<(f64, f64)> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(half), (i + half + 1).min(n));
            (i, values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(i, v)| (times[i], v))
}

/// Intervals of absolute time during which a ballistic sample lies within
/// `half` of the mode plane (at most two: rising and falling).
fn plane_windows(s: &AtomSample, plane_z: f64, half: f64, g: f64) -> Vec<(f64, f64)> {
    // Height above the plane: h(t) = h0 + v t - g t^2 / 2 with t from the epoch.
    let h0 = s.position.z - plane_z;
    let v = s.velocity.z;
    let roots = |level: f64| -> Option<(f64, f64)> {
        // h(t) = level  <=>  (g/2) t^2 - v t + (level - h0) = 0
        let a = 0.5 * g;
        let disc = v * v - 4.0 * a * (level - h0);
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        Some(((v - sq) / (2.0 * a), (v + sq) / (2.0 * a)))
    };
    let mut out = Vec::with_capacity(2);
    // h >= -half between the roots of h = -half; h <= half outside those of h = +half.
    let Some((lo, hi)) = roots(-half) else {
        return out;
    };
    match roots(half) {
        None => out.push((lo, hi)),
        Some((a, b)) => {
            if a > lo {
                out.push((lo, a));
            }
            if hi > b {
                out.push((b, hi));
            }
        }
    }
    out.into_iter()
        .map(|(a, b)| (a + s.epoch, b + s.epoch))
        .filter(|&(_, b)| b >= s.epoch)
        .map(|(a, b)| (a.max(s.epoch), b))
        .collect()
}

fn trace_impl(
    samples: &[AtomSample],
    bright_until: &(dyn Fn(usize) -> f64 + Sync),
    apparatus: &Apparatus,
    times: &[f64],
) -> Result<TransitTrace> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("time grid must be strictly increasing"));
    }
    let gvec = apparatus.gravity_vector();
    let plane = apparatus.geometry.origin().z;
    let half = apparatus.vertical_half_extent();
    let nt = times.len();
    let idx: Vec<usize> = (0..samples.len()).collect();
    let partials: Vec<(Vec<f64>, Vec<f64>)> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut neff = vec![0.0; nt];
            // Bright weight changes, accumulated as a difference array.
            let mut dbright = vec![0.0; nt + 1];
            for &i in chunk {
                let s = &samples[i];
                if s.state == InternalState::Dark {
                    continue;
                }
                let until = bright_until(i);
                let first = times.partition_point(|&t| t < s.epoch);
                let last = times.partition_point(|&t| t < until);
                if first < last {
                    dbright[first] += s.weight;
                    dbright[last] -= s.weight;
                }
                for (a, b) in plane_windows(s, plane, half, apparatus.gravity) {
                    let lo = times.partition_point(|&t| t < a).max(first);
                    let hi = times.partition_point(|&t| t <= b).min(last);
                    for k in lo..hi {
                        let (r, _) = s.at(times[k], &gvec);
                        neff[k] += s.weight * mode_intensity(&apparatus.geometry, &r);
                    }
                }
            }
            (neff, dbright)
        })
        .collect();
    let mut n_eff = vec![0.0; nt];
    let mut dbright = vec![0.0; nt + 1];
    for (a, b) in &partials {
        for (x, y) in n_eff.iter_mut().zip(a) {
            *x += y;
        }
        for (x, y) in dbright.iter_mut().zip(b) {
            *x += y;
        }
    }
    let mut acc = 0.0;
    let bright = dbright[..nt]
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect();
    let c = apparatus.rates.cooperativity();
    Ok(TransitTrace {
        times: times.to_vec(),
        c_tot: n_eff
            .iter()
            .map(|&n| c_tot_from_neff(c, n, apparatus.zeeman_factor))
            .collect(),
        n_eff,
        bright,
    })
}

/// Instantaneous `N_eff(t)` and `C_tot(t)` of the bright samples on `times`.
pub fn transit_trace(
    samples: &[AtomSample],
    apparatus: &Apparatus,
    times: &[f64],
) -> Result<TransitTrace> {
    trace_impl(samples, &|_| f64::INFINITY, apparatus, times)
}

/// Transit trace with atoms going dark at the times recorded by
/// [`apply_excitation`]. Before going dark an atom follows its
/// pre-excitation trajectory; the few recoil kicks it receives meanwhile
/// are neglected here.
pub fn transit_trace_excited(
    samples: &[AtomSample],
    outcome: &ExcitationOutcome,
    apparatus: &Apparatus,
    times: &[f64],
) -> Result<TransitTrace> {
    if outcome.dark_times.len() != samples.len() {
        return Err(Error::domain(
            "excitation outcome does not match the sample set",
        ));
    }
    trace_impl(
        samples,
        &|i| outcome.dark_times[i].unwrap_or(f64::INFINITY),
        apparatus,
        times,
    )
}

/// Uniform detector bins `[start + k width, start + (k+1) width)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeBins {
    pub start: f64,
    pub width: f64,
    pub count: usize,
}

impl TimeBins {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("bin width", self.width)?;
        if !self.start.is_finite() || self.count == 0 {
            return Err(Error::domain(
                "time bins need a finite start and at least one bin",
            ));
        }
        Ok(())
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.start + (k as f64 + 0.5) * self.width)
            .collect()
    }

    pub fn edge(&self, k: usize) -> f64 {
        self.start + k as f64 * self.width
    }

    pub fn end(&self) -> f64 {
        self.edge(self.count)
    }

    /// Index of the bin containing `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start) / self.width).floor();
        (k >= 0.0 && (k as usize) < self.count).then_some(k as usize)
    }

    /// Midpoints of `substeps` equal sub-intervals of every bin.
    pub fn fine_grid(&self, substeps: usize) -> Vec<f64> {
        let h = self.width / substeps as f64;
        (0..self.count * substeps)
            .map(|j| self.start + (j as f64 + 0.5) * h)
            .collect()
    }
}

/// Transit trace averaged over each detector bin (midpoint rule with
/// `substeps` points per bin); times are the bin centers.
pub fn binned_trace(
    samples: &[AtomSample],
    apparatus: &Apparatus,
    bins: &TimeBins,
    substeps: usize,
) -> Result<TransitTrace> {
    bins.validate()?;
    if substeps == 0 {
        return Err(Error::domain("substeps must be >= 1"));
    }
    let fine = transit_trace(samples, apparatus, &bins.fine_grid(substeps))?;
    Ok(average_bins(&fine, bins, substeps))
}

pub(crate) fn average_bins(fine: &TransitTrace, bins: &TimeBins, substeps: usize) -> TransitTrace {
    let avg = |v: &[f64]| -> Vec<f64> {
        v.chunks(substeps)
            .map(|c| c.iter().sum::<f64>() / substeps as f64)
            .collect()
    };
    TransitTrace {
        times: bins.centers(),
        c_tot: avg(&fine.c_tot),
        n_eff: avg(&fine.n_eff),
        bright: avg(&fine.bright),
    }
}

/// Smallest uncalibrated peak `N_eff` accepted by [`calibrate_peak_neff`].
pub const MIN_CALIBRATION_PEAK: f64 = 1e-6;

/// Atom-number calibration against a target peak `N_eff`.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// Multiplier applied to `atom_count`.
    pub factor: f64,
    pub peak_before: f64,
    pub peak_time: f64,
    pub calibrated: CloudSpec,
}

/// Scales the cloud's atom number so the bin-averaged peak `N_eff` (after
/// [`PEAK_SMOOTHING`]) equals `target`. `N_eff` is linear in the atom number, so one pass is exact for
/// the sample set used here.
pub fn calibrate_peak_neff(
    spec: &CloudSpec,
    apparatus: &Apparatus,
    bins: &TimeBins,
    substeps: usize,
    seed: u64,
    sample_budget: usize,
    target: f64,
) -> Result<Calibration> {
    ensure_positive("calibration target", target)?;
    let samples = sample_cloud(spec, apparatus, seed, sample_budget)?;
    let trace = binned_trace(&samples, apparatus, bins, substeps)?;
    let (peak_time, peak) = trace
        .smoothed_peak(PEAK_SMOOTHING)
        .unwrap_or((f64::NAN, 0.0));
    if !(peak >= MIN_CALIBRATION_PEAK) {
        return Err(Error::domain(format!(
            "cannot calibrate: no atoms reach the cavity mode in the time window (peak N_eff {peak:e})"
        )));
    }
    let factor = target / peak;
    Ok(Calibration {
        factor,
        peak_before: peak,
        peak_time,
        calibrated: CloudSpec {
            atom_count: spec.atom_count * factor,
            ..spec.clone()
        },
    })
}

/// Resonant excitation beam switched on while the cloud is in the cavity.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationSpec {
    pub turn_on: f64,
    /// Mean number of photons scattered before an atom is pumped dark.
    pub pump_photon_budget: f64,
    /// Photon scattering rate of a bright atom in the beam (s^-1).
    pub scatter_rate: f64,
    /// Velocity kick per scattered photon (m/s).
    pub recoil_velocity: f64,
    /// Propagation direction of the beam.
    pub beam_direction: Vector3<f64>,
}

impl ExcitationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.turn_on.is_finite() && self.turn_on >= 0.0) {
            return Err(Error::domain(
                "excitation turn-on precedes the simulation start",
            ));
        }
        if !(self.pump_photon_budget >= 1.0 && self.pump_photon_budget.is_finite()) {
            return Err(Error::domain("pump photon budget must be >= 1"));
        }
        ensure_positive("scatter rate", self.scatter_rate)?;
        ensure_non_negative("recoil velocity", self.recoil_velocity)?;
        if !(self.beam_direction.norm() > 0.0) {
            return Err(Error::domain("beam direction must be non-zero"));
        }
        Ok(())
    }
}

/// A scattering event that put light into the cavity mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmissionEvent {
    pub time: f64,
    /// Expected number of cavity photons (sample weight times branching ratio).
    pub weight: f64,
    pub sample: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationOutcome {
    /// Post-excitation samples; atoms that went dark hold their state at the
    /// moment of the last scatter.
    pub samples: Vec<AtomSample>,
    /// When each input sample went dark (`None` if it was dark already).
    pub dark_times: Vec<Option<f64>>,
    /// Cavity emissions ordered by time.
    pub events: Vec<EmissionEvent>,
}

impl ExcitationOutcome {
    pub fn total_emission(&self) -> f64 {
        self.events.iter().map(|e| e.weight).sum()
    }
}

/// Probability that a scatter at local cooperativity `c_loc` goes into the
/// mode: `4 C gamma / (2 gamma (1 + 2 C)) = 2C / (1 + 2C)`.
pub fn mode_branching(c_loc: f64) -> f64 {
    2.0 * c_loc / (1.0 + 2.0 * c_loc)
}

/// Scatters photons from every bright atom from `turn_on` until it is pumped
/// dark, recording emissions into the cavity and the recoil push.
pub fn apply_excitation(
    samples: &[AtomSample],
    apparatus: &Apparatus,
    excitation: &ExcitationSpec,
    seed: u64,
) -> Result<ExcitationOutcome> {
    excitation.validate()?;
    if let Some(s) = samples.iter().find(|s| s.epoch > excitation.turn_on) {
        return Err(Error::domain(format!(
            "excitation turn-on {} precedes sample epoch {}",
            excitation.turn_on, s.epoch
        )));
    }
    let gvec = apparatus.gravity_vector();
    let kick = excitation.recoil_velocity * excitation.beam_direction.normalize();
    let coupling = apparatus.zeeman_factor * apparatus.rates.cooperativity();
    let wait = Exp::new(excitation.scatter_rate).map_err(|e| Error::domain(e.to_string()))?;
    let p_dark = 1.0 / excitation.pump_photon_budget;
    let count = Geometric::new(p_dark).map_err(|e| Error::domain(e.to_string()))?;

    let idx: Vec<usize> = (0..samples.len()).collect();
    let parts: Vec<Vec<(AtomSample, Option<f64>, Vec<EmissionEvent>)>> = idx
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut rng = substream(seed, tag::EXCITATION, c as u64);
            chunk
                .iter()
                .map(|&i| {
                    let s = &samples[i];
                    if s.state == InternalState::Dark {
                        return (s.clone(), None, Vec::new());
                    }
                    let scatters = 1 + count.sample(&mut rng);
                    let (mut r, mut v) = s.at(excitation.turn_on, &gvec);
                    let mut t = excitation.turn_on;
                    let mut events = Vec::new();
                    for _ in 0..scatters {
                        let dt: f64 = wait.sample(&mut rng);
                        r += v * dt + 0.5 * gvec * dt * dt;
                        v += gvec * dt;
                        t += dt;
                        let c_loc = coupling * mode_intensity(&apparatus.geometry, &r);
                        if c_loc > 0.0 {
                            events.push(EmissionEvent {
                                time: t,
                                weight: s.weight * mode_branching(c_loc),
                                sample: i,
                            });
                        }
                        v += kick;
                    }
                    let dark = AtomSample {
                        position: r,
                        velocity: v,
                        epoch: t,
                        weight: s.weight,
                        state: InternalState::Dark,
                    };
                    (dark, Some(t), events)
                })
                .collect()
        })
        .collect();

    let mut out = ExcitationOutcome {
        samples: Vec::with_capacity(samples.len()),
        dark_times: Vec::with_capacity(samples.len()),
        events: Vec::new(),
    };
    for (s, d, e) in parts.into_iter().flatten() {
        out.samples.push(s);
        out.dark_times.push(d);
        out.events.extend(e);
    }
    out.events
        .sort_by(|a, b| a.time.total_cmp(&b.time).then(a.sample.cmp(&b.sample)));
    Ok(out)
}

/// Free-fall time from `height` to the mode plane, starting at rest.
pub fn fall_time(height: f64, gravity: f64) -> f64 {
    (2.0 * height / gravity).sqrt()
}

/// Default gravity magnitude.
pub fn standard_gravity() -> f64 {
    STANDARD_GRAVITY
}
