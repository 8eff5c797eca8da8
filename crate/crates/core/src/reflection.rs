//! Steady-state reflection of a weak probe from the atom-loaded cavity.
//!
//! The laser, cavity and atomic frequencies coincide except for the
//! laser-atom detuning `delta = (omega_L - omega_A) / gamma`. The reflected
//! amplitude relative to the off-resonant level is
//! `-1 + (v / P) (1 + delta^2) / (1 + delta^2 / P + 2 i delta C_tot / P)`
//! with `P = 2 C_tot + 1` the effective Purcell factor and `v` the fringe
//! visibility of the empty cavity.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::mode_field::{mode_intensity, IntensityLattice, ModeGeometry};
use crate::rng::{substream, tag};

/// Laser detuning (in units of gamma) above which the `g >> gamma` lineshape
/// is flagged, as a fraction of `g / gamma`.
pub const VALIDITY_FRACTION: f64 = 0.3;

/// Empty-cavity fringe visibility `1 - sqrt(I_min / I_max)`.
pub fn visibility(i_min: f64, i_max: f64) -> Result<f64> {
    ensure_non_negative("I_min", i_min)?;
    ensure_positive("I_max", i_max)?;
    if i_min > i_max {
        return Err(Error::domain(format!(
            "I_min ({i_min}) exceeds I_max ({i_max})"
        )));
    }
    Ok(1.0 - (i_min / i_max).sqrt())
}

#[inline]
pub fn purcell_factor(c_tot: f64) -> f64 {
    2.0 * c_tot + 1.0
}

/// `I_atoms / I_max` with the laser on the atomic resonance.
pub fn reflected_fraction_resonant(visibility: f64, c_tot: f64) -> f64 {
    let a = -1.0 + visibility / purcell_factor(c_tot);
    a * a
}

/// Complex reflected amplitude at laser-atom detuning `delta` (units of gamma).
pub fn reflected_amplitude(visibility: f64, c_tot: f64, delta: f64) -> Complex64 {
    let p = purcell_factor(c_tot);
    let d2 = delta * delta;
    let denom = Complex64::new(1.0 + d2 / p, 2.0 * delta * c_tot / p);
    Complex64::new(-1.0, 0.0) + (visibility / p) * (1.0 + d2) / denom
}

/// `I_atoms / I_max` versus laser-atom detuning (units of gamma).
pub fn reflected_fraction_detuned(visibility: f64, c_tot: f64, delta: f64) -> f64 {
    reflected_amplitude(visibility, c_tot, delta).norm_sqr()
}

/// Reflected fraction on atomic resonance with the cavity offset by
/// `cavity_delta` half-widths `kappa`: `|-1 + v / (P + i cavity_delta)|^2`.
pub fn reflected_fraction_cavity_offset(visibility: f64, c_tot: f64, cavity_delta: f64) -> f64 {
    let p = purcell_factor(c_tot);
    (Complex64::new(-1.0, 0.0) + visibility / Complex64::new(p, cavity_delta)).norm_sqr()
}

/// Whether `delta` lies outside the regime `g / gamma >> |delta|` assumed by
/// [`reflected_fraction_detuned`].
pub fn beyond_validity(delta: f64, g: f64, gamma: f64) -> bool {
    delta.abs() > VALIDITY_FRACTION * g / gamma
}

/// Measured count rates (s^-1): off resonance, empty cavity on resonance,
/// and with atoms present.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRateTriple {
    pub i_max: f64,
    pub i_min: f64,
    pub i_atoms: f64,
}

impl CountRateTriple {
    /// The detection-run rates of the fiber-chip cavity.
    pub fn fiber_chip() -> Self {
        Self {
            i_max: 419e3,
            i_min: 272e3,
            i_atoms: 315e3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("I_min", self.i_min)?;
        ensure_positive("I_max", self.i_max)?;
        ensure_positive("I_atoms", self.i_atoms)?;
        if self.i_min > self.i_max || self.i_atoms > self.i_max {
            return Err(Error::domain(format!(
                "count rates must satisfy I_min, I_atoms <= I_max, got {self:?}"
            )));
        }
        if self.i_atoms < self.i_min {
            return Err(Error::domain(format!(
                "negative cooperativity: I_atoms ({}) below I_min ({})",
                self.i_atoms, self.i_min
            )));
        }
        Ok(())
    }
}

/// Cooperativity recovered from a [`CountRateTriple`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inversion {
    pub visibility: f64,
    pub purcell: f64,
    pub c_tot: f64,
    pub n_eff: f64,
}

/// Inverts the resonant lineshape on the branch `sqrt(I_atoms/I_max) = 1 - v/P`.
pub fn invert_to_cooperativity(
    counts: &CountRateTriple,
    cooperativity: f64,
    zeeman_factor: f64,
) -> Result<Inversion> {
    counts.validate()?;
    ensure_positive("cooperativity", cooperativity)?;
    let v = visibility(counts.i_min, counts.i_max)?;
    let depth = 1.0 - (counts.i_atoms / counts.i_max).sqrt();
    if v == 0.0 {
        return Err(Error::domain(
            "zero fringe visibility: cooperativity is unobservable",
        ));
    }
    let purcell = v / depth;
    // I_atoms == I_min must give exactly P = 1.
    let purcell = if counts.i_atoms == counts.i_min {
        1.0
    } else {
        purcell
    };
    let c_tot = (purcell - 1.0) / 2.0;
    if c_tot < 0.0 {
        return Err(Error::domain("negative cooperativity"));
    }
    Ok(Inversion {
        visibility: v,
        purcell,
        c_tot,
        n_eff: c_tot / (zeeman_factor * cooperativity),
    })
}

/// Per-drop distribution of the number of atoms in the mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomNumberModel {
    /// No fluctuations: `C_tot` is pinned at `zeeman_factor * C * <N_eff>`.
    Fixed,
    /// Poisson atom number with independent per-atom intensities.
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum IntensityModel {
    Antinode,
    /// Uniform axial phase and uniform transverse disk of radius
    /// `transverse_cutoff` waists.
    ModeSampled {
        transverse_cutoff: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationModel {
    pub number: AtomNumberModel,
    pub intensity: IntensityModel,
}

impl Default for FluctuationModel {
    fn default() -> Self {
        Self {
            number: AtomNumberModel::Poisson,
            intensity: IntensityModel::ModeSampled {
                transverse_cutoff: 1.0,
            },
        }
    }
}

impl FluctuationModel {
    pub fn fixed() -> Self {
        Self {
            number: AtomNumberModel::Fixed,
            intensity: IntensityModel::Antinode,
        }
    }
}

/// Parameters of the drop- and laser-averaged lineshape.
#[derive(Clone, Debug, PartialEq)]
pub struct LineshapeSpec {
    pub visibility: f64,
    /// Single-atom cooperativity `C` at an antinode.
    pub cooperativity: f64,
    pub zeeman_factor: f64,
    /// Half atomic linewidth (rad/s); converts the laser width to units of gamma.
    pub gamma: f64,
    /// Laser FWHM (rad/s) of a Gaussian lineshape.
    pub laser_fwhm: f64,
    pub fluctuations: FluctuationModel,
}

impl LineshapeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(Error::domain(format!(
                "visibility must lie in (0, 1], got {}",
                self.visibility
            )));
        }
        ensure_non_negative("cooperativity", self.cooperativity)?;
        ensure_positive("zeeman factor", self.zeeman_factor)?;
        ensure_positive("gamma", self.gamma)?;
        ensure_non_negative("laser linewidth", self.laser_fwhm)?;
        if let IntensityModel::ModeSampled { transverse_cutoff } = self.fluctuations.intensity {
            ensure_positive("transverse cutoff", transverse_cutoff)?;
        }
        Ok(())
    }

    /// Laser rms width in units of gamma.
    pub fn laser_sigma(&self) -> f64 {
        self.laser_fwhm / self.gamma / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }

    pub fn coupling(&self) -> f64 {
        self.zeeman_factor * self.cooperativity
    }
}

/// Normalized Gaussian quadrature offsets for the laser lineshape.
fn laser_nodes(sigma: f64) -> Vec<(f64, f64)> {
    if sigma <= 0.0 {
        return vec![(0.0, 1.0)];
    }
    let h = (sigma / 4.0).min(0.125);
    let n = (6.0 * sigma / h).ceil() as i64;
    let raw: Vec<(f64, f64)> = (-n..=n)
        .map(|j| {
            let x = j as f64 * h;
            (x, (-0.5 * x * x / (sigma * sigma)).exp())
        })
        .collect();
    let norm: f64 = raw.iter().map(|(_, w)| w).sum();
    raw.into_iter().map(|(x, w)| (x, w / norm)).collect()
}

const MODE_LATTICE_RESOLUTION: usize = 64;

/// Quadrature evaluator of the averaged lineshape on a fixed detuning grid.
///
/// For the Poisson model the curve is `sum_n Pois(n; lambda) h_n(delta)`,
/// where `h_n` (the laser-averaged lineshape for `n` atoms with random
/// intensities) does not depend on the mean atom number. The `h_n` are
/// built once, so re-evaluating at a new `<N_eff>` is cheap.
#[derive(Clone, Debug)]
pub struct AveragedLineshape {
    spec: LineshapeSpec,
    deltas: Vec<f64>,
    nodes: Vec<(f64, f64)>,
    lattice: Option<IntensityLattice>,
    /// `h[n][i]` for the Poisson model.
    per_count: Vec<Vec<f64>>,
}

impl AveragedLineshape {
    pub fn new(spec: LineshapeSpec, geom: &ModeGeometry, deltas: &[f64]) -> Result<Self> {
        spec.validate()?;
        if deltas.iter().any(|d| !d.is_finite()) {
            return Err(Error::domain("detuning grid contains non-finite values"));
        }
        let lattice = match spec.fluctuations.number {
            AtomNumberModel::Fixed => None,
            AtomNumberModel::Poisson => Some(match spec.fluctuations.intensity {
                IntensityModel::Antinode => IntensityLattice::antinode(1),
                IntensityModel::ModeSampled { transverse_cutoff } => {
                    IntensityLattice::mode_sampled(
                        geom,
                        transverse_cutoff,
                        MODE_LATTICE_RESOLUTION,
                    )?
                }
            }),
        };
        let nodes = laser_nodes(spec.laser_sigma());
        Ok(Self {
            spec,
            deltas: deltas.to_vec(),
            nodes,
            lattice,
            per_count: Vec::new(),
        })
    }

    pub fn spec(&self) -> &LineshapeSpec {
        &self.spec
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// Mean single-atom intensity of the fluctuation model.
    pub fn mean_intensity(&self) -> f64 {
        self.lattice.as_ref().map_or(1.0, IntensityLattice::mean)
    }

    fn laser_averaged(&self, c_tot: f64, delta: f64) -> f64 {
        self.nodes
            .iter()
            .map(|&(x, w)| w * reflected_fraction_detuned(self.spec.visibility, c_tot, delta + x))
            .sum()
    }

    fn ensure_counts(&mut self, n_max: usize) {
        if self.per_count.len() > n_max {
            return;
        }
        let lattice = self.lattice.as_ref().expect("poisson model has a lattice");
        // Grow geometrically so repeated extensions stay cheap.
        let n_max = n_max.max(2 * self.per_count.len());
        let sums = lattice.sum_distributions(n_max);
        let res = lattice.resolution() as f64;
        let coupling = self.spec.coupling();
        let k_len = sums[n_max].len();
        let columns: Vec<Vec<f64>> = self
            .deltas
            .par_iter()
            .map(|&delta| {
                let g: Vec<f64> = (0..k_len)
                    .map(|k| self.laser_averaged(coupling * k as f64 / res, delta))
                    .collect();
                sums.iter()
                    .map(|p| p.iter().zip(&g).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        self.per_count = (0..=n_max)
            .map(|n| columns.iter().map(|col| col[n]).collect())
            .collect();
    }

    /// Averaged reflected fraction at every grid detuning for mean `<N_eff>`.
    pub fn evaluate(&mut self, mean_neff: f64) -> Result<Vec<f64>> {
        ensure_non_negative("mean effective atom number", mean_neff)?;
        match self.spec.fluctuations.number {
            AtomNumberModel::Fixed => {
                let c_tot = self.spec.coupling() * mean_neff;
                Ok(self
                    .deltas
                    .iter()
                    .map(|&d| self.laser_averaged(c_tot, d))
                    .collect())
            }
            AtomNumberModel::Poisson => {
                let lambda = mean_neff / self.mean_intensity();
                let n_max = (lambda + 10.0 * lambda.sqrt() + 10.0).ceil() as usize;
                self.ensure_counts(n_max);
                let mut out = vec![0.0; self.deltas.len()];
                let mut p = (-lambda).exp();
                for n in 0..=n_max {
                    if n > 0 {
                        p *= lambda / n as f64;
                    }
                    for (o, h) in out.iter_mut().zip(&self.per_count[n]) {
                        *o += p * h;
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Deterministic quadrature of the averaged lineshape.
pub fn averaged_lineshape(
    spec: &LineshapeSpec,
    geom: &ModeGeometry,
    mean_neff: f64,
    deltas: &[f64],
) -> Result<Vec<f64>> {
    AveragedLineshape::new(spec.clone(), geom, deltas)?.evaluate(mean_neff)
}

/// Draws the effective atom number and laser offset (units of gamma) of one
/// drop under the fluctuation model of `spec`.
pub fn sample_drop<R: Rng + ?Sized>(
    spec: &LineshapeSpec,
    geom: &ModeGeometry,
    mean_neff: f64,
    rng: &mut R,
) -> (f64, f64) {
    let n_eff = match spec.fluctuations.number {
        AtomNumberModel::Fixed => mean_neff,
        AtomNumberModel::Poisson => {
            let mean_i = match spec.fluctuations.intensity {
                IntensityModel::Antinode => 1.0,
                IntensityModel::ModeSampled { transverse_cutoff } => {
                    let u = 2.0 * transverse_cutoff * transverse_cutoff;
                    0.5 * (1.0 - (-u).exp()) / u
                }
            };
            let lambda = mean_neff / mean_i;
            let n = if lambda > 0.0 {
                Poisson::new(lambda).expect("positive mean").sample(rng) as usize
            } else {
                0
            };
            let perp = geom.transverse();
            let perp2 = geom.axis().cross(&perp);
            (0..n)
                .map(|_| match spec.fluctuations.intensity {
                    IntensityModel::Antinode => 1.0,
                    IntensityModel::ModeSampled { transverse_cutoff } => {
                        let z = rng.random::<f64>() * 0.5 * geom.wavelength;
                        let rho = transverse_cutoff * geom.waist * rng.random::<f64>().sqrt();
                        let phi = rng.random::<f64>() * std::f64::consts::TAU;
                        let r = geom.origin()
                            + z * geom.axis()
                            + rho * (phi.cos() * perp + phi.sin() * perp2);
                        mode_intensity(geom, &r)
                    }
                })
                .sum()
        }
    };
    let sigma = spec.laser_sigma();
    let offset = if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    } else {
        0.0
    };
    (n_eff, offset)
}

/// Seeded Monte Carlo estimate of the same average, sampling drops directly
/// (atom number, atom positions in the mode, laser frequency offset).
pub fn averaged_lineshape_mc(
    spec: &LineshapeSpec,
    geom: &ModeGeometry,
    mean_neff: f64,
    deltas: &[f64],
    drops: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    ensure_non_negative("mean effective atom number", mean_neff)?;
    if drops == 0 {
        return Err(Error::domain(
            "Monte Carlo lineshape needs at least one drop",
        ));
    }
    let coupling = spec.coupling();
    Ok(deltas
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| {
            let mut rng = substream(seed, tag::LINESHAPE, i as u64);
            let acc: f64 = (0..drops)
                .map(|_| {
                    let (n_eff, offset) = sample_drop(spec, geom, mean_neff, &mut rng);
                    reflected_fraction_detuned(spec.visibility, coupling * n_eff, delta + offset)
                })
                .sum();
            acc / drops as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const V_CHIP: f64 = 0.194_292_436_547_666_5;

    fn geom() -> ModeGeometry {
        ModeGeometry::horizontal(4.6e-6, 780.241e-9, 133e-6).unwrap()
    }

    fn spec(fluct: FluctuationModel, fwhm: f64) -> LineshapeSpec {
        LineshapeSpec {
            visibility: V_CHIP,
            cooperativity: 0.8,
            zeeman_factor: 3.0 / 7.0,
            gamma: 2.0 * std::f64::consts::PI * 3e6,
            laser_fwhm: fwhm,
            fluctuations: fluct,
        }
    }

    #[test]
    fn visibility_examples() {
        assert_relative_eq!(
            visibility(272e3, 419e3).unwrap(),
            V_CHIP,
            max_relative = 1e-12
        );
        assert_eq!(visibility(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(visibility(0.0, 5.0).unwrap(), 1.0);
        assert!(visibility(6.0, 5.0).is_err());
    }

    #[test]
    fn resonant_examples() {
        let empty = reflected_fraction_resonant(V_CHIP, 0.0);
        assert_relative_eq!(empty, 272.0 / 419.0, max_relative = 1e-12);
        let loaded = reflected_fraction_resonant(V_CHIP, 0.231);
        assert_relative_eq!(loaded, 0.751_871_144_429_632_8, max_relative = 1e-12);
        assert!((loaded * 419e3 - 315e3).abs() < 0.5e3);
        assert!(1.0 - reflected_fraction_resonant(V_CHIP, 1e12) < 1e-11);
    }

    #[test]
    fn detuned_matches_high_precision_oracle() {
        // (v, C_tot, delta, |r|^2) from a 40-digit mpmath evaluation.
        let cases = [
            (0.813252, 1.618761, -6.837158, 0.206_417_663_614_464_84),
            (0.856524, 2.104571, -4.797634, 0.387_201_459_469_215_54),
            (0.75513, 1.782179, 7.188325, 0.242_858_392_548_819_49),
            (0.684544, 1.910684, 2.899257, 0.567_110_832_109_431_05),
            (0.473084, 3.313481, -3.477737, 0.776_144_278_439_773_18),
            (0.552293, 4.632482, 6.659143, 0.689_478_753_678_052_83),
            (0.113816, 0.580669, -1.053507, 0.875_926_385_653_514_17),
            (0.830879, 1.143429, -4.680922, 0.203_534_735_335_552_58),
            (0.853702, 3.027792, 5.908246, 0.462_995_605_250_977_76),
            (0.367754, 1.129335, 7.57303, 0.460_241_912_743_918_69),
        ];
        for (v, c, d, expected) in cases {
            assert_relative_eq!(
                reflected_fraction_detuned(v, c, d),
                expected,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn detuned_wings_approach_empty_dip() {
        let wing = reflected_fraction_detuned(V_CHIP, 0.231, 1e6);
        assert_relative_eq!(wing, (1.0 - V_CHIP).powi(2), max_relative = 1e-9);
        assert!((wing - 0.649).abs() < 0.001);
    }

    #[test]
    fn inversion_examples() {
        let inv = invert_to_cooperativity(&CountRateTriple::fiber_chip(), 0.8, 3.0 / 7.0).unwrap();
        assert_relative_eq!(inv.c_tot, 0.230_742_633_290_768, max_relative = 1e-10);
        assert_relative_eq!(inv.n_eff, 0.672_999_347_098_073_3, max_relative = 1e-10);
        let none = CountRateTriple {
            i_atoms: 272e3,
            ..CountRateTriple::fiber_chip()
        };
        assert_eq!(
            invert_to_cooperativity(&none, 0.8, 3.0 / 7.0)
                .unwrap()
                .c_tot,
            0.0
        );
        let below = CountRateTriple {
            i_atoms: 250e3,
            ..CountRateTriple::fiber_chip()
        };
        let err = invert_to_cooperativity(&below, 0.8, 3.0 / 7.0).unwrap_err();
        assert!(err.to_string().contains("negative cooperativity"));
    }

    #[test]
    fn validity_flag() {
        // g/gamma = 100/3: threshold at 10 gamma.
        assert!(!beyond_validity(9.9, 100.0, 3.0));
        assert!(beyond_validity(-10.1, 100.0, 3.0));
    }

    #[test]
    fn cavity_offset_reduces_to_resonant() {
        for c in [0.0, 0.23, 2.0] {
            assert_relative_eq!(
                reflected_fraction_cavity_offset(V_CHIP, c, 0.0),
                reflected_fraction_resonant(V_CHIP, c),
                max_relative = 1e-14
            );
        }
        assert!(reflected_fraction_cavity_offset(V_CHIP, 0.0, 1e6) > 1.0 - 1e-9);
    }

    #[test]
    fn averaged_reduces_pointwise_without_fluctuations() {
        let deltas: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.7).collect();
        let curve =
            averaged_lineshape(&spec(FluctuationModel::fixed(), 0.0), &geom(), 1.0, &deltas)
                .unwrap();
        for (d, y) in deltas.iter().zip(curve) {
            assert_relative_eq!(
                y,
                reflected_fraction_detuned(V_CHIP, 0.8 * 3.0 / 7.0, *d),
                max_relative = 1e-14
            );
        }
        let poisson = spec(
            FluctuationModel::default(),
            2.0 * std::f64::consts::PI * 1e6,
        );
        let flat = averaged_lineshape(&poisson, &geom(), 0.0, &deltas).unwrap();
        for y in flat {
            assert_relative_eq!(y, (1.0 - V_CHIP).powi(2), max_relative = 1e-12);
        }
    }

    #[test]
    fn quadrature_agrees_with_monte_carlo() {
        let s = spec(
            FluctuationModel::default(),
            2.0 * std::f64::consts::PI * 2e6,
        );
        let deltas = [-3.0, -1.0, 0.0, 0.5, 2.0];
        let quad = averaged_lineshape(&s, &geom(), 1.1, &deltas).unwrap();
        let mc = averaged_lineshape_mc(&s, &geom(), 1.1, &deltas, 40_000, 11).unwrap();
        for (q, m) in quad.iter().zip(&mc) {
            // Per-drop spread is below 0.1, so 40k drops give sigma < 5e-4.
            assert!((q - m).abs() < 2e-3, "quadrature {q} vs mc {m}");
        }
    }

    #[test]
    fn broadening_reduces_contrast() {
        let deltas = [0.0, 50.0];
        let wing = (1.0 - V_CHIP).powi(2);
        let mut last = f64::INFINITY;
        for mhz in [0.0, 1.0, 3.0, 6.0, 12.0] {
            let s = spec(
                FluctuationModel::default(),
                2.0 * std::f64::consts::PI * mhz * 1e6,
            );
            let curve = averaged_lineshape(&s, &geom(), 1.1, &deltas).unwrap();
            let contrast = (curve[0] - wing).abs();
            assert!(
                contrast < last,
                "contrast {contrast} at {mhz} MHz not below {last}"
            );
            last = contrast;
        }
    }

    #[test]
    fn poisson_mixture_extends_cache() {
        let s = spec(FluctuationModel::default(), 0.0);
        let mut model = AveragedLineshape::new(s, &geom(), &[0.0, 1.0]).unwrap();
        let small = model.evaluate(0.2).unwrap();
        let large = model.evaluate(6.0).unwrap();
        let again = model.evaluate(0.2).unwrap();
        assert_eq!(small, again);
        assert!(large[0] > small[0]);
    }

    proptest! {
        #[test]
        fn detuned_at_resonance_equals_resonant(v in 0.001f64..=1.0, c in 0.0f64..50.0) {
            let a = reflected_fraction_detuned(v, c, 0.0);
            let b = reflected_fraction_resonant(v, c);
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }

        #[test]
        fn detuned_is_even_and_bounded(v in 0.001f64..=1.0, c in 0.0f64..50.0, d in -100.0f64..100.0) {
            let f = reflected_fraction_detuned(v, c, d);
            prop_assert!((f - reflected_fraction_detuned(v, c, -d)).abs() <= 1e-14);
            prop_assert!((0.0..=1.0 + 1e-15).contains(&f));
        }

        #[test]
        fn resonant_strictly_increasing(v in 0.01f64..0.99, c in 0.0f64..20.0, dc in 1e-3f64..5.0) {
            prop_assert!(reflected_fraction_resonant(v, c + dc) > reflected_fraction_resonant(v, c));
        }

        #[test]
        fn inversion_round_trip(v in 0.05f64..0.95, c in 0.0f64..10.0) {
            let i_max = 1e5;
            let counts = CountRateTriple {
                i_max,
                i_min: i_max * (1.0 - v).powi(2),
                i_atoms: i_max * reflected_fraction_resonant(v, c),
            };
            let inv = invert_to_cooperativity(&counts, 1.0, 1.0).unwrap();
            prop_assert!((inv.c_tot - c).abs() <= 1e-8 * (1.0 + c));
        }
    }
}
