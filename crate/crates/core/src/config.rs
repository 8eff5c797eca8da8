//! Scenario configuration: a TOML file with one section per pipeline stage.
//!
//! Frequencies are given in Hz as `x / 2 pi` (for example `coupling_hz` is
//! `g / 2 pi`); everything else is SI. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cavity_core::{kappa_from_geometry, CavitySpec, CouplingRates, TransitionSpec};
use crate::cloud_mc::{Apparatus, CloudSpec, TimeBins};
use crate::constants::{
    two_pi_times, ATOMIC_MASS_UNIT, RB85_D2_WAVELENGTH, SPEED_OF_LIGHT, STANDARD_GRAVITY,
};
use crate::detector_chain::DetectionChainSpec;
use crate::error::{Error, Result};
use crate::fitting::FitConfig;
use crate::mode_field::ModeGeometry;
use crate::reflection::{visibility, FluctuationModel, IntensityModel, LineshapeSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub transition: TransitionSection,
    pub cavity: CavitySection,
    pub geometry: GeometrySection,
    pub cloud: CloudSection,
    pub calibration: CalibrationSection,
    pub probe: ProbeSection,
    pub chain: ChainSection,
    pub tof: TofSection,
    pub scan: ScanSection,
    pub noise: NoiseSection,
    pub pulse: PulseSection,
    pub fit: FitSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionSection {
    pub wavelength_m: f64,
    /// `gamma / 2 pi`, half the natural linewidth.
    pub half_linewidth_hz: f64,
    pub zeeman_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavitySection {
    pub length_m: f64,
    pub finesse: f64,
    pub waist_m: f64,
    /// `g / 2 pi` at an antinode.
    pub coupling_hz: f64,
    /// `kappa / 2 pi`; derived from length and finesse when absent.
    pub kappa_hz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub origin_m: [f64; 3],
    pub axis: [f64; 3],
    pub gravity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudSection {
    pub atom_count: f64,
    pub height_m: f64,
    pub offset_m: [f64; 2],
    pub rms_radius_m: f64,
    pub temperature_k: f64,
    pub mass_amu: f64,
    /// Monte Carlo samples per drop.
    pub sample_budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    /// Rescale `atom_count` so the peak bin-averaged `N_eff` hits the target.
    pub enabled: bool,
    pub target_peak_neff: f64,
    pub sample_budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    /// Detected count rate far from cavity resonance (s^-1).
    pub i_max: f64,
    /// Detected count rate on the empty-cavity resonance (s^-1).
    pub i_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub transmission: f64,
    pub efficiency: f64,
    pub dead_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TofSection {
    pub drops: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub bin_width_s: f64,
    /// Midpoint samples per bin when averaging `N_eff`.
    pub substeps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub drops: usize,
    pub mean_neff: f64,
    /// Detuning grid in units of gamma.
    pub delta_min: f64,
    pub delta_max: f64,
    pub points: usize,
    pub laser_fwhm_hz: f64,
    pub integration_s: f64,
    pub fluctuations: FluctuationModel,
    pub auto_fit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub drops: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub bin_width_s: f64,
    pub substeps: usize,
    /// Clouds averaged into the mean coupling trace.
    pub trace_clouds: usize,
    /// Rms cavity-length jitter, constant within a drop (m).
    pub jitter_rms_m: f64,
    /// Static length offset of the lock point from resonance (m).
    pub jitter_offset_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub drops: usize,
    pub bin_width_s: f64,
    pub bins_before: usize,
    pub bins_after: usize,
    /// Excitation turn-on; the kinematic peak arrival time when absent.
    pub turn_on_s: Option<f64>,
    pub scatter_rate: f64,
    pub pump_photon_budget: f64,
    pub beam_direction: [f64; 3],
    /// Cavity-atom detuning `/ 2 pi` (Hz).
    pub cavity_detuning_hz: f64,
    /// Fraction of intracavity photons leaving through the fiber port.
    pub escape_efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub float_visibility: bool,
    pub float_linewidth: bool,
    pub max_iterations: usize,
    pub step_tolerance: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("out"),
            transition: TransitionSection::default(),
            cavity: CavitySection::default(),
            geometry: GeometrySection::default(),
            cloud: CloudSection::default(),
            calibration: CalibrationSection::default(),
            probe: ProbeSection::default(),
            chain: ChainSection::default(),
            tof: TofSection::default(),
            scan: ScanSection::default(),
            noise: NoiseSection::default(),
            pulse: PulseSection::default(),
            fit: FitSection::default(),
        }
    }
}

impl Default for TransitionSection {
    fn default() -> Self {
        Self {
            wavelength_m: RB85_D2_WAVELENGTH,
            half_linewidth_hz: 3e6,
            zeeman_factor: 3.0 / 7.0,
        }
    }
}

impl Default for CavitySection {
    fn default() -> Self {
        Self {
            length_m: 133e-6,
            finesse: 280.0,
            waist_m: 4.6e-6,
            coupling_hz: 100e6,
            kappa_hz: None,
        }
    }
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            origin_m: [0.0; 3],
            axis: [1.0, 0.0, 0.0],
            gravity: STANDARD_GRAVITY,
        }
    }
}

impl Default for CloudSection {
    fn default() -> Self {
        let c = CloudSpec::default();
        Self {
            atom_count: c.atom_count,
            height_m: c.height,
            offset_m: c.offset,
            rms_radius_m: c.rms_radius,
            temperature_k: c.temperature,
            mass_amu: c.mass / ATOMIC_MASS_UNIT,
            sample_budget: 20_000,
        }
    }
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            enabled: true,
            target_peak_neff: 0.7,
            sample_budget: 200_000,
        }
    }
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            i_max: 419e3,
            i_min: 272e3,
        }
    }
}

impl Default for ChainSection {
    fn default() -> Self {
        let c = DetectionChainSpec::default();
        Self {
            transmission: c.transmission,
            efficiency: c.efficiency,
            dead_time_s: c.dead_time,
        }
    }
}

impl Default for TofSection {
    fn default() -> Self {
        Self {
            drops: 34,
            start_s: 30e-3,
            end_s: 46e-3,
            bin_width_s: 250e-6,
            substeps: 50,
        }
    }
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            drops: 34,
            mean_neff: 1.1,
            delta_min: -6.0,
            delta_max: 6.0,
            points: 25,
            laser_fwhm_hz: 1e6,
            integration_s: 250e-6,
            fluctuations: FluctuationModel::default(),
            auto_fit: true,
        }
    }
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            drops: 48,
            start_s: 32e-3,
            end_s: 44e-3,
            bin_width_s: 10e-6,
            substeps: 2,
            trace_clouds: 8,
            jitter_rms_m: 300e-12,
            jitter_offset_m: 150e-12,
        }
    }
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            drops: 34,
            bin_width_s: 10e-6,
            bins_before: 20,
            bins_after: 80,
            turn_on_s: None,
            scatter_rate: 1e7,
            pump_photon_budget: 3.0,
            beam_direction: [0.0, 0.0, 1.0],
            cavity_detuning_hz: 0.0,
            escape_efficiency: 1.0,
        }
    }
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitConfig::default();
        Self {
            float_visibility: f.float_visibility,
            float_linewidth: f.float_linewidth,
            max_iterations: f.max_iterations,
            step_tolerance: f.step_tolerance,
        }
    }
}

struct Checker;

impl Checker {
    fn positive(path: &str, x: f64) -> Result<()> {
        if x.is_finite() && x > 0.0 {
            Ok(())
        } else {
            Err(Error::config(
                path,
                format!("must be finite and > 0, got {x}"),
            ))
        }
    }

    fn non_negative(path: &str, x: f64) -> Result<()> {
        if x.is_finite() && x >= 0.0 {
            Ok(())
        } else {
            Err(Error::config(
                path,
                format!("must be finite and >= 0, got {x}"),
            ))
        }
    }

    fn fraction(path: &str, x: f64) -> Result<()> {
        if x > 0.0 && x <= 1.0 {
            Ok(())
        } else {
            Err(Error::config(path, format!("must lie in (0, 1], got {x}")))
        }
    }

    fn at_least(path: &str, n: usize, min: usize) -> Result<()> {
        if n >= min {
            Ok(())
        } else {
            Err(Error::config(path, format!("must be >= {min}, got {n}")))
        }
    }

    fn finite(path: &str, xs: &[f64]) -> Result<()> {
        if xs.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::config(path, "must be finite"))
        }
    }

    fn nonzero(path: &str, xs: &[f64; 3]) -> Result<()> {
        Self::finite(path, xs)?;
        if xs.iter().any(|&x| x != 0.0) {
            Ok(())
        } else {
            Err(Error::config(path, "must be a non-zero vector"))
        }
    }

    fn window(path: &str, start: f64, end: f64, width: f64) -> Result<()> {
        Self::non_negative(&format!("{path}.start_s"), start)?;
        Self::positive(&format!("{path}.bin_width_s"), width)?;
        if !(end.is_finite() && end >= start + width) {
            return Err(Error::config(
                format!("{path}.end_s"),
                format!("must be at least one bin after start_s, got {end}"),
            ));
        }
        Ok(())
    }
}

fn section<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(path, other.to_string()),
    })
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<document>".into());
            Error::config(path, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Hex SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        type C = Checker;
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed", "must be < 2^63"));
        }
        let t = &self.transition;
        C::positive("transition.wavelength_m", t.wavelength_m)?;
        C::positive("transition.half_linewidth_hz", t.half_linewidth_hz)?;
        C::fraction("transition.zeeman_factor", t.zeeman_factor)?;
        let c = &self.cavity;
        C::positive("cavity.length_m", c.length_m)?;
        C::positive("cavity.waist_m", c.waist_m)?;
        if !(c.finesse.is_finite() && c.finesse >= 1.0) {
            return Err(Error::config(
                "cavity.finesse",
                format!("must be >= 1, got {}", c.finesse),
            ));
        }
        C::non_negative("cavity.coupling_hz", c.coupling_hz)?;
        if let Some(k) = c.kappa_hz {
            C::positive("cavity.kappa_hz", k)?;
        }
        let g = &self.geometry;
        C::finite("geometry.origin_m", &g.origin_m)?;
        C::nonzero("geometry.axis", &g.axis)?;
        C::positive("geometry.gravity", g.gravity)?;
        let cl = &self.cloud;
        C::non_negative("cloud.atom_count", cl.atom_count)?;
        C::positive("cloud.height_m", cl.height_m)?;
        C::finite("cloud.offset_m", &cl.offset_m)?;
        C::non_negative("cloud.rms_radius_m", cl.rms_radius_m)?;
        C::non_negative("cloud.temperature_k", cl.temperature_k)?;
        C::positive("cloud.mass_amu", cl.mass_amu)?;
        C::at_least("cloud.sample_budget", cl.sample_budget, 1)?;
        let ca = &self.calibration;
        C::positive("calibration.target_peak_neff", ca.target_peak_neff)?;
        C::at_least("calibration.sample_budget", ca.sample_budget, 1)?;
        let p = &self.probe;
        C::positive("probe.i_max", p.i_max)?;
        C::non_negative("probe.i_min", p.i_min)?;
        if p.i_min >= p.i_max {
            return Err(Error::config("probe.i_min", "must be below probe.i_max"));
        }
        let ch = &self.chain;
        C::fraction("chain.transmission", ch.transmission)?;
        C::fraction("chain.efficiency", ch.efficiency)?;
        C::non_negative("chain.dead_time_s", ch.dead_time_s)?;
        let tof = &self.tof;
        C::at_least("tof.drops", tof.drops, 1)?;
        C::window("tof", tof.start_s, tof.end_s, tof.bin_width_s)?;
        C::at_least("tof.substeps", tof.substeps, 1)?;
        let s = &self.scan;
        C::at_least("scan.drops", s.drops, 2)?;
        C::non_negative("scan.mean_neff", s.mean_neff)?;
        C::finite("scan.delta_min", &[s.delta_min, s.delta_max])?;
        if !(s.delta_min < 0.0 && s.delta_max > 0.0) {
            return Err(Error::config(
                "scan.delta_min",
                "scan must cover both signs of the detuning",
            ));
        }
        C::at_least("scan.points", s.points, crate::fitting::MIN_POINTS)?;
        C::non_negative("scan.laser_fwhm_hz", s.laser_fwhm_hz)?;
        C::positive("scan.integration_s", s.integration_s)?;
        if let IntensityModel::ModeSampled { transverse_cutoff } = s.fluctuations.intensity {
            C::positive(
                "scan.fluctuations.intensity.transverse_cutoff",
                transverse_cutoff,
            )?;
        }
        let n = &self.noise;
        C::at_least("noise.drops", n.drops, 2)?;
        C::window("noise", n.start_s, n.end_s, n.bin_width_s)?;
        C::at_least("noise.substeps", n.substeps, 1)?;
        C::at_least("noise.trace_clouds", n.trace_clouds, 1)?;
        C::non_negative("noise.jitter_rms_m", n.jitter_rms_m)?;
        C::finite("noise.jitter_offset_m", &[n.jitter_offset_m])?;
        let pu = &self.pulse;
        C::at_least("pulse.drops", pu.drops, 1)?;
        C::positive("pulse.bin_width_s", pu.bin_width_s)?;
        C::at_least("pulse.bins_after", pu.bins_after, 1)?;
        if let Some(t) = pu.turn_on_s {
            C::positive("pulse.turn_on_s", t)?;
            if t < pu.bins_before as f64 * pu.bin_width_s {
                return Err(Error::config(
                    "pulse.turn_on_s",
                    "window would start before release",
                ));
            }
        }
        C::positive("pulse.scatter_rate", pu.scatter_rate)?;
        if !(pu.pump_photon_budget.is_finite() && pu.pump_photon_budget >= 1.0) {
            return Err(Error::config("pulse.pump_photon_budget", "must be >= 1"));
        }
        C::nonzero("pulse.beam_direction", &pu.beam_direction)?;
        C::finite("pulse.cavity_detuning_hz", &[pu.cavity_detuning_hz])?;
        C::fraction("pulse.escape_efficiency", pu.escape_efficiency)?;
        let f = &self.fit;
        C::at_least("fit.max_iterations", f.max_iterations, 1)?;
        C::positive("fit.step_tolerance", f.step_tolerance)?;

        // Cross-field checks by the modules themselves.
        section(
            "transition",
            self.transition_spec().and_then(|t| t.validate()),
        )?;
        section("cavity", self.cavity_spec().and_then(|c| c.validate()))?;
        section("geometry", self.mode_geometry().map(|_| ()))?;
        section("cloud", self.cloud_spec().validate())?;
        section("chain", self.chain_spec().validate())?;
        section("scan", self.lineshape().and_then(|l| l.validate()))?;
        Ok(())
    }

    pub fn transition_spec(&self) -> Result<TransitionSpec> {
        let t = &self.transition;
        TransitionSpec::new(
            t.wavelength_m,
            two_pi_times(t.half_linewidth_hz),
            t.zeeman_factor,
        )
    }

    /// Cavity on resonance with the transition.
    pub fn cavity_spec(&self) -> Result<CavitySpec> {
        let c = &self.cavity;
        Ok(CavitySpec {
            length: c.length_m,
            finesse: c.finesse,
            waist: c.waist_m,
            omega: self.transition_spec()?.omega(),
        })
    }

    pub fn kappa(&self) -> Result<f64> {
        match self.cavity.kappa_hz {
            Some(k) => Ok(two_pi_times(k)),
            None => kappa_from_geometry(&self.cavity_spec()?),
        }
    }

    pub fn coupling_rates(&self) -> Result<CouplingRates> {
        CouplingRates::new(
            two_pi_times(self.cavity.coupling_hz),
            self.kappa()?,
            two_pi_times(self.transition.half_linewidth_hz),
        )
    }

    pub fn mode_geometry(&self) -> Result<ModeGeometry> {
        let g = &self.geometry;
        ModeGeometry::new(
            Vector3::from(g.origin_m),
            Vector3::from(g.axis),
            self.cavity.waist_m,
            self.transition.wavelength_m,
            self.cavity.length_m,
        )
    }

    pub fn apparatus(&self) -> Result<Apparatus> {
        Ok(Apparatus {
            geometry: self.mode_geometry()?,
            rates: self.coupling_rates()?,
            zeeman_factor: self.transition.zeeman_factor,
            gravity: self.geometry.gravity,
        })
    }

    pub fn cloud_spec(&self) -> CloudSpec {
        let c = &self.cloud;
        CloudSpec {
            atom_count: c.atom_count,
            height: c.height_m,
            offset: c.offset_m,
            rms_radius: c.rms_radius_m,
            temperature: c.temperature_k,
            mass: c.mass_amu * ATOMIC_MASS_UNIT,
        }
    }

    pub fn chain_spec(&self) -> DetectionChainSpec {
        DetectionChainSpec {
            transmission: self.chain.transmission,
            efficiency: self.chain.efficiency,
            dead_time: self.chain.dead_time_s,
        }
    }

    pub fn visibility(&self) -> Result<f64> {
        visibility(self.probe.i_min, self.probe.i_max)
    }

    pub fn lineshape(&self) -> Result<LineshapeSpec> {
        Ok(LineshapeSpec {
            visibility: self.visibility()?,
            cooperativity: self.coupling_rates()?.cooperativity(),
            zeeman_factor: self.transition.zeeman_factor,
            gamma: two_pi_times(self.transition.half_linewidth_hz),
            laser_fwhm: two_pi_times(self.scan.laser_fwhm_hz),
            fluctuations: self.scan.fluctuations,
        })
    }

    pub fn scan_deltas(&self) -> Vec<f64> {
        let s = &self.scan;
        let step = (s.delta_max - s.delta_min) / (s.points - 1) as f64;
        (0..s.points)
            .map(|i| s.delta_min + i as f64 * step)
            .collect()
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            float_visibility: self.fit.float_visibility,
            float_linewidth: self.fit.float_linewidth,
            max_iterations: self.fit.max_iterations,
            step_tolerance: self.fit.step_tolerance,
            initial_neff: None,
        }
    }

    pub fn tof_bins(&self) -> TimeBins {
        let t = &self.tof;
        TimeBins {
            start: t.start_s,
            width: t.bin_width_s,
            count: ((t.end_s - t.start_s) / t.bin_width_s).round() as usize,
        }
    }

    pub fn noise_bins(&self) -> TimeBins {
        let n = &self.noise;
        TimeBins {
            start: n.start_s,
            width: n.bin_width_s,
            count: ((n.end_s - n.start_s) / n.bin_width_s).round() as usize,
        }
    }

    /// Half a free spectral range, `c / 4L`, in Hz: the detuning used for
    /// the "cavity off resonance" pulse scenario.
    pub fn half_fsr_hz(&self) -> f64 {
        SPEED_OF_LIGHT / (4.0 * self.cavity.length_m)
    }

    pub fn beam_direction(&self) -> Vector3<f64> {
        Vector3::from(self.pulse.beam_direction)
    }
}
