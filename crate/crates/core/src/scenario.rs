//! End-to-end runs behind the command-line subcommands. Each run returns its
//! results as plain vectors and renders them as a [`Table`].

use nalgebra::Vector3;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cavity_core::{enhanced_decay_rate, mode_volume, vacuum_rabi, ModeVolumeConvention};
use crate::cloud_mc::{
    apply_excitation, average_bins, binned_trace, calibrate_peak_neff, fall_time, sample_cloud,
    smoothed_peak, transit_trace_excited, Apparatus, Calibration, CloudSpec, ExcitationSpec,
    TimeBins, PEAK_SMOOTHING,
};
use crate::config::ScenarioConfig;
use crate::constants::{per_two_pi, two_pi_times};
use crate::detector_chain::{
    cavity_jitter_noise, dead_time_correct, fano, generate_trials, loss_correct_fano, CountSeries,
    JitterMethod, LengthJitter, PiecewiseRate,
};
use crate::error::{Error, Result};
use crate::fitting::{
    fit_scan, profile_uncertainty, synthesize_scan, FitResult, ProfileInterval, ScanDataset,
    ScanNoise,
};
use crate::output::{format_number, Cell, Table};
use crate::reflection::{
    averaged_lineshape, reflected_fraction_cavity_offset, reflected_fraction_resonant,
};
use crate::rng::{derive_seed, substream, tag};

/// One named quantity of the rate report.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantity {
    pub name: &'static str,
    pub value: f64,
    pub unit: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamsReport {
    pub quantities: Vec<Quantity>,
}

impl ParamsReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.quantities
            .iter()
            .find(|q| q.name == name)
            .map(|q| q.value)
    }

    pub fn table(&self, cfg: &ScenarioConfig) -> Table {
        let mut t = Table::new("params", cfg, &["quantity", "value", "unit"]);
        for q in &self.quantities {
            t.push_row(vec![q.name.into(), q.value.into(), q.unit.into()]);
        }
        t
    }

    /// Aligned text rendering for the terminal.
    pub fn render(&self) -> String {
        let width = self
            .quantities
            .iter()
            .map(|q| q.name.len())
            .max()
            .unwrap_or(0);
        self.quantities
            .iter()
            .map(|q| {
                format!(
                    "{:width$}  {:>14}  {}\n",
                    q.name,
                    format_number(q.value),
                    q.unit
                )
            })
            .collect()
    }
}

pub fn run_params(cfg: &ScenarioConfig) -> Result<ParamsReport> {
    let rates = cfg.coupling_rates()?;
    let cavity = cfg.cavity_spec()?;
    let transition = cfg.transition_spec()?;
    let decay = enhanced_decay_rate(rates.gamma(), rates.cooperativity())?;
    let traveling = mode_volume(&cavity, ModeVolumeConvention::TravelingGaussian)?.volume;
    let standing = mode_volume(&cavity, ModeVolumeConvention::StandingGaussian)?.volume;
    let mu = transition.dipole_moment();
    let q = |name, value, unit| Quantity { name, value, unit };
    Ok(ParamsReport {
        quantities: vec![
            q("g_over_2pi", per_two_pi(rates.g()), "Hz"),
            q("kappa_over_2pi", per_two_pi(rates.kappa()), "Hz"),
            q("gamma_over_2pi", per_two_pi(rates.gamma()), "Hz"),
            q("cooperativity", rates.cooperativity(), "1"),
            q(
                "effective_cooperativity",
                transition.zeeman_factor * rates.cooperativity(),
                "1",
            ),
            q("enhanced_decay_over_2pi", per_two_pi(decay.total), "Hz"),
            q("mode_emission_over_2pi", per_two_pi(decay.into_mode), "Hz"),
            q(
                "purcell_rate_over_2pi",
                per_two_pi(rates.purcell_rate()),
                "Hz",
            ),
            q("mode_branching", decay.mode_branching(), "1"),
            q("mode_volume_traveling", traveling, "m^3"),
            q("mode_volume_standing", standing, "m^3"),
            q("dipole_moment", mu, "C m"),
            q(
                "g_dipole_traveling_over_2pi",
                per_two_pi(vacuum_rabi(mu, cavity.omega, traveling)?),
                "Hz",
            ),
            q(
                "g_dipole_standing_over_2pi",
                per_two_pi(vacuum_rabi(mu, cavity.omega, standing)?),
                "Hz",
            ),
            q("free_spectral_range", 2.0 * cfg.half_fsr_hz(), "Hz"),
            q("visibility", cfg.visibility()?, "1"),
        ],
    })
}

/// Calibrated cloud for a run: the configured cloud rescaled so the peak
/// bin-averaged `N_eff` of an independent calibration cloud hits the target.
pub fn calibrated_cloud(cfg: &ScenarioConfig) -> Result<(CloudSpec, Option<Calibration>)> {
    let spec = cfg.cloud_spec();
    if !cfg.calibration.enabled || spec.atom_count == 0.0 {
        return Ok((spec, None));
    }
    let cal = calibrate(cfg)?;
    Ok((cal.calibrated.clone(), Some(cal)))
}

pub fn calibrate(cfg: &ScenarioConfig) -> Result<Calibration> {
    calibrate_peak_neff(
        &cfg.cloud_spec(),
        &cfg.apparatus()?,
        &cfg.tof_bins(),
        cfg.tof.substeps,
        derive_seed(cfg.seed, tag::CALIBRATION, 0),
        cfg.calibration.sample_budget,
        cfg.calibration.target_peak_neff,
    )
}

pub fn calibration_table(cfg: &ScenarioConfig, cal: &Calibration) -> Table {
    let mut t = Table::new("calibration", cfg, &["quantity", "value", "unit"]);
    for (name, value, unit) in [
        ("target_peak_neff", cfg.calibration.target_peak_neff, "1"),
        ("peak_neff_before", cal.peak_before, "1"),
        ("peak_time", cal.peak_time, "s"),
        ("factor", cal.factor, "1"),
        ("configured_atom_count", cfg.cloud.atom_count, "1"),
        ("calibrated_atom_count", cal.calibrated.atom_count, "1"),
    ] {
        t.push_row(vec![name.into(), value.into(), unit.into()]);
    }
    t
}

fn push_calibration_meta(t: &mut Table, cal: &Option<Calibration>) {
    match cal {
        Some(c) => {
            t.push_meta("calibration_factor", format_number(c.factor));
            t.push_meta(
                "calibrated_atom_count",
                format_number(c.calibrated.atom_count),
            );
        }
        None => t.push_meta("calibration_factor", "none"),
    }
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..rows.first().map_or(0, Vec::len))
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n)
        .collect()
}

/// Incident photon rate at the detector for a reflected fraction `f`: the
/// configured rates are detected rates, so losses are divided back out.
fn incident_rate(cfg: &ScenarioConfig, f: f64) -> f64 {
    cfg.probe.i_max / cfg.chain_spec().net_efficiency() * f
}

#[derive(Clone, Debug)]
pub struct TofRun {
    pub bins: TimeBins,
    pub calibration: Option<Calibration>,
    pub n_eff: Vec<f64>,
    pub c_tot: Vec<f64>,
    pub reflected_fraction: Vec<f64>,
    /// Mean detected counts per bin per drop.
    pub counts: Vec<f64>,
    /// Dead-time-corrected mean detected rate (s^-1).
    pub corrected_rate: Vec<f64>,
}

impl TofRun {
    /// Peak of the drop-averaged `N_eff` on the same smoothed scale used by
    /// the calibration.
    pub fn peak(&self) -> (f64, f64) {
        smoothed_peak(&self.bins.centers(), &self.n_eff, PEAK_SMOOTHING).unwrap_or((f64::NAN, 0.0))
    }

    pub fn table(&self, cfg: &ScenarioConfig) -> Table {
        let mut t = Table::new(
            "tof",
            cfg,
            &[
                "time_s",
                "n_eff",
                "c_tot",
                "reflected_fraction",
                "counts",
                "corrected_rate",
            ],
        );
        t.push_meta("drops", cfg.tof.drops);
        push_calibration_meta(&mut t, &self.calibration);
        for (k, time) in self.bins.centers().into_iter().enumerate() {
            t.push_row(vec![
                time.into(),
                self.n_eff[k].into(),
                self.c_tot[k].into(),
                self.reflected_fraction[k].into(),
                self.counts[k].into(),
                self.corrected_rate[k].into(),
            ]);
        }
        t
    }
}

/// Bin-averaged coupling traces of independently sampled clouds.
fn cloud_traces(
    spec: &CloudSpec,
    app: &Apparatus,
    bins: &TimeBins,
    substeps: usize,
    budget: usize,
    seed: u64,
    tag: u64,
    count: usize,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    (0..count)
        .into_par_iter()
        .map(|d| {
            let samples = sample_cloud(spec, app, derive_seed(seed, tag, d as u64), budget)?;
            let tr = binned_trace(&samples, app, bins, substeps)?;
            Ok((tr.n_eff, tr.c_tot))
        })
        .collect()
}

pub fn run_tof(cfg: &ScenarioConfig) -> Result<TofRun> {
    let app = cfg.apparatus()?;
    let bins = cfg.tof_bins();
    let (spec, calibration) = calibrated_cloud(cfg)?;
    let v = cfg.visibility()?;
    let traces = cloud_traces(
        &spec,
        &app,
        &bins,
        cfg.tof.substeps,
        cfg.cloud.sample_budget,
        cfg.seed,
        tag::CLOUD,
        cfg.tof.drops,
    )?;
    let fractions: Vec<Vec<f64>> = traces
        .iter()
        .map(|(_, c)| {
            c.iter()
                .map(|&c| reflected_fraction_resonant(v, c))
                .collect()
        })
        .collect();
    let rates: Vec<PiecewiseRate> = fractions
        .iter()
        .map(|f| PiecewiseRate {
            bins,
            rates: f.iter().map(|&f| incident_rate(cfg, f)).collect(),
        })
        .collect();
    let chain = cfg.chain_spec();
    let series = generate_trials(|d| &rates[d], &chain, &bins, cfg.tof.drops, cfg.seed)?;
    let corrected = dead_time_correct(&series, chain.dead_time)?;
    let n_eff: Vec<Vec<f64>> = traces.iter().map(|(n, _)| n.clone()).collect();
    let c_tot: Vec<Vec<f64>> = traces.into_iter().map(|(_, c)| c).collect();
    Ok(TofRun {
        bins,
        calibration,
        n_eff: mean_rows(&n_eff),
        c_tot: mean_rows(&c_tot),
        reflected_fraction: mean_rows(&fractions),
        counts: series.bin_means(),
        corrected_rate: corrected
            .bin_means()
            .iter()
            .map(|c| c / bins.width)
            .collect(),
    })
}

#[derive(Clone, Debug)]
pub struct ScanRun {
    pub deltas: Vec<f64>,
    pub model: Vec<f64>,
    pub data: ScanDataset,
    pub fit: Option<FitResult>,
    pub profile: Option<ProfileInterval>,
}

impl ScanRun {
    pub fn table(&self, cfg: &ScenarioConfig) -> Table {
        let mut t = Table::new(
            "scan",
            cfg,
            &["delta", "model_fraction", "measured_fraction", "sigma"],
        );
        t.push_meta("drops", cfg.scan.drops);
        t.push_meta("mean_neff", format_number(cfg.scan.mean_neff));
        if let Some(fit) = &self.fit {
            push_fit_meta(&mut t, fit, self.profile.as_ref());
        }
        for i in 0..self.deltas.len() {
            t.push_row(vec![
                self.deltas[i].into(),
                self.model[i].into(),
                self.data.fractions[i].into(),
                self.data.sigmas[i].into(),
            ]);
        }
        t
    }
}

fn push_fit_meta(t: &mut Table, fit: &FitResult, profile: Option<&ProfileInterval>) {
    t.push_meta("fit_mean_neff", format_number(fit.mean_neff.value));
    t.push_meta("fit_std_error", format_number(fit.mean_neff.std_error));
    if let Some(v) = fit.visibility {
        t.push_meta("fit_visibility", format_number(v.value));
    }
    if let Some(w) = fit.laser_fwhm {
        t.push_meta("fit_laser_fwhm_hz", format_number(per_two_pi(w.value)));
    }
    t.push_meta("fit_chi2", format_number(fit.chi2));
    t.push_meta("fit_dof", fit.dof);
    if let Some(p) = profile {
        t.push_meta("profile_lower", format_number(p.lower));
        t.push_meta("profile_upper", format_number(p.upper));
    }
}

pub fn run_scan(cfg: &ScenarioConfig) -> Result<ScanRun> {
    let spec = cfg.lineshape()?;
    let geom = cfg.mode_geometry()?;
    let deltas = cfg.scan_deltas();
    let model = averaged_lineshape(&spec, &geom, cfg.scan.mean_neff, &deltas)?;
    let noise = ScanNoise {
        i_max: cfg.probe.i_max,
        integration: cfg.scan.integration_s,
        drops: cfg.scan.drops,
    };
    let data = synthesize_scan(
        &spec,
        &geom,
        cfg.scan.mean_neff,
        &deltas,
        &noise,
        cfg.seed,
        0,
    )?;
    let (fit, profile) = if cfg.scan.auto_fit {
        let fc = cfg.fit_config();
        let fit = fit_scan(&data, &geom, &fc)?;
        let profile = profile_uncertainty(&fit, &data, &geom, &fc)?;
        (Some(fit), Some(profile))
    } else {
        (None, None)
    };
    Ok(ScanRun {
        deltas,
        model,
        data,
        fit,
        profile,
    })
}

/// Reads a `scan` table and attaches the configured model parameters.
pub fn scan_dataset_from_table(cfg: &ScenarioConfig, table: &Table) -> Result<ScanDataset> {
    let col = |name: &str| -> Result<Vec<f64>> {
        table
            .numbers(name)
            .ok_or_else(|| Error::domain(format!("scan table has no `{name}` column")))?
            .into_iter()
            .map(|x| x.ok_or_else(|| Error::domain(format!("missing value in column `{name}`"))))
            .collect()
    };
    let data = ScanDataset {
        deltas: col("delta")?,
        fractions: col("measured_fraction")?,
        sigmas: col("sigma")?,
        model: cfg.lineshape()?,
    };
    data.validate()?;
    Ok(data)
}

#[derive(Clone, Debug)]
pub struct FitRun {
    pub fit: FitResult,
    pub profile: ProfileInterval,
}

impl FitRun {
    /// Structured-text (TOML) rendering of the result.
    pub fn render(&self, cfg: &ScenarioConfig) -> String {
        #[derive(serde::Serialize)]
        struct Doc<'a> {
            schema: &'a str,
            config_sha256: String,
            seed: u64,
            version: &'a str,
            mean_neff: f64,
            std_error: f64,
            profile_lower: f64,
            profile_upper: f64,
            lower_clipped: bool,
            upper_open: bool,
            visibility: Option<f64>,
            visibility_std_error: Option<f64>,
            laser_fwhm_hz: Option<f64>,
            laser_fwhm_std_error_hz: Option<f64>,
            chi2: f64,
            dof: usize,
            iterations: usize,
        }
        let f = &self.fit;
        let doc = Doc {
            schema: "fit v1",
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            version: crate::output::VERSION,
            mean_neff: f.mean_neff.value,
            std_error: f.mean_neff.std_error,
            profile_lower: self.profile.lower,
            profile_upper: if self.profile.upper_open {
                f64::MAX
            } else {
                self.profile.upper
            },
            lower_clipped: self.profile.lower_clipped,
            upper_open: self.profile.upper_open,
            visibility: f.visibility.map(|e| e.value),
            visibility_std_error: f.visibility.map(|e| e.std_error),
            laser_fwhm_hz: f.laser_fwhm.map(|e| per_two_pi(e.value)),
            laser_fwhm_std_error_hz: f.laser_fwhm.map(|e| per_two_pi(e.std_error)),
            chi2: f.chi2,
            dof: f.dof,
            iterations: f.iterations,
        };
        toml::to_string(&doc).expect("fit document serializes")
    }
}

pub fn run_fit(cfg: &ScenarioConfig, data: &ScanDataset) -> Result<FitRun> {
    let geom = cfg.mode_geometry()?;
    let fc = cfg.fit_config();
    let fit = fit_scan(data, &geom, &fc)?;
    let profile = profile_uncertainty(&fit, data, &geom, &fc)?;
    Ok(FitRun { fit, profile })
}

#[derive(Clone, Debug)]
pub struct NoiseRun {
    pub bins: TimeBins,
    pub calibration: Option<Calibration>,
    pub c_tot: Vec<f64>,
    pub mean_counts: Vec<f64>,
    pub fano_raw: Vec<Option<f64>>,
    pub fano_dead_time: Vec<Option<f64>>,
    pub fano_corrected: Vec<Option<f64>>,
    /// Linearized jitter prediction for `fano_corrected - 1`.
    pub jitter_excess: Vec<f64>,
    pub series: CountSeries,
}

impl NoiseRun {
    pub fn table(&self, cfg: &ScenarioConfig) -> Table {
        let mut t = Table::new(
            "noise",
            cfg,
            &[
                "time_s",
                "c_tot",
                "mean_counts",
                "fano_raw",
                "fano_dead_time",
                "fano_corrected",
                "jitter_excess",
            ],
        );
        t.push_meta("drops", cfg.noise.drops);
        t.push_meta(
            "net_efficiency",
            format_number(cfg.chain_spec().net_efficiency()),
        );
        push_calibration_meta(&mut t, &self.calibration);
        for (k, time) in self.bins.centers().into_iter().enumerate() {
            t.push_row(vec![
                time.into(),
                self.c_tot[k].into(),
                self.mean_counts[k].into(),
                Cell::from(self.fano_raw[k]),
                Cell::from(self.fano_dead_time[k]),
                Cell::from(self.fano_corrected[k]),
                self.jitter_excess[k].into(),
            ]);
        }
        t
    }
}

const JITTER_SAMPLES: usize = 20_000;

pub fn run_noise(cfg: &ScenarioConfig) -> Result<NoiseRun> {
    let app = cfg.apparatus()?;
    let bins = cfg.noise_bins();
    let (spec, calibration) = calibrated_cloud(cfg)?;
    let v = cfg.visibility()?;
    let n = &cfg.noise;
    let traces = cloud_traces(
        &spec,
        &app,
        &bins,
        n.substeps,
        cfg.cloud.sample_budget,
        cfg.seed,
        tag::NOISE,
        n.trace_clouds,
    )?;
    let c_tot = mean_rows(&traces.into_iter().map(|(_, c)| c).collect::<Vec<_>>());

    let cavity = cfg.cavity_spec()?;
    let per_length = LengthJitter::detuning_per_length(&cavity)?;
    let rates: Vec<PiecewiseRate> = (0..n.drops)
        .map(|d| {
            let z: f64 = StandardNormal.sample(&mut substream(cfg.seed, tag::JITTER, d as u64));
            let delta = per_length * (n.jitter_offset_m + n.jitter_rms_m * z);
            PiecewiseRate {
                bins,
                rates: c_tot
                    .iter()
                    .map(|&c| incident_rate(cfg, reflected_fraction_cavity_offset(v, c, delta)))
                    .collect(),
            }
        })
        .collect();
    let chain = cfg.chain_spec();
    let eta = chain.net_efficiency();
    let series = generate_trials(
        |d| &rates[d],
        &chain,
        &bins,
        n.drops,
        derive_seed(cfg.seed, tag::NOISE, u64::MAX),
    )?;
    let corrected = dead_time_correct(&series, chain.dead_time)?;
    let fano_raw = fano(&series)?;
    let fano_dead_time = fano(&corrected)?;
    let fano_corrected = fano_dead_time
        .iter()
        .map(|f| f.map(|f| loss_correct_fano(f, eta)).transpose())
        .collect::<Result<Vec<_>>>()?;
    let jitter = LengthJitter {
        rms: n.jitter_rms_m,
        offset: n.jitter_offset_m,
    };
    let incident_per_bin = incident_rate(cfg, 1.0) * bins.width;
    // Offsets of a few hundred pm reach a sizeable fraction of kappa, where
    // the second-order expansion overestimates the variance.
    let method = JitterMethod::MonteCarlo {
        samples: JITTER_SAMPLES,
        seed: derive_seed(cfg.seed, tag::JITTER, u64::MAX),
    };
    let jitter_excess = c_tot
        .iter()
        .map(|&c| cavity_jitter_noise(v, c, &jitter, &cavity, incident_per_bin, method))
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseRun {
        bins,
        calibration,
        c_tot,
        mean_counts: series.bin_means(),
        fano_raw,
        fano_dead_time,
        fano_corrected,
        jitter_excess,
        series,
    })
}

#[derive(Clone, Debug)]
pub struct PulseRun {
    pub bins: TimeBins,
    pub turn_on: f64,
    pub turn_on_bin: usize,
    /// First bin with detected emission, if any.
    pub onset_bin: Option<usize>,
    pub calibration: Option<Calibration>,
    /// Mean expected detected emission per bin per drop.
    pub expected_emission: Vec<f64>,
    /// Detected emission summed over drops.
    pub emission_counts: Vec<f64>,
    /// Detected probe reflection summed over drops.
    pub reflection_counts: Vec<f64>,
    pub c_tot: Vec<f64>,
}

impl PulseRun {
    pub fn table(&self, cfg: &ScenarioConfig) -> Table {
        let mut t = Table::new(
            "pulse",
            cfg,
            &[
                "time_s",
                "expected_emission",
                "emission_counts",
                "reflection_counts",
                "c_tot",
            ],
        );
        t.push_meta("drops", cfg.pulse.drops);
        t.push_meta("turn_on_s", format_number(self.turn_on));
        t.push_meta("turn_on_bin", self.turn_on_bin);
        t.push_meta(
            "onset_bin",
            self.onset_bin.map_or("none".to_string(), |k| k.to_string()),
        );
        t.push_meta(
            "cavity_detuning_hz",
            format_number(cfg.pulse.cavity_detuning_hz),
        );
        push_calibration_meta(&mut t, &self.calibration);
        for k in 0..self.bins.count {
            t.push_row(vec![
                self.bins.edge(k).into(),
                self.expected_emission[k].into(),
                self.emission_counts[k].into(),
                self.reflection_counts[k].into(),
                self.c_tot[k].into(),
            ]);
        }
        t
    }
}

pub fn run_pulse(cfg: &ScenarioConfig) -> Result<PulseRun> {
    let p = &cfg.pulse;
    let base = cfg.apparatus()?;
    let detuning = two_pi_times(p.cavity_detuning_hz);
    let app = Apparatus {
        rates: base.rates.detuned(detuning),
        ..base
    };
    let (spec, calibration) = calibrated_cloud(cfg)?;
    let turn_on = p
        .turn_on_s
        .unwrap_or_else(|| fall_time(spec.height, app.gravity));
    let bins = TimeBins {
        start: turn_on - p.bins_before as f64 * p.bin_width_s,
        width: p.bin_width_s,
        count: p.bins_before + p.bins_after,
    };
    if bins.start < 0.0 {
        return Err(Error::domain("pulse window starts before the release"));
    }
    let exc = ExcitationSpec {
        turn_on,
        pump_photon_budget: p.pump_photon_budget,
        scatter_rate: p.scatter_rate,
        recoil_velocity: spec.recoil_velocity(cfg.transition.wavelength_m),
        beam_direction: Vector3::from(p.beam_direction),
    };
    let v = cfg.visibility()?;
    let offset = detuning / app.rates.kappa();
    let substeps = cfg.tof.substeps;
    let fine = bins.fine_grid(substeps);
    let per_drop: Vec<(Vec<f64>, Vec<f64>)> = (0..p.drops)
        .into_par_iter()
        .map(|d| {
            let samples = sample_cloud(
                &spec,
                &app,
                derive_seed(cfg.seed, tag::PULSE, d as u64),
                cfg.cloud.sample_budget,
            )?;
            let out = apply_excitation(
                &samples,
                &app,
                &exc,
                derive_seed(cfg.seed, tag::EXCITATION, d as u64),
            )?;
            let mut emission = vec![0.0; bins.count];
            for e in &out.events {
                if let Some(k) = bins.index_of(e.time) {
                    emission[k] += e.weight * p.escape_efficiency;
                }
            }
            let trace = transit_trace_excited(&samples, &out, &app, &fine)?;
            Ok((emission, average_bins(&trace, &bins, substeps).c_tot))
        })
        .collect::<Result<_>>()?;

    let chain = cfg.chain_spec();
    let emission_rates: Vec<PiecewiseRate> = per_drop
        .iter()
        .map(|(e, _)| PiecewiseRate {
            bins,
            rates: e.iter().map(|x| x / bins.width).collect(),
        })
        .collect();
    let reflection_rates: Vec<PiecewiseRate> = per_drop
        .iter()
        .map(|(_, c)| PiecewiseRate {
            bins,
            rates: c
                .iter()
                .map(|&c| incident_rate(cfg, reflected_fraction_cavity_offset(v, c, offset)))
                .collect(),
        })
        .collect();
    let emission = generate_trials(
        |d| &emission_rates[d],
        &chain,
        &bins,
        p.drops,
        derive_seed(cfg.seed, tag::PULSE, u64::MAX),
    )?;
    let reflection = generate_trials(
        |d| &reflection_rates[d],
        &chain,
        &bins,
        p.drops,
        derive_seed(cfg.seed, tag::PULSE, u64::MAX - 1),
    )?;
    let emission_counts = emission.bin_totals();
    let eta = chain.net_efficiency();
    let expected: Vec<Vec<f64>> = per_drop
        .iter()
        .map(|(e, _)| e.iter().map(|x| x * eta).collect())
        .collect();
    Ok(PulseRun {
        bins,
        turn_on,
        turn_on_bin: p.bins_before,
        onset_bin: emission_counts.iter().position(|&c| c > 0.0),
        calibration,
        expected_emission: mean_rows(&expected),
        emission_counts,
        reflection_counts: reflection.bin_totals(),
        c_tot: mean_rows(&per_drop.into_iter().map(|(_, c)| c).collect::<Vec<_>>()),
    })
}
