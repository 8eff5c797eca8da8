//! Weighted least-squares estimation of the mean effective atom number from
//! a detuning scan, with optional visibility and laser-linewidth nuisances.
//!
//! The optimizer is Levenberg-Marquardt with Marquardt diagonal scaling and
//! box projection (`<N_eff> >= 0`, `0 < v <= 1`, linewidth `>= 0`). It stops
//! once the relative parameter step drops below the tolerance or fails with
//! [`Error::NonConvergence`] after the iteration cap.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};
use crate::mode_field::ModeGeometry;
use crate::reflection::{
    invert_to_cooperativity, reflected_fraction_detuned, sample_drop, AveragedLineshape,
    CountRateTriple, LineshapeSpec,
};
use crate::rng::{substream, tag};

pub const MIN_POINTS: usize = 5;
const MIN_INITIAL_NEFF: f64 = 0.05;

/// Detuning scan with per-point uncertainties and the fixed model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanDataset {
    /// Laser-atom detuning in units of gamma.
    pub deltas: Vec<f64>,
    pub fractions: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub model: LineshapeSpec,
}

impl ScanDataset {
    pub fn validate(&self) -> Result<()> {
        let n = self.deltas.len();
        if self.fractions.len() != n || self.sigmas.len() != n {
            return Err(Error::domain("scan columns have different lengths"));
        }
        if n < MIN_POINTS {
            return Err(Error::domain(format!(
                "scan needs at least {MIN_POINTS} points, got {n}"
            )));
        }
        if !(self.deltas.iter().any(|&d| d < 0.0) && self.deltas.iter().any(|&d| d > 0.0)) {
            return Err(Error::domain("scan must cover both signs of the detuning"));
        }
        for (&y, &s) in self.fractions.iter().zip(&self.sigmas) {
            if !y.is_finite() {
                return Err(Error::domain("scan contains a non-finite fraction"));
            }
            ensure_positive("point uncertainty", s)?;
        }
        self.model.validate()
    }

    fn index_nearest_resonance(&self) -> usize {
        self.deltas
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .expect("validated scan is non-empty")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub float_visibility: bool,
    pub float_linewidth: bool,
    pub max_iterations: usize,
    /// Relative parameter step below which the fit is converged.
    pub step_tolerance: f64,
    /// Overrides the closed-form warm start.
    pub initial_neff: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            float_visibility: false,
            float_linewidth: false,
            max_iterations: 200,
            step_tolerance: 1e-6,
            initial_neff: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub params: Vec<f64>,
    pub chi2: f64,
    pub damping: f64,
    pub accepted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub mean_neff: Estimate,
    pub visibility: Option<Estimate>,
    /// Laser FWHM in rad/s.
    pub laser_fwhm: Option<Estimate>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    /// Accepted and rejected steps in order.
    pub trace: Vec<IterationRecord>,
}

impl FitResult {
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }
}

const NEFF: usize = 0;
const VIS: usize = 1;
const FWHM: usize = 2;
const NAMES: [&str; 3] = ["mean_neff", "visibility", "laser_fwhm"];

/// Model curve on the scan grid, rebuilding the lineshape cache only when a
/// shape parameter changes.
struct ScanModel<'a> {
    base: &'a LineshapeSpec,
    geom: &'a ModeGeometry,
    deltas: &'a [f64],
    cached: Option<(f64, f64, AveragedLineshape)>,
}

impl<'a> ScanModel<'a> {
    fn new(data: &'a ScanDataset, geom: &'a ModeGeometry) -> Self {
        Self {
            base: &data.model,
            geom,
            deltas: &data.deltas,
            cached: None,
        }
    }

    fn eval(&mut self, p: &[f64; 3]) -> Result<Vec<f64>> {
        let stale = !matches!(&self.cached, Some((v, w, _)) if *v == p[VIS] && *w == p[FWHM]);
        if stale {
            let spec = LineshapeSpec {
                visibility: p[VIS],
                laser_fwhm: p[FWHM],
                ..self.base.clone()
            };
            self.cached = Some((
                p[VIS],
                p[FWHM],
                AveragedLineshape::new(spec, self.geom, self.deltas)?,
            ));
        }
        self.cached
            .as_mut()
            .expect("cache filled")
            .2
            .evaluate(p[NEFF])
    }
}

fn project(p: &mut [f64; 3]) {
    p[NEFF] = p[NEFF].max(0.0);
    p[VIS] = p[VIS].clamp(1e-9, 1.0);
    p[FWHM] = p[FWHM].max(0.0);
}

fn chi2(data: &ScanDataset, model: &[f64]) -> f64 {
    model
        .iter()
        .zip(&data.fractions)
        .zip(&data.sigmas)
        .map(|((m, y), s)| ((y - m) / s).powi(2))
        .sum()
}

/// Forward or central difference step for parameter `k`, respecting bounds.
fn jacobian(
    model: &mut ScanModel,
    data: &ScanDataset,
    p: &[f64; 3],
    free: &[usize],
    base: &[f64],
) -> Result<DMatrix<f64>> {
    let n = data.deltas.len();
    let mut j = DMatrix::zeros(n, free.len());
    for (c, &k) in free.iter().enumerate() {
        let scale = match k {
            NEFF => p[k].max(0.1),
            VIS => p[k].max(0.01),
            _ => p[k].max(0.1 * data.model.gamma),
        };
        let h = 1e-6 * scale;
        let mut up = *p;
        let mut down = *p;
        up[k] += h;
        down[k] -= h;
        let upper_ok = k != VIS || up[k] <= 1.0;
        let lower_ok = down[k] >= 0.0;
        let (fu, fd, span) = match (upper_ok, lower_ok) {
            (true, true) => (model.eval(&up)?, model.eval(&down)?, 2.0 * h),
            (true, false) => (model.eval(&up)?, base.to_vec(), h),
            (false, _) => (base.to_vec(), model.eval(&down)?, h),
        };
        for i in 0..n {
            j[(i, c)] = (fu[i] - fd[i]) / span / data.sigmas[i];
        }
    }
    Ok(j)
}

struct Solution {
    params: [f64; 3],
    chi2: f64,
    iterations: usize,
    trace: Vec<IterationRecord>,
    covariance: DMatrix<f64>,
}

fn check_rank(a: &DMatrix<f64>, free: &[usize]) -> Result<()> {
    let max = (0..a.nrows()).map(|i| a[(i, i)]).fold(0.0, f64::max);
    for (c, &k) in free.iter().enumerate() {
        if !(a[(c, c)] > 1e-24 * max.max(f64::MIN_POSITIVE)) {
            return Err(Error::RankDeficient {
                parameter: NAMES[k].to_string(),
            });
        }
    }
    Ok(())
}

fn levenberg_marquardt(
    data: &ScanDataset,
    geom: &ModeGeometry,
    start: [f64; 3],
    free: &[usize],
    config: &FitConfig,
) -> Result<Solution> {
    let mut model = ScanModel::new(data, geom);
    let mut p = start;
    project(&mut p);
    let mut f = model.eval(&p)?;
    let mut current = chi2(data, &f);
    let mut damping = 1e-3;
    let mut trace = Vec::new();
    for iteration in 1..=config.max_iterations {
        let j = jacobian(&mut model, data, &p, free, &f)?;
        let r = DVector::from_iterator(
            data.deltas.len(),
            f.iter()
                .zip(&data.fractions)
                .zip(&data.sigmas)
                .map(|((m, y), s)| (y - m) / s),
        );
        let a = j.transpose() * &j;
        check_rank(&a, free)?;
        let g = j.transpose() * r;
        loop {
            let mut lhs = a.clone();
            for c in 0..free.len() {
                lhs[(c, c)] += damping * a[(c, c)];
            }
            let step = lhs
                .cholesky()
                .ok_or_else(|| Error::RankDeficient {
                    parameter: NAMES[free[0]].to_string(),
                })?
                .solve(&g);
            let mut trial = p;
            for (c, &k) in free.iter().enumerate() {
                trial[k] += step[c];
            }
            project(&mut trial);
            let moved = free
                .iter()
                .map(|&k| (trial[k] - p[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            let size = free.iter().map(|&k| p[k].powi(2)).sum::<f64>().sqrt();
            let f_trial = model.eval(&trial)?;
            let chi_trial = chi2(data, &f_trial);
            let accepted = chi_trial <= current;
            trace.push(IterationRecord {
                iteration,
                params: free.iter().map(|&k| trial[k]).collect(),
                chi2: chi_trial,
                damping,
                accepted,
            });
            let small = moved <= config.step_tolerance * (size + config.step_tolerance);
            if accepted {
                p = trial;
                f = f_trial;
                current = chi_trial;
                damping = (damping / 10.0).max(1e-12);
            } else {
                damping *= 10.0;
            }
            if small {
                let j = jacobian(&mut model, data, &p, free, &f)?;
                let a = j.transpose() * &j;
                check_rank(&a, free)?;
                let covariance = a.try_inverse().ok_or_else(|| Error::RankDeficient {
                    parameter: NAMES[free[0]].to_string(),
                })?;
                return Ok(Solution {
                    params: p,
                    chi2: current,
                    iterations: iteration,
                    trace,
                    covariance,
                });
            }
            if accepted || damping > 1e16 {
                break;
            }
        }
    }
    Err(Error::NonConvergence { trace })
}

/// Closed-form warm start from the scan point nearest resonance.
pub fn initial_guess(data: &ScanDataset) -> f64 {
    let m = &data.model;
    let y = data.fractions[data.index_nearest_resonance()];
    let counts = CountRateTriple {
        i_max: 1.0,
        i_min: (1.0 - m.visibility).powi(2),
        i_atoms: y.min(1.0),
    };
    invert_to_cooperativity(&counts, m.cooperativity, m.zeeman_factor)
        .map(|inv| inv.n_eff)
        .unwrap_or(0.0)
        .max(MIN_INITIAL_NEFF)
}

fn free_parameters(config: &FitConfig) -> Vec<usize> {
    let mut free = vec![NEFF];
    if config.float_visibility {
        free.push(VIS);
    }
    if config.float_linewidth {
        free.push(FWHM);
    }
    free
}

pub fn fit_scan(data: &ScanDataset, geom: &ModeGeometry, config: &FitConfig) -> Result<FitResult> {
    data.validate()?;
    let start = config.initial_neff.unwrap_or_else(|| initial_guess(data));
    if !(start.is_finite() && start > 0.0) {
        return Err(Error::domain(format!(
            "initial <N_eff> must be > 0, got {start}"
        )));
    }
    let free = free_parameters(config);
    if data.deltas.len() <= free.len() {
        return Err(Error::domain("more free parameters than data points"));
    }
    let sol = levenberg_marquardt(
        data,
        geom,
        [start, data.model.visibility, data.model.laser_fwhm],
        &free,
        config,
    )?;
    let estimate = |k: usize| {
        free.iter().position(|&f| f == k).map(|c| Estimate {
            value: sol.params[k],
            std_error: sol.covariance[(c, c)].sqrt(),
        })
    };
    Ok(FitResult {
        mean_neff: estimate(NEFF).expect("atom number always floats"),
        visibility: estimate(VIS),
        laser_fwhm: estimate(FWHM),
        chi2: sol.chi2,
        dof: data.deltas.len() - free.len(),
        iterations: sol.iterations,
        trace: sol.trace,
    })
}

/// Independent fits of many scans in parallel; order of results matches input.
pub fn fit_many(
    datasets: &[ScanDataset],
    geom: &ModeGeometry,
    config: &FitConfig,
) -> Vec<Result<FitResult>> {
    datasets
        .par_iter()
        .map(|d| fit_scan(d, geom, config))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileInterval {
    pub lower: f64,
    pub upper: f64,
    /// The lower bound hit `<N_eff> = 0` before the chi-square rose by one.
    pub lower_clipped: bool,
    /// No upper crossing was found within the search range.
    pub upper_open: bool,
}

const PROFILE_MAX_NEFF: f64 = 1e3;

/// Chi-square profile in `<N_eff>` with `delta chi^2 = 1` bounds. Floated
/// nuisance parameters are re-optimized at every profile point.
pub fn profile_uncertainty(
    result: &FitResult,
    data: &ScanDataset,
    geom: &ModeGeometry,
    config: &FitConfig,
) -> Result<ProfileInterval> {
    data.validate()?;
    let best = result.mean_neff.value;
    let nuisances: Vec<usize> = free_parameters(config)
        .into_iter()
        .filter(|&k| k != NEFF)
        .collect();
    let start = [
        best,
        result.visibility.map_or(data.model.visibility, |e| e.value),
        result.laser_fwhm.map_or(data.model.laser_fwhm, |e| e.value),
    ];
    let mut model = ScanModel::new(data, geom);
    let mut profile = |neff: f64| -> Result<f64> {
        let mut p = start;
        p[NEFF] = neff;
        if nuisances.is_empty() {
            Ok(chi2(data, &model.eval(&p)?))
        } else {
            Ok(levenberg_marquardt(data, geom, p, &nuisances, config)?.chi2)
        }
    };
    let target = result.chi2 + 1.0;
    let se = result.mean_neff.std_error;
    let step0 = if se.is_finite() && se > 0.0 { se } else { 0.1 };

    let lower_clipped = profile(0.0)? < target;
    let lower = if lower_clipped || best == 0.0 {
        0.0
    } else {
        let (mut inside, mut outside) = (best, (best - step0).max(0.0));
        let mut step = step0;
        while outside > 0.0 && profile(outside)? < target {
            inside = outside;
            step *= 2.0;
            outside = (best - step).max(0.0);
        }
        bisect(&mut profile, target, inside, outside)?
    };
    let (mut inside, mut outside) = (best, best + step0);
    let mut step = step0;
    let mut upper_open = false;
    while profile(outside)? < target {
        inside = outside;
        step *= 2.0;
        outside = best + step;
        if outside > PROFILE_MAX_NEFF {
            upper_open = true;
            break;
        }
    }
    let upper = if upper_open {
        f64::INFINITY
    } else {
        bisect(&mut profile, target, inside, outside)?
    };
    Ok(ProfileInterval {
        lower,
        upper,
        lower_clipped,
        upper_open,
    })
}

fn bisect(
    f: &mut impl FnMut(f64) -> Result<f64>,
    target: f64,
    mut inside: f64,
    mut outside: f64,
) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if f(mid)? < target {
            inside = mid;
        } else {
            outside = mid;
        }
        if (outside - inside).abs() <= 1e-12 * (1.0 + inside.abs()) {
            break;
        }
    }
    Ok(0.5 * (inside + outside))
}

/// Count-rate settings of a synthetic scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanNoise {
    /// Detected count rate at full reflection (s^-1).
    pub i_max: f64,
    /// Integration window per drop (s).
    pub integration: f64,
    pub drops: usize,
}

impl Default for ScanNoise {
    fn default() -> Self {
        Self {
            i_max: 419e3,
            integration: 250e-6,
            drops: 34,
        }
    }
}

/// Synthetic detuning scan: each point averages `drops` independent drops,
/// each with its own atom number, atom positions and laser offset, and
/// Poisson photon counts. Uncertainties are the standard error of the mean.
pub fn synthesize_scan(
    spec: &LineshapeSpec,
    geom: &ModeGeometry,
    mean_neff: f64,
    deltas: &[f64],
    noise: &ScanNoise,
    seed: u64,
    index: u64,
) -> Result<ScanDataset> {
    spec.validate()?;
    ensure_positive("count rate", noise.i_max)?;
    ensure_positive("integration time", noise.integration)?;
    if noise.drops < 2 {
        return Err(Error::domain(
            "synthetic scans need at least 2 drops per point",
        ));
    }
    let mut rng = substream(seed, tag::SCAN, index);
    let scale = noise.i_max * noise.integration;
    let mut fractions = Vec::with_capacity(deltas.len());
    let mut sigmas = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let samples: Vec<f64> = (0..noise.drops)
            .map(|_| {
                let (n_eff, offset) = sample_drop(spec, geom, mean_neff, &mut rng);
                let f = reflected_fraction_detuned(
                    spec.visibility,
                    spec.coupling() * n_eff,
                    delta + offset,
                );
                let k = Poisson::new(scale * f).map_or(0.0, |p| p.sample(&mut rng));
                k / scale
            })
            .collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        fractions.push(mean);
        sigmas.push((var / n).sqrt().max(1.0 / (scale * n)));
    }
    Ok(ScanDataset {
        deltas: deltas.to_vec(),
        fractions,
        sigmas,
        model: spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflection::FluctuationModel;
    use std::f64::consts::PI;

    fn geom() -> ModeGeometry {
        ModeGeometry::horizontal(4.6e-6, 780.241e-9, 133e-6).unwrap()
    }

    fn spec() -> LineshapeSpec {
        LineshapeSpec {
            visibility: 0.194_292_436_547_666_5,
            cooperativity: 0.8,
            zeeman_factor: 3.0 / 7.0,
            gamma: 2.0 * PI * 3e6,
            laser_fwhm: 2.0 * PI * 1e6,
            fluctuations: FluctuationModel::default(),
        }
    }

    fn grid() -> Vec<f64> {
        (-12..=12).map(|i| i as f64 * 0.5).collect()
    }

    fn noiseless(neff: f64, sigma: f64) -> ScanDataset {
        let deltas = grid();
        let fractions =
            crate::reflection::averaged_lineshape(&spec(), &geom(), neff, &deltas).unwrap();
        ScanDataset {
            sigmas: vec![sigma; deltas.len()],
            deltas,
            fractions,
            model: spec(),
        }
    }

    #[test]
    fn validation() {
        let mut d = noiseless(1.0, 1e-3);
        d.sigmas[3] = 0.0;
        assert!(fit_scan(&d, &geom(), &FitConfig::default()).is_err());
        let mut d = noiseless(1.0, 1e-3);
        d.deltas.iter_mut().for_each(|x| *x = x.abs());
        assert!(d.validate().is_err());
        let d = noiseless(1.0, 1e-3);
        let short = ScanDataset {
            deltas: d.deltas[10..14].to_vec(),
            fractions: d.fractions[10..14].to_vec(),
            sigmas: d.sigmas[10..14].to_vec(),
            model: spec(),
        };
        assert!(short.validate().is_err());
    }

    #[test]
    fn round_trip_noiseless() {
        let fit = fit_scan(&noiseless(1.1, 1e-3), &geom(), &FitConfig::default()).unwrap();
        assert!((fit.mean_neff.value - 1.1).abs() < 1e-4, "{fit:?}");
        assert!(fit.chi2 < 1e-8);
    }

    #[test]
    fn zero_atoms_recovered() {
        let data = noiseless(0.0, 1e-3);
        let wing = (1.0 - spec().visibility).powi(2);
        assert!(data.fractions.iter().all(|y| (y - wing).abs() < 1e-14));
        let fit = fit_scan(&data, &geom(), &FitConfig::default()).unwrap();
        assert!(fit.mean_neff.value < 1e-4, "{fit:?}");
    }

    #[test]
    fn uncertainty_scale_invariance() {
        let mut data =
            synthesize_scan(&spec(), &geom(), 0.6, &grid(), &ScanNoise::default(), 3, 0).unwrap();
        let a = fit_scan(&data, &geom(), &FitConfig::default()).unwrap();
        data.sigmas.iter_mut().for_each(|s| *s *= 3.0);
        let b = fit_scan(&data, &geom(), &FitConfig::default()).unwrap();
        assert!((a.mean_neff.value - b.mean_neff.value).abs() < 1e-6);
        assert!((b.mean_neff.std_error / a.mean_neff.std_error - 3.0).abs() < 1e-4);
    }

    #[test]
    fn accepted_steps_never_increase_chi2() {
        let data =
            synthesize_scan(&spec(), &geom(), 1.1, &grid(), &ScanNoise::default(), 4, 0).unwrap();
        let cfg = FitConfig {
            initial_neff: Some(4.0),
            ..FitConfig::default()
        };
        let fit = fit_scan(&data, &geom(), &cfg).unwrap();
        let accepted: Vec<f64> = fit
            .trace
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.chi2)
            .collect();
        assert!(accepted.len() >= 2);
        assert!(accepted.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn nuisance_parameters_float() {
        let data = noiseless(1.1, 1e-4);
        let cfg = FitConfig {
            float_visibility: true,
            float_linewidth: true,
            initial_neff: Some(0.8),
            ..FitConfig::default()
        };
        let fit = fit_scan(&data, &geom(), &cfg).unwrap();
        assert!((fit.mean_neff.value - 1.1).abs() < 1e-3, "{fit:?}");
        assert!((fit.visibility.unwrap().value - spec().visibility).abs() < 1e-5);
        assert!((fit.laser_fwhm.unwrap().value / spec().laser_fwhm - 1.0).abs() < 1e-2);
    }

    #[test]
    fn iteration_cap_reports_trace() {
        let cfg = FitConfig {
            max_iterations: 1,
            initial_neff: Some(5.0),
            ..FitConfig::default()
        };
        match fit_scan(&noiseless(0.6, 1e-3), &geom(), &cfg) {
            Err(Error::NonConvergence { trace }) => assert!(!trace.is_empty()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn profile_matches_standard_error_when_quadratic() {
        let data =
            synthesize_scan(&spec(), &geom(), 1.1, &grid(), &ScanNoise::default(), 5, 0).unwrap();
        let cfg = FitConfig::default();
        let fit = fit_scan(&data, &geom(), &cfg).unwrap();
        let iv = profile_uncertainty(&fit, &data, &geom(), &cfg).unwrap();
        let se = fit.mean_neff.std_error;
        assert!(!iv.lower_clipped && !iv.upper_open);
        assert!(
            ((fit.mean_neff.value - iv.lower) / se - 1.0).abs() < 0.1,
            "{iv:?} se {se}"
        );
        assert!(
            ((iv.upper - fit.mean_neff.value) / se - 1.0).abs() < 0.1,
            "{iv:?} se {se}"
        );
    }

    #[test]
    fn profile_shrinks_with_uncertainties() {
        let cfg = FitConfig::default();
        let mut widths = Vec::new();
        for sigma in [1e-2, 1e-4, 1e-6] {
            let data = noiseless(0.6, sigma);
            let fit = fit_scan(&data, &geom(), &cfg).unwrap();
            let iv = profile_uncertainty(&fit, &data, &geom(), &cfg).unwrap();
            widths.push(iv.upper - iv.lower);
        }
        assert!(
            widths[1] < widths[0] / 50.0 && widths[2] < widths[1] / 50.0,
            "{widths:?}"
        );
    }

    #[test]
    fn profile_clips_at_zero() {
        let data = noiseless(0.01, 2e-2);
        let cfg = FitConfig::default();
        let fit = fit_scan(&data, &geom(), &cfg).unwrap();
        let iv = profile_uncertainty(&fit, &data, &geom(), &cfg).unwrap();
        assert!(iv.lower_clipped);
        assert_eq!(iv.lower, 0.0);
        assert!(iv.upper > fit.mean_neff.value);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(6))]

        #[test]
        fn sigma_scale_leaves_estimate_and_scales_error(scale in 0.1f64..10.0, seed in 0u64..100, neff in 0.2f64..2.0) {
            let mut data = synthesize_scan(&spec(), &geom(), neff, &grid(), &ScanNoise::default(), seed, 0).unwrap();
            let a = fit_scan(&data, &geom(), &FitConfig::default()).unwrap();
            data.sigmas.iter_mut().for_each(|s| *s *= scale);
            let b = fit_scan(&data, &geom(), &FitConfig::default()).unwrap();
            proptest::prop_assert!((a.mean_neff.value - b.mean_neff.value).abs() < 1e-5 * (1.0 + a.mean_neff.value));
            proptest::prop_assert!((b.mean_neff.std_error / a.mean_neff.std_error / scale - 1.0).abs() < 1e-3);
            proptest::prop_assert!(b.mean_neff.value >= 0.0);
        }
    }
}
