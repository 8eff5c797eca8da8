//! Standing-wave Gaussian mode of the cavity and the aggregation of per-atom
//! couplings into the ensemble cooperativity `C_tot` and effective atom number.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{ensure_positive, Error, Result};

/// Spatial layout of the fundamental cavity mode.
///
/// The waist is taken as constant along the mode; an antinode sits at `origin`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeGeometry {
    origin: Vector3<f64>,
    axis: Vector3<f64>,
    pub waist: f64,
    pub wavelength: f64,
    pub length: f64,
}

impl ModeGeometry {
    pub fn new(
        origin: Vector3<f64>,
        axis: Vector3<f64>,
        waist: f64,
        wavelength: f64,
        length: f64,
    ) -> Result<Self> {
        ensure_positive("mode waist", waist)?;
        ensure_positive("mode wavelength", wavelength)?;
        ensure_positive("mode length", length)?;
        let norm = axis.norm();
        if !(norm.is_finite() && norm > 0.0) || !origin.iter().all(|x| x.is_finite()) {
            return Err(Error::domain("mode axis must be a finite non-zero vector"));
        }
        Ok(Self {
            origin,
            axis: axis / norm,
            waist,
            wavelength,
            length,
        })
    }

    /// Horizontal mode along x centered at the origin.
    pub fn horizontal(waist: f64, wavelength: f64, length: f64) -> Result<Self> {
        Self::new(Vector3::zeros(), Vector3::x(), waist, wavelength, length)
    }

    pub fn origin(&self) -> &Vector3<f64> {
        &self.origin
    }

    pub fn axis(&self) -> &Vector3<f64> {
        &self.axis
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// A unit vector orthogonal to the axis.
    pub fn transverse(&self) -> Vector3<f64> {
        let helper = if self.axis.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        self.axis.cross(&helper).normalize()
    }
}

/// Fraction of the peak intensity at `r`:
/// `cos^2(k z) exp(-2 rho^2 / w^2)` inside `|z| <= L/2`, zero outside.
pub fn mode_intensity(geom: &ModeGeometry, r: &Vector3<f64>) -> f64 {
    let d = r - geom.origin;
    let z = d.dot(&geom.axis);
    if z.abs() > 0.5 * geom.length {
        return 0.0;
    }
    let rho2 = (d.norm_squared() - z * z).max(0.0);
    let c = (geom.wavenumber() * z).cos();
    c * c * (-2.0 * rho2 / (geom.waist * geom.waist)).exp()
}

/// Ensemble coupling of a set of atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleCoupling {
    pub c_tot: f64,
    /// `sum I(r_n)`: the number of antinode atoms with the same `C_tot`.
    pub n_eff: f64,
    pub intensities: Vec<f64>,
}

/// `C_tot = zeeman_factor * C * sum I(r_n)`.
pub fn aggregate_coupling(
    cooperativity: f64,
    intensities: &[f64],
    zeeman_factor: f64,
) -> Result<EnsembleCoupling> {
    if !(cooperativity.is_finite() && cooperativity >= 0.0) {
        return Err(Error::domain(format!(
            "cooperativity must be finite and >= 0, got {cooperativity}"
        )));
    }
    if let Some(bad) = intensities.iter().find(|i| !(0.0..=1.0).contains(*i)) {
        return Err(Error::domain(format!(
            "mode intensity fraction {bad} outside [0, 1]"
        )));
    }
    let n_eff: f64 = intensities.iter().sum();
    Ok(EnsembleCoupling {
        c_tot: c_tot_from_neff(cooperativity, n_eff, zeeman_factor),
        n_eff,
        intensities: intensities.to_vec(),
    })
}

#[inline]
pub fn c_tot_from_neff(cooperativity: f64, n_eff: f64, zeeman_factor: f64) -> f64 {
    zeeman_factor * cooperativity * n_eff
}

/// Distribution of the intensity fraction seen by one atom in the mode,
/// discretized on the lattice `I = k / resolution`, `k = 0..=resolution`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityLattice {
    resolution: usize,
    probabilities: Vec<f64>,
}

impl IntensityLattice {
    /// Every atom at an antinode.
    pub fn antinode(resolution: usize) -> Self {
        let mut probabilities = vec![0.0; resolution + 1];
        probabilities[resolution] = 1.0;
        Self {
            resolution,
            probabilities,
        }
    }

    /// Atoms spread uniformly over one axial period and uniformly over the
    /// transverse disk of radius `transverse_cutoff * waist`.
    ///
    /// The mass of each quadrature point is split linearly between its two
    /// neighbouring lattice nodes, which keeps the mean exact.
    pub fn mode_sampled(
        geom: &ModeGeometry,
        transverse_cutoff: f64,
        resolution: usize,
    ) -> Result<Self> {
        ensure_positive("transverse cutoff", transverse_cutoff)?;
        if resolution == 0 {
            return Err(Error::domain("intensity lattice resolution must be >= 1"));
        }
        const AXIAL: usize = 256;
        const RADIAL: usize = 256;
        let radius = transverse_cutoff * geom.waist;
        let perp = geom.transverse();
        let mut probabilities = vec![0.0; resolution + 1];
        let mass = 1.0 / (AXIAL * RADIAL) as f64;
        for j in 0..AXIAL {
            let z = (j as f64 + 0.5) / AXIAL as f64 * 0.5 * geom.wavelength;
            for k in 0..RADIAL {
                let rho = radius * ((k as f64 + 0.5) / RADIAL as f64).sqrt();
                let r = geom.origin + z * geom.axis + rho * perp;
                let x = mode_intensity(geom, &r) * resolution as f64;
                let lo = (x.floor() as usize).min(resolution);
                let frac = x - lo as f64;
                probabilities[lo] += mass * (1.0 - frac);
                if frac > 0.0 {
                    probabilities[lo + 1] += mass * frac;
                }
            }
        }
        Ok(Self {
            resolution,
            probabilities,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum::<f64>()
            / self.resolution as f64
    }

    /// Distributions of the summed intensity of `0..=n_max` atoms, each on the
    /// same lattice (length `n * resolution + 1`).
    pub fn sum_distributions(&self, n_max: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(n_max + 1);
        out.push(vec![1.0]);
        for n in 1..=n_max {
            let prev: &Vec<f64> = &out[n - 1];
            let mut next = vec![0.0; prev.len() + self.resolution];
            for (i, &a) in prev.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (k, &b) in self.probabilities.iter().enumerate() {
                    next[i + k] += a * b;
                }
            }
            out.push(next);
        }
        out
    }
}
