//! Closed-form cavity-QED rate algebra.
//!
//! All rates are angular frequencies in rad/s. `gamma` and `kappa` are the
//! *half* widths: the free-space population decay rate is `2 * gamma` and the
//! cavity power decay rate is `2 * kappa`. The vacuum Rabi frequency is `2 * g`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{
    F3_ZEEMAN_FACTOR, HBAR, RB85_D2_GAMMA, RB85_D2_WAVELENGTH, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY,
};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Constants of the atomic transition driven by the probe and the cavity.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionSpec {
    pub wavelength: f64,
    /// Half the population decay rate (rad/s).
    pub gamma: f64,
    /// Transition dipole moment (C m). Derived from `gamma` when absent.
    pub dipole_moment: Option<f64>,
    pub zeeman_factor: f64,
}

impl TransitionSpec {
    pub fn new(wavelength: f64, gamma: f64, zeeman_factor: f64) -> Result<Self> {
        let spec = Self {
            wavelength,
            gamma,
            dipole_moment: None,
            zeeman_factor,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The closed `F=3 -> F'=4` cycling transition of the 85Rb D2 line.
    pub fn rb85_d2() -> Self {
        Self {
            wavelength: RB85_D2_WAVELENGTH,
            gamma: RB85_D2_GAMMA,
            dipole_moment: None,
            zeeman_factor: F3_ZEEMAN_FACTOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("wavelength", self.wavelength)?;
        ensure_positive("gamma", self.gamma)?;
        if !(self.zeeman_factor > 0.0 && self.zeeman_factor <= 1.0) {
            return Err(Error::domain(format!(
                "zeeman_factor must lie in (0, 1], got {}",
                self.zeeman_factor
            )));
        }
        if let Some(mu) = self.dipole_moment {
            ensure_positive("dipole_moment", mu)?;
        }
        Ok(())
    }

    /// Angular transition frequency `2 pi c / wavelength`.
    pub fn omega(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.wavelength
    }

    /// The stored dipole moment, or the one implied by the radiative decay rate.
    pub fn dipole_moment(&self) -> f64 {
        self.dipole_moment
            .unwrap_or_else(|| dipole_from_decay(self.gamma, self.omega()))
    }
}

/// Dipole moment from the free-space decay rate `2 gamma`:
/// `mu^2 = 3 pi eps0 hbar c^3 (2 gamma) / omega^3`.
pub fn dipole_from_decay(gamma: f64, omega: f64) -> f64 {
    (3.0 * PI * VACUUM_PERMITTIVITY * HBAR * SPEED_OF_LIGHT.powi(3) * 2.0 * gamma / omega.powi(3))
        .sqrt()
}

/// Plano-concave Fabry-Perot resonator geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct CavitySpec {
    pub length: f64,
    pub finesse: f64,
    pub waist: f64,
    /// Cavity resonance (rad/s).
    pub omega: f64,
}

impl CavitySpec {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("cavity length", self.length)?;
        ensure_positive("cavity waist", self.waist)?;
        ensure_positive("cavity omega", self.omega)?;
        if !(self.finesse.is_finite() && self.finesse >= 1.0) {
            return Err(Error::domain(format!(
                "finesse must be finite and >= 1, got {}",
                self.finesse
            )));
        }
        Ok(())
    }

    /// The fiber-chip cavity used for the atom-detection experiments,
    /// tuned to the 85Rb D2 line.
    pub fn fiber_chip() -> Self {
        Self {
            length: 133e-6,
            finesse: 280.0,
            waist: 4.6e-6,
            omega: TransitionSpec::rb85_d2().omega(),
        }
    }
}

/// Half the cavity power decay rate, `kappa = pi c / (2 L F)`.
pub fn kappa_from_geometry(spec: &CavitySpec) -> Result<f64> {
    spec.validate()?;
    Ok(PI * SPEED_OF_LIGHT / (2.0 * spec.length * spec.finesse))
}

/// Half the vacuum Rabi frequency: `2g = mu sqrt(omega_c / (2 hbar eps0 V))`.
pub fn vacuum_rabi(dipole_moment: f64, omega_c: f64, mode_volume: f64) -> Result<f64> {
    ensure_positive("dipole moment", dipole_moment)?;
    ensure_positive("cavity omega", omega_c)?;
    ensure_positive("mode volume", mode_volume)?;
    Ok(0.5 * dipole_moment * (omega_c / (2.0 * HBAR * VACUUM_PERMITTIVITY * mode_volume)).sqrt())
}

/// Single-atom cooperativity `C = g^2 / (2 kappa gamma)`.
pub fn cooperativity(g: f64, kappa: f64, gamma: f64) -> Result<f64> {
    ensure_non_negative("g", g)?;
    ensure_positive("kappa", kappa)?;
    ensure_positive("gamma", gamma)?;
    Ok(g * g / (2.0 * kappa * gamma))
}

/// Cooperativity reduced by an atom-cavity detuning through the Lorentzian
/// cavity response of half-width `kappa`.
pub fn detuned_cooperativity(cooperativity: f64, detuning: f64, kappa: f64) -> f64 {
    let x = detuning / kappa;
    cooperativity / (1.0 + x * x)
}

/// Rates of the cavity-modified spontaneous emission.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayRates {
    /// Total population decay rate `2 gamma (1 + 2 C)`.
    pub total: f64,
    /// Emission into the cavity mode, `4 C gamma`.
    pub into_mode: f64,
}

impl DecayRates {
    /// Fraction of spontaneous emission that goes into the cavity mode.
    pub fn mode_branching(&self) -> f64 {
        if self.total > 0.0 {
            self.into_mode / self.total
        } else {
            0.0
        }
    }
}

pub fn enhanced_decay_rate(gamma: f64, c_tot: f64) -> Result<DecayRates> {
    ensure_positive("gamma", gamma)?;
    if !(c_tot.is_finite() && c_tot >= 0.0) {
        return Err(Error::domain(format!(
            "cooperativity must be finite and >= 0, got {c_tot}"
        )));
    }
    Ok(DecayRates {
        total: 2.0 * gamma * (1.0 + 2.0 * c_tot),
        into_mode: 4.0 * c_tot * gamma,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeVolumeConvention {
    /// `V = (pi/4) w^2 L`, the volume of a uniform Gaussian beam.
    TravelingGaussian,
    /// Half the traveling volume, averaging the `cos^2` standing wave.
    StandingGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeVolume {
    pub volume: f64,
    pub convention: ModeVolumeConvention,
}

pub fn mode_volume(spec: &CavitySpec, convention: ModeVolumeConvention) -> Result<ModeVolume> {
    spec.validate()?;
    let traveling = PI / 4.0 * spec.waist * spec.waist * spec.length;
    let volume = match convention {
        ModeVolumeConvention::TravelingGaussian => traveling,
        ModeVolumeConvention::StandingGaussian => 0.5 * traveling,
    };
    Ok(ModeVolume { volume, convention })
}

/// Coupling constants of one atom at an antinode of the cavity mode.
///
/// `cooperativity` is computed from `(g, kappa, gamma)` at construction, so the
/// identities `C 2 kappa gamma = g^2` and `4 C gamma = 2 g^2 / kappa` hold for
/// every value of this type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingRates {
    g: f64,
    kappa: f64,
    gamma: f64,
    cooperativity: f64,
}

impl CouplingRates {
    pub fn new(g: f64, kappa: f64, gamma: f64) -> Result<Self> {
        let cooperativity = cooperativity(g, kappa, gamma)?;
        Ok(Self {
            g,
            kappa,
            gamma,
            cooperativity,
        })
    }

    /// Rates for a configured `g` with `kappa` taken from the cavity geometry.
    pub fn from_geometry(g: f64, cavity: &CavitySpec, transition: &TransitionSpec) -> Result<Self> {
        transition.validate()?;
        Self::new(g, kappa_from_geometry(cavity)?, transition.gamma)
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cooperativity(&self) -> f64 {
        self.cooperativity
    }

    /// Rate of emission into the mode for one antinode atom, `2 g^2 / kappa`.
    pub fn purcell_rate(&self) -> f64 {
        2.0 * self.g * self.g / self.kappa
    }

    /// Same rates with the cooperativity scaled by the Lorentzian factor of an
    /// atom-cavity detuning (rad/s). `g` is rescaled to keep the identities.
    pub fn detuned(&self, detuning: f64) -> Self {
        let x = detuning / self.kappa;
        let scale = 1.0 / (1.0 + x * x);
        Self {
            g: self.g * scale.sqrt(),
            kappa: self.kappa,
            gamma: self.gamma,
            cooperativity: self.cooperativity * scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::two_pi_times;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn chip_cavity() -> CavitySpec {
        CavitySpec::fiber_chip()
    }

    #[test]
    fn kappa_of_fiber_chip_cavity() {
        let kappa = kappa_from_geometry(&chip_cavity()).unwrap();
        assert_relative_eq!(
            kappa / (2.0 * PI),
            2.012_570_206_766_917e9,
            max_relative = 1e-9
        );
        assert!((kappa / (2.0 * PI) / 1e9 - 2.0).abs() < 0.02);
    }

    #[test]
    fn kappa_scaling_and_high_finesse() {
        let base = chip_cavity();
        let k = kappa_from_geometry(&base).unwrap();
        let long = CavitySpec {
            length: 2.0 * base.length,
            ..base.clone()
        };
        assert_relative_eq!(
            kappa_from_geometry(&long).unwrap(),
            k / 2.0,
            max_relative = 1e-14
        );
        let fine = CavitySpec {
            finesse: 5600.0,
            ..base
        };
        assert_relative_eq!(
            kappa_from_geometry(&fine).unwrap() / (2.0 * PI),
            0.100_628_510_338_345_9e9,
            max_relative = 1e-9
        );
    }

    #[test]
    fn kappa_rejects_bad_geometry() {
        let bad = CavitySpec {
            length: -1.0,
            ..chip_cavity()
        };
        assert!(matches!(kappa_from_geometry(&bad), Err(Error::Domain(_))));
        let nan = CavitySpec {
            finesse: f64::NAN,
            ..chip_cavity()
        };
        assert!(kappa_from_geometry(&nan).is_err());
    }

    #[test]
    fn vacuum_rabi_scalings() {
        let (mu, w, v) = (2.5e-29, 2.4e15, 2e-15);
        let g = vacuum_rabi(mu, w, v).unwrap();
        assert_relative_eq!(
            g / vacuum_rabi(mu, w, 4.0 * v).unwrap(),
            2.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            vacuum_rabi(2.0 * mu, w, v).unwrap(),
            2.0 * g,
            max_relative = 1e-14
        );
        assert!(vacuum_rabi(mu, w, 0.0).is_err());
    }

    #[test]
    fn vacuum_rabi_from_rb85_constants() {
        // Frozen from a 30-digit mpmath evaluation of the same formulas.
        let transition = TransitionSpec::rb85_d2();
        let mu = transition.dipole_moment();
        assert_relative_eq!(mu, 2.520_501_252_717_294_5e-29, max_relative = 1e-8);
        let v = mode_volume(&chip_cavity(), ModeVolumeConvention::TravelingGaussian).unwrap();
        let g = vacuum_rabi(mu, transition.omega(), v.volume).unwrap();
        assert_relative_eq!(g, 3.047_802_266_363_515e8, max_relative = 1e-8);
        let vs = mode_volume(&chip_cavity(), ModeVolumeConvention::StandingGaussian).unwrap();
        let gs = vacuum_rabi(mu, transition.omega(), vs.volume).unwrap();
        assert_relative_eq!(gs, 4.310_243_300_522_739e8, max_relative = 1e-8);
    }

    #[test]
    fn cooperativity_examples() {
        let c = cooperativity(two_pi_times(100e6), two_pi_times(2e9), two_pi_times(3e6)).unwrap();
        assert_relative_eq!(c, 0.833_333_333_333_333_3, max_relative = 1e-12);
        assert_eq!(cooperativity(0.0, 1.0, 1.0).unwrap(), 0.0);
        let half =
            cooperativity(two_pi_times(100e6), two_pi_times(1e9), two_pi_times(3e6)).unwrap();
        assert_relative_eq!(half, 2.0 * c, max_relative = 1e-14);
        assert!(cooperativity(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn enhanced_decay_examples() {
        let gamma = two_pi_times(3e6);
        let free = enhanced_decay_rate(gamma, 0.0).unwrap();
        assert_eq!(free.total, 2.0 * gamma);
        assert_eq!(free.into_mode, 0.0);
        let r = enhanced_decay_rate(gamma, 0.8).unwrap();
        assert_relative_eq!(r.total, two_pi_times(15.6e6), max_relative = 1e-12);
        assert_relative_eq!(r.into_mode, two_pi_times(9.6e6), max_relative = 1e-12);
        assert!(enhanced_decay_rate(gamma, -0.1).is_err());
    }

    #[test]
    fn purcell_identity_for_constructed_rates() {
        let rates =
            CouplingRates::new(two_pi_times(100e6), two_pi_times(2e9), two_pi_times(3e6)).unwrap();
        let r = enhanced_decay_rate(rates.gamma(), rates.cooperativity()).unwrap();
        assert_relative_eq!(r.into_mode, rates.purcell_rate(), max_relative = 1e-14);
    }

    #[test]
    fn mode_volume_examples() {
        let t = mode_volume(&chip_cavity(), ModeVolumeConvention::TravelingGaussian).unwrap();
        assert_relative_eq!(t.volume, 2.210_330_343_286_171e-15, max_relative = 1e-12);
        let s = mode_volume(&chip_cavity(), ModeVolumeConvention::StandingGaussian).unwrap();
        assert_eq!(s.volume, t.volume / 2.0);
        assert_eq!(s.convention, ModeVolumeConvention::StandingGaussian);
        let wide = CavitySpec {
            waist: 2.0 * 4.6e-6,
            ..chip_cavity()
        };
        let w = mode_volume(&wide, ModeVolumeConvention::TravelingGaussian).unwrap();
        assert_relative_eq!(w.volume, 4.0 * t.volume, max_relative = 1e-14);
    }

    #[test]
    fn transition_validation() {
        assert!(TransitionSpec::new(780e-9, 1.0, 1.5).is_err());
        assert!(TransitionSpec::new(780e-9, 1.0, 0.0).is_err());
        assert!(TransitionSpec::new(0.0, 1.0, 0.5).is_err());
        let t = TransitionSpec::rb85_d2();
        assert_relative_eq!(
            t.omega() * t.wavelength,
            2.0 * PI * SPEED_OF_LIGHT,
            max_relative = 1e-15
        );
    }

    #[test]
    fn detuning_reduces_cooperativity() {
        let rates =
            CouplingRates::new(two_pi_times(100e6), two_pi_times(2e9), two_pi_times(3e6)).unwrap();
        let d = rates.detuned(rates.kappa());
        assert_relative_eq!(
            d.cooperativity(),
            rates.cooperativity() / 2.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            d.cooperativity() * 2.0 * d.kappa() * d.gamma(),
            d.g() * d.g(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            detuned_cooperativity(0.8, 3.0, 1.0),
            0.08,
            max_relative = 1e-14
        );
    }

    proptest! {
        #[test]
        fn cooperativity_identity(g in 1e3f64..1e10, kappa in 1e3f64..1e12, gamma in 1e3f64..1e9) {
            let r = CouplingRates::new(g, kappa, gamma).unwrap();
            let lhs = r.cooperativity() * 2.0 * r.kappa() * r.gamma();
            prop_assert!((lhs - g * g).abs() <= 1e-12 * g * g);
            let into = enhanced_decay_rate(gamma, r.cooperativity()).unwrap().into_mode;
            prop_assert!((into - r.purcell_rate()).abs() <= 1e-12 * into.max(1e-300));
        }

        #[test]
        fn kappa_is_homogeneous_degree_minus_one(l in 1e-6f64..1e-2, f in 1.0f64..1e5, s in 0.1f64..10.0) {
            let base = CavitySpec { length: l, finesse: f, waist: 5e-6, omega: 2.4e15 };
            let k = kappa_from_geometry(&base).unwrap();
            let kl = kappa_from_geometry(&CavitySpec { length: s * l, ..base.clone() }).unwrap();
            prop_assert!((kl * s - k).abs() <= 1e-12 * k);
            if s * f >= 1.0 {
                let kf = kappa_from_geometry(&CavitySpec { finesse: s * f, ..base }).unwrap();
                prop_assert!((kf * s - k).abs() <= 1e-12 * k);
            }
        }

        #[test]
        fn enhanced_minus_free_is_into_mode(gamma in 1.0f64..1e9, c in 0.0f64..100.0) {
            let r = enhanced_decay_rate(gamma, c).unwrap();
            let lhs = r.total - 2.0 * gamma;
            prop_assert!((lhs - r.into_mode).abs() <= 1e-12 * r.total);
        }

        #[test]
        fn vacuum_rabi_scale_invariance(mu in 1e-30f64..1e-28, w in 1e14f64..1e16, v in 1e-18f64..1e-12) {
            let g = vacuum_rabi(mu, w, v).unwrap();
            let g1 = vacuum_rabi(mu, w, 1.0).unwrap();
            prop_assert!((g * v.sqrt() - g1).abs() <= 1e-12 * g1);
        }
    }
}
