//! Physical constants (CODATA 2018) and rubidium-85 D2 line defaults.

use std::f64::consts::PI;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Standard gravity used for the release kinematics.
pub const STANDARD_GRAVITY: f64 = 9.81;

pub const RB85_MASS: f64 = 84.911_789_738 * ATOMIC_MASS_UNIT;
pub const RB85_D2_WAVELENGTH: f64 = 780.241e-9;
/// Half the D2 population decay rate, gamma = 2pi x 3 MHz.
pub const RB85_D2_GAMMA: f64 = 2.0 * PI * 3.0e6;
/// Clebsch-Gordan average over the F=3 Zeeman sublevels.
pub const F3_ZEEMAN_FACTOR: f64 = 3.0 / 7.0;

/// Converts an angular frequency in rad/s to an ordinary frequency in Hz.
#[inline]
pub fn per_two_pi(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Converts an ordinary frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn two_pi_times(hz: f64) -> f64 {
    2.0 * PI * hz
}
