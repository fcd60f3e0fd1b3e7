//! CODATA 2018 constants (SI) and reduced-unit conversions.
//!
//! Crystal-side quantities are dimensionless: positions in units of the
//! lattice constant `a`, wave vectors in units of `2π/a` and frequencies as
//! `u = ωa/2πc`.

use std::f64::consts::PI;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
pub const RYDBERG_EV: f64 = 13.605_693_122_994;

/// Rydberg energy as an angular frequency (rad/s).
pub fn rydberg_angular() -> f64 {
    RYDBERG_EV * ELEMENTARY_CHARGE / HBAR
}

/// Relativistic cutoff `mc²/ħ` (rad/s).
pub fn omega_relativistic() -> f64 {
    ELECTRON_MASS * SPEED_OF_LIGHT * SPEED_OF_LIGHT / HBAR
}

/// Converts between angular frequencies and reduced frequencies for one
/// lattice constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedScale {
    lattice_constant: f64,
}

impl ReducedScale {
    pub fn new(lattice_constant: f64) -> Self {
        Self { lattice_constant }
    }

    pub fn lattice_constant(&self) -> f64 {
        self.lattice_constant
    }

    /// `2πc/a`, the angular frequency of `u = 1`.
    pub fn unit(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.lattice_constant
    }

    pub fn to_reduced(&self, omega: f64) -> f64 {
        omega / self.unit()
    }

    pub fn to_angular(&self, u: f64) -> f64 {
        u * self.unit()
    }
}

/// Angular frequency in rad/s to ordinary frequency in MHz.
pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e-6
}
