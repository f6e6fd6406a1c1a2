//! Physical constants (SI, exact 2019 definitions).

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Planck constant, J·s.
    pub h: f64,
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Elementary charge, C.
    pub e_charge: f64,
    /// Magnetic flux quantum h/2e, Wb.
    pub phi0: f64,
}

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// The constant set used throughout the crate.
pub const SI: PhysicalConstants = PhysicalConstants {
    h: PLANCK,
    hbar: PLANCK / (2.0 * PI),
    e_charge: ELEMENTARY_CHARGE,
    phi0: PLANCK / (2.0 * ELEMENTARY_CHARGE),
};

impl PhysicalConstants {
    /// Reduced flux quantum Φ₀/2π.
    pub fn reduced_flux_quantum(&self) -> f64 {
        self.phi0 / (2.0 * PI)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        SI
    }
}
