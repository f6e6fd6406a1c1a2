//! Quantization of a lossless LC chain shunted by one Josephson junction.
//!
//! Each synthesized resonator becomes a harmonic mode `ħω_i a_i†a_i` whose
//! flux contributes `φ_zpf,i (a_i + a_i†)` to the junction phase
//!
//! ```text
//! φ̂ = Σ_i φ_zpf,i (a_i + a_i†),   φ_zpf,i = (2π/Φ₀)·√(ħ / 2ω_iC_i)
//! ```
//!
//! and the junction adds `E_J (1 - cos φ̂ - φ̂²/2)`. Kerr coefficients come
//! either from the quartic term of that expansion ([`kerr_perturbative`]) or
//! from level spacings of the diagonalized Hamiltonian ([`kerr_exact`]).

mod fock;
mod spectrum;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::SI;
use crate::synthesis::{RlcMode, SynthesisError};

pub use fock::{
    annihilation, build_hamiltonian, build_hamiltonian_capped, charge_operator, flux_operator,
    HamiltonianMatrix, DEFAULT_DIM_CAP,
};
pub use spectrum::{kerr_exact, MIN_EXACT_TRUNCATION};

#[derive(Debug, Error, PartialEq)]
pub enum QuantizeError {
    #[error("invalid mode: {0}")]
    InvalidMode(#[from] SynthesisError),
    #[error("invalid quantized mode: {0}")]
    BadMode(String),
    #[error("Josephson energy must be finite and positive, got {0} J")]
    BadJunction(f64),
    #[error("mode {index} has phi_zpf = {phi_zpf} >= 1; perturbative expansion not justified")]
    StrongCoupling { index: usize, phi_zpf: f64 },
    #[error("truncation {truncation} for mode {index} is below the minimum {min}")]
    TruncationTooSmall { index: usize, truncation: usize, min: usize },
    #[error("Hilbert-space dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("{modes} modes but {truncations} truncations")]
    Mismatch { modes: usize, truncations: usize },
    #[error("no eigenstate overlaps bare state {state:?} with weight >= 0.5 (best {weight:.3}); raise the truncation or lower phi_zpf")]
    AmbiguousLabel { state: Vec<usize>, weight: f64 },
}

pub type Result<T> = std::result::Result<T, QuantizeError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JunctionSource {
    Direct,
    /// Critical current in amperes.
    FromCriticalCurrent(f64),
}

/// Josephson energy of the shunting junction, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams {
    pub e_j: f64,
    pub source: JunctionSource,
}

impl JunctionParams {
    pub fn direct(e_j: f64) -> Result<Self> {
        // E_J = 0 is allowed here: it is the harmonic limit.
        if !(e_j.is_finite() && e_j >= 0.0) {
            return Err(QuantizeError::BadJunction(e_j));
        }
        Ok(Self {
            e_j,
            source: JunctionSource::Direct,
        })
    }

    /// `E_J = h·f`.
    pub fn from_frequency(f_hz: f64) -> Result<Self> {
        Self::direct(SI.h * f_hz)
    }

    /// `E_J = Φ₀ I_c / 2π`.
    pub fn from_critical_current(i_c: f64) -> Result<Self> {
        if !(i_c.is_finite() && i_c > 0.0) {
            return Err(QuantizeError::BadJunction(i_c));
        }
        Ok(Self {
            e_j: SI.phi0 * i_c / (2.0 * PI),
            source: JunctionSource::FromCriticalCurrent(i_c),
        })
    }

    /// Linear inductance `(Φ₀/2π)²/E_J` of the junction.
    pub fn inductance(&self) -> f64 {
        SI.reduced_flux_quantum().powi(2) / self.e_j
    }
}

/// A lossless harmonic mode seen by the junction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizedMode {
    /// rad/s.
    pub omega: f64,
    /// F.
    pub c: f64,
    /// Zero-point phase fluctuation at the junction, radians.
    pub phi_zpf: f64,
}

impl QuantizedMode {
    pub fn new(omega: f64, c: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0 && c.is_finite() && c > 0.0) {
            return Err(QuantizeError::BadMode(format!("omega = {omega}, c = {c}")));
        }
        let phi_zpf = (2.0 * PI / SI.phi0) * (SI.hbar / (2.0 * omega * c)).sqrt();
        Ok(Self { omega, c, phi_zpf })
    }

    /// Mode with the given frequency and zero-point phase; `c` is solved for.
    pub fn with_phi_zpf(omega: f64, phi_zpf: f64) -> Result<Self> {
        if !(phi_zpf.is_finite() && phi_zpf > 0.0) {
            return Err(QuantizeError::BadMode(format!("phi_zpf = {phi_zpf}")));
        }
        let scale = 2.0 * PI / SI.phi0;
        let c = SI.hbar * scale * scale / (2.0 * omega * phi_zpf * phi_zpf);
        Self::new(omega, c)
    }

    /// Charging energy `e²/2C`, joules.
    pub fn charging_energy(&self) -> f64 {
        SI.e_charge * SI.e_charge / (2.0 * self.c)
    }

    pub fn freq_hz(&self) -> f64 {
        self.omega / (2.0 * PI)
    }
}

/// Drops the resistance of each mode and attaches its zero-point phase.
pub fn quantize_modes(modes: &[RlcMode]) -> Result<Vec<QuantizedMode>> {
    modes
        .iter()
        .map(|m| {
            m.validate()?;
            QuantizedMode::new(m.omega, m.c)
        })
        .collect()
}

/// Mode frequencies, self-Kerr and cross-Kerr of the dispersive Hamiltonian
///
/// ```text
/// H = Σ ħω_i n_i - ½ Σ_i hα_i a_i†²a_i² - Σ_{i<j} hχ_ij n_i n_j
/// ```
///
/// `alpha` and `chi` are in hertz; `chi` is symmetric with a zero diagonal and
/// counts each pair once.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersiveModel {
    pub modes: Vec<QuantizedMode>,
    pub e_j: f64,
    pub alpha: Vec<f64>,
    pub chi: Vec<Vec<f64>>,
}

impl DispersiveModel {
    /// Largest `|χ_ij - χ_ji|`.
    pub fn chi_asymmetry(&self) -> f64 {
        let n = self.chi.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.chi[i][j] - self.chi[j][i]).abs());
            }
        }
        worst
    }
}

/// Quartic-order Kerr coefficients: `α_i = E_J φ_i⁴ / 2h`,
/// `χ_ij = E_J φ_i² φ_j² / h`.
///
/// These follow from `-E_J φ̂⁴/24` after normal ordering: the
/// `a_i†²a_i²` coefficient is `6·E_J φ_i⁴/24` and the `n_i n_j` coefficient is
/// `24·E_J φ_i² φ_j²/24`.
pub fn kerr_perturbative(modes: &[QuantizedMode], junction: &JunctionParams) -> Result<DispersiveModel> {
    if !(junction.e_j.is_finite() && junction.e_j >= 0.0) {
        return Err(QuantizeError::BadJunction(junction.e_j));
    }
    for (index, m) in modes.iter().enumerate() {
        if m.phi_zpf >= 1.0 {
            return Err(QuantizeError::StrongCoupling {
                index,
                phi_zpf: m.phi_zpf,
            });
        }
    }
    let ej_hz = junction.e_j / SI.h;
    let alpha = modes.iter().map(|m| ej_hz * m.phi_zpf.powi(4) / 2.0).collect();
    let n = modes.len();
    let mut chi = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let value = ej_hz * modes[i].phi_zpf.powi(2) * modes[j].phi_zpf.powi(2);
            chi[i][j] = value;
            chi[j][i] = value;
        }
    }
    Ok(DispersiveModel {
        modes: modes.to_vec(),
        e_j: junction.e_j,
        alpha,
        chi,
    })
}

/// Serialized form of a [`DispersiveModel`]; every frequency is energy/h.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersiveDocument {
    pub freqs_ghz: Vec<f64>,
    pub alpha_mhz: Vec<f64>,
    pub chi_mhz: Vec<Vec<f64>>,
    pub phi_zpf: Vec<f64>,
    pub ej_ghz: f64,
}

impl From<&DispersiveModel> for DispersiveDocument {
    fn from(m: &DispersiveModel) -> Self {
        Self {
            freqs_ghz: m.modes.iter().map(|q| q.freq_hz() / 1e9).collect(),
            alpha_mhz: m.alpha.iter().map(|a| a / 1e6).collect(),
            chi_mhz: m.chi.iter().map(|row| row.iter().map(|c| c / 1e6).collect()).collect(),
            phi_zpf: m.modes.iter().map(|q| q.phi_zpf).collect(),
            ej_ghz: m.e_j / SI.h / 1e9,
        }
    }
}
