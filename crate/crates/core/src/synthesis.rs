//! Series chains of parallel RLC resonators synthesized from conjugate pole
//! pairs.
//!
//! A pair `p = ξ ± jω_d` with residue `a ± jb` is identified with a parallel
//! RLC whose impedance is
//!
//! ```text
//! Z_k(s) = (ω_k R_k / Q_k)·s / (s² + (ω_k/Q_k)·s + ω_k²)
//! ```
//!
//! using `ω_k = |p|`, `Q_k = -ω_k/(2ξ)`, `R_k = -a/ξ`, `C_k = Q_k/(ω_k R_k)`
//! and `L_k = 1/(ω_k² C_k)`. The imaginary residue part `b` is dropped; the
//! identification is exact when `aξ + bω_d = 0`, which is the case for data
//! that really is a sum of parallel RLC branches.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratfit::{FitError, RationalModel};

#[derive(Debug, Error, PartialEq)]
pub enum SynthesisError {
    #[error("real pole at {pole} rad/s cannot form a resonant mode")]
    RealPole { pole: f64 },
    #[error("lossless pole at {omega} rad/s (infinite Q); add loss to the data or build the LC mode directly")]
    Lossless { omega: f64 },
    #[error("unstable pole {pole} has positive real part")]
    Unstable { pole: Complex64 },
    #[error("residue real part {a} <= 0 at {omega} rad/s implies a non-physical negative resistance")]
    NegativeResistance { a: f64, omega: f64 },
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error("non-finite frequency {0}")]
    BadFrequency(f64),
    #[error(transparent)]
    Model(#[from] FitError),
}

pub type Result<T> = std::result::Result<T, SynthesisError>;

/// A parallel RLC resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlcMode {
    /// Resonance `1/√(LC)`, rad/s.
    #[serde(rename = "omega_rad_s")]
    pub omega: f64,
    #[serde(rename = "q")]
    pub q_factor: f64,
    #[serde(rename = "r_ohm")]
    pub r: f64,
    #[serde(rename = "l_h")]
    pub l: f64,
    #[serde(rename = "c_f")]
    pub c: f64,
}

impl RlcMode {
    /// Mode with resonance `omega` (rad/s), quality factor `q_factor` and
    /// shunt resistance `r`.
    pub fn new(omega: f64, q_factor: f64, r: f64) -> Result<Self> {
        for (name, v) in [("omega", omega), ("q", q_factor), ("r", r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SynthesisError::InvalidMode(format!("{name} = {v} must be finite and positive")));
            }
        }
        let c = q_factor / (omega * r);
        let l = 1.0 / (omega * omega * c);
        Ok(Self {
            omega,
            q_factor,
            r,
            l,
            c,
        })
    }

    pub fn from_rlc(r: f64, l: f64, c: f64) -> Result<Self> {
        let mode = Self {
            omega: 1.0 / (l * c).sqrt(),
            q_factor: r * (c / l).sqrt(),
            r,
            l,
            c,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega", self.omega),
            ("q", self.q_factor),
            ("r", self.r),
            ("l", self.l),
            ("c", self.c),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(SynthesisError::InvalidMode(format!("{name} = {v} must be finite and positive")));
            }
        }
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        if rel(self.omega, 1.0 / (self.l * self.c).sqrt()) > 1e-9 {
            return Err(SynthesisError::InvalidMode("omega != 1/sqrt(LC)".into()));
        }
        if rel(self.q_factor, self.omega * self.r * self.c) > 1e-9 {
            return Err(SynthesisError::InvalidMode("q != omega*R*C".into()));
        }
        Ok(())
    }

    /// Real part `ξ = -ω/(2Q)` of the mode's poles.
    pub fn decay(&self) -> f64 {
        -self.omega / (2.0 * self.q_factor)
    }

    /// Upper-half-plane pole `ξ + j√(ω² - ξ²)`; `None` when `Q ≤ 1/2`
    /// (overdamped, real poles).
    pub fn pole(&self) -> Option<Complex64> {
        let xi = self.decay();
        let wd2 = self.omega * self.omega - xi * xi;
        (wd2 > 0.0).then(|| Complex64::new(xi, wd2.sqrt()))
    }

    /// Residue at [`pole`](Self::pole) for which the conjugate pair equals
    /// [`impedance_at`](Self::impedance_at) exactly.
    pub fn residue(&self) -> Option<Complex64> {
        let p = self.pole()?;
        let a = -self.r * p.re;
        Some(Complex64::new(a, -a * p.re / p.im))
    }

    /// Impedance at complex frequency `s` (rad/s).
    pub fn impedance_at(&self, s: Complex64) -> Complex64 {
        let w = self.omega;
        (w * self.r / self.q_factor) * s / (s * s + (w / self.q_factor) * s + w * w)
    }
}

/// One mode per conjugate pole pair, sorted by ascending resonance.
///
/// The model's constant and slope terms are not converted; see
/// [`discarded_term_warning`].
pub fn synthesize_modes(model: &RationalModel) -> Result<Vec<RlcMode>> {
    model.validate()?;
    let mut modes = Vec::new();
    for (p, r) in model.upper_half() {
        if p.im == 0.0 {
            return Err(SynthesisError::RealPole { pole: p.re });
        }
        let xi = p.re;
        if xi == 0.0 {
            return Err(SynthesisError::Lossless { omega: p.im });
        }
        if xi > 0.0 {
            return Err(SynthesisError::Unstable { pole: p });
        }
        let omega = p.norm();
        let a = r.re;
        if a <= 0.0 {
            return Err(SynthesisError::NegativeResistance { a, omega });
        }
        let q_factor = -omega / (2.0 * xi);
        let resistance = -a / xi;
        modes.push(RlcMode::new(omega, q_factor, resistance)?);
    }
    modes.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(modes)
}

/// Impedance of one mode at `s = j·2πf`.
pub fn mode_impedance(mode: &RlcMode, freqs: &[f64]) -> Result<Vec<Complex64>> {
    freqs
        .iter()
        .map(|&f| {
            if !f.is_finite() {
                return Err(SynthesisError::BadFrequency(f));
            }
            Ok(mode.impedance_at(Complex64::new(0.0, 2.0 * PI * f)))
        })
        .collect()
}

/// Impedance of the series chain of `modes`.
pub fn chain_impedance(modes: &[RlcMode], freqs: &[f64]) -> Result<Vec<Complex64>> {
    let mut total = vec![Complex64::new(0.0, 0.0); freqs.len()];
    for mode in modes {
        for (acc, z) in total.iter_mut().zip(mode_impedance(mode, freqs)?) {
            *acc += z;
        }
    }
    Ok(total)
}

/// Returns a warning when the constant or slope term of `model` exceeds 1% of
/// the median in-band `|Z|`; synthesis drops both.
pub fn discarded_term_warning(model: &RationalModel, freqs: &[f64]) -> Option<String> {
    if freqs.is_empty() {
        return None;
    }
    let mut mags: Vec<f64> = freqs
        .iter()
        .map(|&f| model.eval_s(Complex64::new(0.0, 2.0 * PI * f)).norm())
        .collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    let w_max = 2.0 * PI * freqs[freqs.len() - 1];
    let limit = 0.01 * median;
    let d = model.const_term.abs();
    let e = (model.slope_term * w_max).abs();
    (d > limit || e > limit).then(|| {
        format!(
            "discarding constant term {:.4e} ohm and slope contribution {:.4e} ohm (limit {:.4e} ohm)",
            model.const_term,
            model.slope_term * w_max,
            limit
        )
    })
}
