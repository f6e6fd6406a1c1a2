//! Truncated Fock-space operators and the full junction Hamiltonian.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::{JunctionParams, QuantizeError, QuantizedMode, Result};
use crate::constants::SI;

/// Largest Hilbert-space dimension [`build_hamiltonian`] accepts.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Smallest per-mode truncation accepted by [`build_hamiltonian`].
pub const MIN_TRUNCATION: usize = 3;

/// `H = Σ ħω_i n_i + E_J (1 - cos φ̂ - φ̂²/2)` in the product Fock basis, in
/// joules.
///
/// The matrix is real symmetric: `φ̂` is real in this basis. Basis index
/// `Σ n_i · stride_i` with the last mode varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    pub dim: usize,
    pub entries: DMatrix<f64>,
    pub mode_truncations: Vec<usize>,
    pub e_j: f64,
}

impl HamiltonianMatrix {
    /// Flat basis index of the product state `|n_0 n_1 ...⟩`.
    pub fn index_of(&self, occupations: &[usize]) -> usize {
        occupations
            .iter()
            .zip(&self.mode_truncations)
            .fold(0, |acc, (&n, &dim)| acc * dim + n)
    }

    /// Largest `|H_ij - H_ji|` relative to the largest entry.
    pub fn hermiticity_error(&self) -> f64 {
        let scale = self.entries.amax().max(f64::MIN_POSITIVE);
        (&self.entries - self.entries.transpose()).amax() / scale
    }
}

/// Lowering operator on an `n`-level ladder.
pub fn annihilation(n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = (k as f64).sqrt();
    }
    a
}

/// Flux operator `√(ħ/2ωC)·(a + a†)` in webers.
pub fn flux_operator(mode: &QuantizedMode, n: usize) -> DMatrix<Complex64> {
    let a = annihilation(n);
    let scale = (SI.hbar / (2.0 * mode.omega * mode.c)).sqrt();
    (&a + a.transpose()).map(|v| Complex64::new(scale * v, 0.0))
}

/// Charge operator `-i·√(ħωC/2)·(a - a†)` in coulombs.
pub fn charge_operator(mode: &QuantizedMode, n: usize) -> DMatrix<Complex64> {
    let a = annihilation(n);
    let scale = (SI.hbar * mode.omega * mode.c / 2.0).sqrt();
    (&a - a.transpose()).map(|v| Complex64::new(0.0, -scale * v))
}

/// `1 - cos x - x²/2`, without cancellation for small `x`.
pub(crate) fn cosine_remainder(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 1.0 - x.cos() - 0.5 * x * x;
    }
    // -(x⁴/4! - x⁶/6! + x⁸/8! - ...)
    let x2 = x * x;
    let mut term = x2 * x2 / 24.0;
    let mut sum = 0.0_f64;
    let mut k = 2;
    while term.abs() > f64::EPSILON * sum.abs() * 0.25 || k == 2 {
        sum += term;
        term *= -x2 / ((2 * k + 1) as f64 * (2 * k + 2) as f64);
        k += 1;
    }
    -sum
}

pub fn build_hamiltonian(
    modes: &[QuantizedMode],
    junction: &JunctionParams,
    truncations: &[usize],
) -> Result<HamiltonianMatrix> {
    build_hamiltonian_capped(modes, junction, truncations, DEFAULT_DIM_CAP)
}

/// [`build_hamiltonian`] with an explicit dimension cap.
///
/// `cos φ̂` is evaluated spectrally. The single-mode quadratures
/// `x_i = a_i + a_i†` commute, so `φ̂ = Σ φ_i x_i` is diagonal in the product
/// of their eigenbases with eigenvalues `Σ φ_i λ_i`.
pub fn build_hamiltonian_capped(
    modes: &[QuantizedMode],
    junction: &JunctionParams,
    truncations: &[usize],
    dim_cap: usize,
) -> Result<HamiltonianMatrix> {
    if modes.len() != truncations.len() {
        return Err(QuantizeError::Mismatch {
            modes: modes.len(),
            truncations: truncations.len(),
        });
    }
    if !(junction.e_j.is_finite() && junction.e_j >= 0.0) {
        return Err(QuantizeError::BadJunction(junction.e_j));
    }
    for (index, &truncation) in truncations.iter().enumerate() {
        if truncation < MIN_TRUNCATION {
            return Err(QuantizeError::TruncationTooSmall {
                index,
                truncation,
                min: MIN_TRUNCATION,
            });
        }
    }
    let dim = truncations
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .filter(|&d| d <= dim_cap)
        .ok_or_else(|| QuantizeError::DimensionCap {
            dim: truncations.iter().fold(1usize, |a, &n| a.saturating_mul(n)),
            cap: dim_cap,
        })?;

    let mut h = DMatrix::<f64>::zeros(dim, dim);

    if junction.e_j > 0.0 && !modes.is_empty() {
        let mut basis = DMatrix::<f64>::from_element(1, 1, 1.0);
        let mut phase = vec![0.0];
        for (mode, &n) in modes.iter().zip(truncations) {
            let a = annihilation(n);
            let eig = SymmetricEigen::new(&a + a.transpose());
            basis = basis.kronecker(&eig.eigenvectors);
            phase = phase
                .iter()
                .flat_map(|&p| eig.eigenvalues.iter().map(move |&l| p + mode.phi_zpf * l))
                .collect();
        }
        // U·diag(g)·Uᵀ
        let mut weighted = basis.clone();
        for (j, &p) in phase.iter().enumerate() {
            weighted.column_mut(j).scale_mut(junction.e_j * cosine_remainder(p));
        }
        h = weighted * basis.transpose();
        // Exact symmetry; the product above is symmetric only to round-off.
        for i in 0..dim {
            for j in 0..i {
                let v = 0.5 * (h[(i, j)] + h[(j, i)]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
    }

    let mut occupation = vec![0usize; modes.len()];
    for idx in 0..dim {
        let mut rem = idx;
        for (slot, &n) in occupation.iter_mut().zip(truncations).rev() {
            *slot = rem % n;
            rem /= n;
        }
        let linear: f64 = modes
            .iter()
            .zip(&occupation)
            .map(|(m, &n)| SI.hbar * m.omega * n as f64)
            .sum();
        h[(idx, idx)] += linear;
    }

    Ok(HamiltonianMatrix {
        dim,
        entries: h,
        mode_truncations: truncations.to_vec(),
        e_j: junction.e_j,
    })
}
