//! Kerr coefficients read off the exact spectrum.

use nalgebra::SymmetricEigen;

use super::{DispersiveModel, HamiltonianMatrix, QuantizeError, QuantizedMode, Result};
use crate::constants::SI;

/// Each ladder must keep two unassigned levels above `|2⟩`.
pub const MIN_EXACT_TRUNCATION: usize = 5;

/// Minimum weight `|⟨bare|ψ⟩|²` for an eigenstate to take a bare label.
const LABEL_WEIGHT: f64 = 0.5;

struct Labeled {
    eigenvalues: Vec<f64>,
    eigenvectors: nalgebra::DMatrix<f64>,
}

impl Labeled {
    /// Energy of the eigenstate with the largest weight on bare state `index`.
    fn energy(&self, index: usize, state: &[usize]) -> Result<f64> {
        let row = self.eigenvectors.row(index);
        let (k, weight) = row
            .iter()
            .map(|v| v * v)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, w)| if w > best.1 { (k, w) } else { best });
        if weight < LABEL_WEIGHT {
            return Err(QuantizeError::AmbiguousLabel {
                state: state.to_vec(),
                weight,
            });
        }
        Ok(self.eigenvalues[k])
    }
}

/// Diagonalizes `h` and returns spectroscopic Kerr coefficients in hertz:
///
/// ```text
/// α_i  = [(E(1_i) - E(0)) - (E(2_i) - E(1_i))] / h
/// χ_ij = [E(1_i) + E(1_j) - E(1_i 1_j) - E(0)] / h
/// ```
///
/// Eigenstates are labeled by their largest-weight bare product state.
pub fn kerr_exact(h: &HamiltonianMatrix, modes: &[QuantizedMode]) -> Result<DispersiveModel> {
    if modes.len() != h.mode_truncations.len() {
        return Err(QuantizeError::Mismatch {
            modes: modes.len(),
            truncations: h.mode_truncations.len(),
        });
    }
    for (index, &truncation) in h.mode_truncations.iter().enumerate() {
        if truncation < MIN_EXACT_TRUNCATION {
            return Err(QuantizeError::TruncationTooSmall {
                index,
                truncation,
                min: MIN_EXACT_TRUNCATION,
            });
        }
    }

    let eig = SymmetricEigen::new(h.entries.clone());
    let spectrum = Labeled {
        eigenvalues: eig.eigenvalues.iter().copied().collect(),
        eigenvectors: eig.eigenvectors,
    };

    let n = modes.len();
    let bare = |excitations: &[(usize, usize)]| {
        let mut occ = vec![0usize; n];
        for &(mode, count) in excitations {
            occ[mode] = count;
        }
        occ
    };
    let energy = |occ: Vec<usize>| spectrum.energy(h.index_of(&occ), &occ);

    let e0 = energy(bare(&[]))?;
    let mut e1 = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    for i in 0..n {
        let one = energy(bare(&[(i, 1)]))?;
        let two = energy(bare(&[(i, 2)]))?;
        alpha.push(((one - e0) - (two - one)) / SI.h);
        e1.push(one);
    }
    let mut chi = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let both = energy(bare(&[(i, 1), (j, 1)]))?;
            let value = (e1[i] + e1[j] - both - e0) / SI.h;
            chi[i][j] = value;
            chi[j][i] = value;
        }
    }

    Ok(DispersiveModel {
        modes: modes.to_vec(),
        e_j: h.e_j,
        alpha,
        chi,
    })
}
