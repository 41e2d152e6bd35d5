//! Von Neumann and Shannon entropies.
//!
//! S = -tr(rho log rho), evaluated from the Hermitian eigendecomposition.
//! Base-2 logarithms are the default report unit so a symmetric two-way
//! split reads exactly 1; natural-log values ride along.

use crate::qstate::{DensityMatrix, PSD_TOL};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("matrix has eigenvalue {eigenvalue:.3e} below -{tol:.1e}; not positive semidefinite")]
    NotPSD { eigenvalue: f64, tol: f64 },
    #[error("probability vector not normalized: sum = {sum}")]
    NotNormalized { sum: f64 },
    #[error("negative probability {value:.3e} at index {index}")]
    NegativeProbability { index: usize, value: f64 },
}

/// Entropy in both log bases. `nats = bits * ln 2` by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub bits: f64,
    pub nats: f64,
}

impl EntropyValue {
    pub fn from_bits(bits: f64) -> Self {
        EntropyValue {
            bits,
            nats: bits * std::f64::consts::LN_2,
        }
    }
}

/// -sum p log2 p with the 0 log 0 = 0 convention. Inputs are assumed to be
/// eigenvalues already cleared for the PSD window.
fn sum_plogp_bits(p: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    for v in p {
        if v > 0.0 {
            s -= v * v.log2();
        }
    }
    s
}

/// Von Neumann entropy of a density matrix.
///
/// Eigenvalues in [-PSD_TOL, 0) are clamped to 0 (floating slack from the
/// eigensolver); anything below -PSD_TOL means the matrix is genuinely not
/// positive semidefinite and is reported as an error rather than silently
/// clamped, so broken channels fail loudly.
pub fn von_neumann(rho: &DensityMatrix) -> Result<EntropyValue, EntropyError> {
    let mut eigs = rho.eigenvalues();
    for ev in eigs.iter_mut() {
        if *ev < 0.0 {
            if *ev < -PSD_TOL {
                return Err(EntropyError::NotPSD {
                    eigenvalue: *ev,
                    tol: PSD_TOL,
                });
            }
            *ev = 0.0;
        }
    }
    Ok(EntropyValue::from_bits(sum_plogp_bits(eigs.into_iter())))
}

/// Shannon entropy of a classical probability vector.
pub fn shannon(p: &[f64]) -> Result<EntropyValue, EntropyError> {
    for (index, &value) in p.iter().enumerate() {
        if value < 0.0 {
            return Err(EntropyError::NegativeProbability { index, value });
        }
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(EntropyError::NotNormalized { sum });
    }
    Ok(EntropyValue::from_bits(sum_plogp_bits(p.iter().copied())))
}
