//! Decoherence matrices and the Schur-product channel.
//!
//! Entangling a system with reservoir states {|chi_i>} multiplies each
//! density-matrix element by the overlap of the attached reservoir states,
//!
//! ```text
//! rho_ij -> beta_ij rho_ij,   beta_ij = <chi~_i|chi~_j> / <chi_i|chi_j>
//! ```
//!
//! a Schur (element-wise) product. A physical beta is a Gram matrix of unit
//! vectors: Hermitian, positive semidefinite, unit diagonal. For such beta
//! the channel never lowers the von Neumann entropy; `lemma_trial` samples
//! that inequality, and `reversal_beta` reconstructs beta from a
//! before/after pair, flagging the divergent elements that make entropy
//! DEcreasing processes non-physical in this family.

use crate::entropy::{self, EntropyError};
use crate::qstate::{DensityMatrix, QStateError, PSD_TOL};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// |rho_ij| below this counts as an exact zero when reconstructing beta;
/// separates genuine divergence from floating-point noise.
pub const ZERO_CUTOFF: f64 = 1e-13;

/// Default relative tolerance for the Gramian test.
pub const GRAMIAN_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DecoherenceError {
    #[error("matrix is not Hermitian: max |b - b^dag| = {max_dev:.3e}")]
    NotHermitian { max_dev: f64 },
    #[error("diagonal element {index} is {value} instead of 1")]
    DiagonalNotUnit { index: usize, value: Complex64 },
    #[error("dimension mismatch: beta is {beta_dim}, rho is {rho_dim}")]
    DimensionMismatch { beta_dim: usize, rho_dim: usize },
    #[error("bases of the two density matrices differ")]
    BasisMismatch,
    #[error("Schur product left the PSD cone: smallest eigenvalue {eigenvalue:.3e}")]
    NotPSDResult { eigenvalue: f64 },
    #[error("vector {index} has norm {norm} instead of 1")]
    NotUnitNorm { index: usize, norm: f64 },
    #[error("weights sum to {sum} instead of 1")]
    WeightsNotNormalized { sum: f64 },
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("phase matrix is {rows}x{cols} but there are {weights} weights")]
    PhaseShapeMismatch { rows: usize, cols: usize, weights: usize },
    #[error("beta element ({row},{col}) diverges: rho_before is 0 there, rho_after is not")]
    DivergentElement { row: usize, col: usize },
    #[error(transparent)]
    State(#[from] QStateError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

/// Unit-diagonal Hermitian matrix applied element-wise to a density matrix.
#[derive(Debug, Clone)]
pub struct DecoherenceMatrix {
    mat: DMatrix<Complex64>,
}

impl DecoherenceMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self, DecoherenceError> {
        let n = mat.nrows();
        assert!(mat.is_square(), "decoherence matrix must be square");
        let mut max_dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                max_dev = max_dev.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        if max_dev > 1e-12 {
            return Err(DecoherenceError::NotHermitian { max_dev });
        }
        for i in 0..n {
            if (mat[(i, i)] - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
                return Err(DecoherenceError::DiagonalNotUnit {
                    index: i,
                    value: mat[(i, i)],
                });
            }
        }
        Ok(DecoherenceMatrix { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// All off-diagonal elements equal; handy for dephasing examples.
    pub fn uniform_offdiag(dim: usize, offdiag: Complex64) -> Result<Self, DecoherenceError> {
        let mat = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else if i < j {
                offdiag
            } else {
                offdiag.conj()
            }
        });
        DecoherenceMatrix::new(mat)
    }
}

/// Outcome of the positive-semidefiniteness test.
#[derive(Debug, Clone, Copy)]
pub struct GramianCheck {
    pub holds: bool,
    pub smallest_eigenvalue: f64,
}

/// Tests beta for positive semidefiniteness. `tol` is relative to the
/// largest eigenvalue magnitude.
pub fn is_gramian(beta: &DecoherenceMatrix, tol: f64) -> GramianCheck {
    let eigs = beta.mat.clone().symmetric_eigen().eigenvalues;
    let mut smallest = f64::INFINITY;
    let mut largest_abs: f64 = 0.0;
    for &ev in eigs.iter() {
        smallest = smallest.min(ev);
        largest_abs = largest_abs.max(ev.abs());
    }
    GramianCheck {
        holds: smallest >= -tol * largest_abs.max(1.0),
        smallest_eigenvalue: smallest,
    }
}

/// Gram matrix beta_ij = <v_i|v_j> of unit vectors; PSD by construction.
pub fn gramian_from_vectors(
    vectors: &[DVector<Complex64>],
) -> Result<DecoherenceMatrix, DecoherenceError> {
    for (index, v) in vectors.iter().enumerate() {
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(DecoherenceError::NotUnitNorm { index, norm });
        }
    }
    let n = vectors.len();
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            mat[(i, j)] = vectors[i].dotc(&vectors[j]);
        }
        mat[(i, i)] = Complex64::new(1.0, 0.0);
    }
    DecoherenceMatrix::new(mat)
}

/// Applies the channel rho_ij -> beta_ij rho_ij.
///
/// The diagonal is copied from rho untouched (beta's diagonal is 1 by
/// invariant; copying keeps the classical distribution bit-exact). The
/// result must land back in the PSD cone; if it does not, beta was not a
/// Gramian and the error says so.
pub fn schur_apply(
    beta: &DecoherenceMatrix,
    rho: &DensityMatrix,
) -> Result<DensityMatrix, DecoherenceError> {
    let n = rho.dim();
    if beta.dim() != n {
        return Err(DecoherenceError::DimensionMismatch {
            beta_dim: beta.dim(),
            rho_dim: n,
        });
    }
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            mat[(i, j)] = if i == j {
                rho.matrix()[(i, i)]
            } else {
                beta.mat[(i, j)] * rho.matrix()[(i, j)]
            };
        }
    }
    let out = DensityMatrix::new(rho.basis().to_vec(), mat)?;
    let smallest = out.smallest_eigenvalue();
    if smallest < -PSD_TOL {
        return Err(DecoherenceError::NotPSDResult {
            eigenvalue: smallest,
        });
    }
    Ok(out)
}

/// Random-phase-kick channel: reservoir mode n carries weight
/// |f(q_n)|^2 and imprints phase phi(q_n, s) on system label s.
#[derive(Debug, Clone)]
pub struct PhaseKickSpec {
    weights: Vec<f64>,
    /// phases[(n, s)] in radians; rows = reservoir modes, cols = system labels.
    phases: DMatrix<f64>,
}

impl PhaseKickSpec {
    pub fn new(weights: Vec<f64>, phases: DMatrix<f64>) -> Result<Self, DecoherenceError> {
        for (index, &value) in weights.iter().enumerate() {
            if value < 0.0 {
                return Err(DecoherenceError::NegativeWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(DecoherenceError::WeightsNotNormalized { sum });
        }
        if phases.nrows() != weights.len() {
            return Err(DecoherenceError::PhaseShapeMismatch {
                rows: phases.nrows(),
                cols: phases.ncols(),
                weights: weights.len(),
            });
        }
        Ok(PhaseKickSpec { weights, phases })
    }

    pub fn n_modes(&self) -> usize {
        self.weights.len()
    }

    pub fn n_system(&self) -> usize {
        self.phases.ncols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn phases(&self) -> &DMatrix<f64> {
        &self.phases
    }
}

/// beta(s,s') = sum_n w_n exp(i(phi(n,s) - phi(n,s'))).
///
/// This is the Gram matrix of the vectors F_s with components
/// sqrt(w_n) exp(i phi(n,s)), so it is PSD by construction.
pub fn phase_kick_beta(spec: &PhaseKickSpec) -> DecoherenceMatrix {
    let s_dim = spec.n_system();
    let mut mat = DMatrix::zeros(s_dim, s_dim);
    for s in 0..s_dim {
        for sp in 0..s_dim {
            let mut acc = Complex64::ZERO;
            for n in 0..spec.n_modes() {
                let d = spec.phases[(n, s)] - spec.phases[(n, sp)];
                acc += spec.weights[n] * Complex64::from_polar(1.0, d);
            }
            mat[(s, sp)] = acc;
        }
        mat[(s, s)] = Complex64::new(1.0, 0.0);
    }
    DecoherenceMatrix::new(mat).expect("phase-kick construction is Hermitian with unit diagonal")
}

/// Random density matrix A A^dag / tr(A A^dag), complex standard normal A.
/// PSD and full rank almost surely.
pub fn random_density_matrix(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let a = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(
            rng.sample::<f64, _>(rand_distr::StandardNormal),
            rng.sample::<f64, _>(rand_distr::StandardNormal),
        )
    });
    let m = &a * a.adjoint();
    let tr = m.trace().re;
    DensityMatrix::from_matrix(m / Complex64::new(tr, 0.0))
        .expect("A A^dag / tr is Hermitian with unit trace")
}

/// Gram matrix of `dim` random unit vectors in C^dim.
pub fn random_gramian(dim: usize, rng: &mut impl Rng) -> DecoherenceMatrix {
    let vectors: Vec<DVector<Complex64>> = (0..dim)
        .map(|_| {
            let v = DVector::from_fn(dim, |_, _| {
                Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                )
            });
            let n = v.norm();
            v / Complex64::new(n, 0.0)
        })
        .collect();
    gramian_from_vectors(&vectors).expect("vectors are normalized by construction")
}

/// One randomized monotonicity trial.
#[derive(Debug, Clone, Copy)]
pub struct LemmaTrial {
    pub s_before_bits: f64,
    pub s_after_bits: f64,
}

impl LemmaTrial {
    /// S may not drop by more than numerical slack.
    pub fn holds(&self) -> bool {
        self.s_after_bits >= self.s_before_bits - 1e-9
    }
}

/// Draws a random density matrix and a random Gramian from `seed`, applies
/// the Schur channel, and reports the entropies on both sides. Callers
/// derive per-trial seeds from a master seed (see [`crate::seeding`]).
pub fn lemma_trial(dim: usize, seed: u64) -> Result<LemmaTrial, DecoherenceError> {
    assert!(dim >= 2, "trial needs at least a qubit");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = random_density_matrix(dim, &mut rng);
    let beta = random_gramian(dim, &mut rng);
    let after = schur_apply(&beta, &rho)?;
    Ok(LemmaTrial {
        s_before_bits: entropy::von_neumann(&rho)?.bits,
        s_after_bits: entropy::von_neumann(&after)?.bits,
    })
}

/// Reconstructs beta from a before/after pair by element-wise ratio.
///
/// Elements where rho_before vanishes but rho_after does not have no finite
/// beta; that divergence is reported with the offending indices (row-major
/// first hit). Where both vanish the element is unconstrained and set to 0
/// off the diagonal, 1 on it.
pub fn reversal_beta(
    rho_before: &DensityMatrix,
    rho_after: &DensityMatrix,
) -> Result<DecoherenceMatrix, DecoherenceError> {
    if rho_before.basis() != rho_after.basis() {
        return Err(DecoherenceError::BasisMismatch);
    }
    let n = rho_before.dim();
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let b = rho_before.matrix()[(i, j)];
            let a = rho_after.matrix()[(i, j)];
            if b.norm() < ZERO_CUTOFF {
                if a.norm() >= ZERO_CUTOFF {
                    return Err(DecoherenceError::DivergentElement { row: i, col: j });
                }
                mat[(i, j)] = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::ZERO
                };
            } else {
                mat[(i, j)] = a / b;
            }
        }
    }
    DecoherenceMatrix::new(mat)
}
