//! Radiative decoherence of a free charge: each scattering event multiplies
//! the coordinate-space density matrix by e^{-Phi(x-x')}, where Phi collects
//! the soft-photon emission spectrum up to a cutoff.
//!
//! In units of v_F/Omega the kernel depends on a single prefactor,
//!
//! ```text
//! Phi(u) = pref [Cin(|u|) - i sign(u) Si(|u|)],   pref = (8 alpha0 / 3 pi)(v/c)^2,
//! ```
//!
//! with Cin the entire cosine integral and Si the sine integral. Re Phi >= 0
//! and Phi(0) = 0, so the element-wise factor e^{-Phi} has unit diagonal and
//! magnitude <= 1: diagonal populations survive untouched while coherences
//! decay, and (the factor being a Gramian) entropy can only grow.

use crate::decoherence::{schur_apply, DecoherenceError, DecoherenceMatrix};
use crate::entropy::{self, EntropyError};
use crate::qstate::{DensityMatrix, QStateError};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BremsError {
    #[error("fine structure constant must be nonnegative, got {value}")]
    InvalidAlpha { value: f64 },
    #[error("velocity ratio must lie in [0, 1), got {value}")]
    InvalidVelocityRatio { value: f64 },
    #[error("frequency cutoff must be positive, got {value}")]
    InvalidCutoff { value: f64 },
    #[error("Fermi velocity must be positive, got {value}")]
    InvalidFermiVelocity { value: f64 },
    #[error("grid step must be positive, got {value}")]
    InvalidGridStep { value: f64 },
    #[error("grid needs at least 2 points, got {n}")]
    GridTooSmall { n: usize },
    #[error(transparent)]
    Decoherence(#[from] DecoherenceError),
    #[error(transparent)]
    State(#[from] QStateError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

/// Emission-kernel parameters. The prefactor carries v/c, the phase carries
/// v_F; the two velocities are independent knobs. A zero velocity ratio is
/// allowed and makes the kernel transparent.
#[derive(Debug, Clone, Copy)]
pub struct BremsParams {
    pub alpha0: f64,
    pub v_over_c: f64,
    pub omega_cutoff: f64,
    pub v_fermi: f64,
}

impl BremsParams {
    pub const DEFAULT_ALPHA0: f64 = 1.0 / 137.036;

    pub fn new(
        alpha0: f64,
        v_over_c: f64,
        omega_cutoff: f64,
        v_fermi: f64,
    ) -> Result<Self, BremsError> {
        if !(alpha0 >= 0.0) {
            return Err(BremsError::InvalidAlpha { value: alpha0 });
        }
        if !(0.0..1.0).contains(&v_over_c) {
            return Err(BremsError::InvalidVelocityRatio { value: v_over_c });
        }
        if !(omega_cutoff > 0.0) {
            return Err(BremsError::InvalidCutoff {
                value: omega_cutoff,
            });
        }
        if !(v_fermi > 0.0) {
            return Err(BremsError::InvalidFermiVelocity { value: v_fermi });
        }
        Ok(BremsParams {
            alpha0,
            v_over_c,
            omega_cutoff,
            v_fermi,
        })
    }

    /// Dimensionless working point: Omega = v_F = 1 and alpha0 chosen so
    /// the prefactor equals `pref` exactly.
    pub fn with_prefactor(pref: f64) -> Result<Self, BremsError> {
        BremsParams::new(1.5 * PI * pref, 0.5, 1.0, 1.0)
    }

    pub fn prefactor(&self) -> f64 {
        8.0 * self.alpha0 / (3.0 * PI) * self.v_over_c * self.v_over_c
    }
}

/// 16-point Gauss-Legendre abscissas (positive half) and weights.
const GL_X: [f64; 8] = [
    0.0950125098376374,
    0.2816035507792589,
    0.4580167776572274,
    0.6178762444026438,
    0.7554044083550030,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL_W: [f64; 8] = [
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

/// Composite 16-point Gauss-Legendre on [0, b], panels at most 2.0 wide.
fn gl_integrate(f: impl Fn(f64) -> f64, b: f64) -> f64 {
    let n_panels = (b / 2.0).ceil().max(1.0) as usize;
    let h = b / n_panels as f64;
    let mut total = 0.0;
    for p in 0..n_panels {
        let mid = (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        for k in 0..8 {
            total += half * GL_W[k] * (f(mid + half * GL_X[k]) + f(mid - half * GL_X[k]));
        }
    }
    total
}

/// Entire cosine integral Cin(u) = int_0^u (1 - cos t)/t dt, u >= 0.
/// The integrand is written through sin(t/2) so small t stays exact.
fn cin(u: f64) -> f64 {
    gl_integrate(
        |t| {
            let s = (0.5 * t).sin();
            2.0 * s * s / t
        },
        u,
    )
}

/// Sine integral Si(u) = int_0^u sin(t)/t dt, u >= 0.
fn si(u: f64) -> f64 {
    gl_integrate(|t| t.sin() / t, u)
}

/// Decoherence exponent Phi(x). Re Phi >= 0; Phi(0) = 0; Phi(-x) is the
/// conjugate of Phi(x).
pub fn kernel_phi(x: f64, params: &BremsParams) -> Complex64 {
    let u = params.omega_cutoff * x.abs() / params.v_fermi;
    if u == 0.0 {
        return Complex64::ZERO;
    }
    let pref = params.prefactor();
    Complex64::new(pref * cin(u), -x.signum() * pref * si(u))
}

/// Coordinate-space density matrix on a uniform grid x_j = x0 + j dx, the
/// grid measure absorbed so the plain matrix trace is 1.
#[derive(Debug, Clone)]
pub struct GridDensityMatrix {
    x0: f64,
    dx: f64,
    mat: DMatrix<Complex64>,
}

impl GridDensityMatrix {
    pub fn new(x0: f64, dx: f64, mat: DMatrix<Complex64>) -> Result<Self, BremsError> {
        if !(dx > 0.0) {
            return Err(BremsError::InvalidGridStep { value: dx });
        }
        if mat.nrows() < 2 {
            return Err(BremsError::GridTooSmall { n: mat.nrows() });
        }
        // Hermiticity and trace validation.
        DensityMatrix::from_matrix(mat.clone())?;
        Ok(GridDensityMatrix { x0, dx, mat })
    }

    /// Pure Gaussian packet of spatial width sigma and mean momentum k0 on
    /// an n-point grid centered at the origin.
    pub fn gaussian(n: usize, dx: f64, sigma: f64, k0: f64) -> Result<Self, BremsError> {
        if !(dx > 0.0) {
            return Err(BremsError::InvalidGridStep { value: dx });
        }
        if n < 2 {
            return Err(BremsError::GridTooSmall { n });
        }
        let x0 = -((n / 2) as f64) * dx;
        let mut psi: Vec<Complex64> = (0..n)
            .map(|j| {
                let x = x0 + j as f64 * dx;
                Complex64::from_polar((-x * x / (4.0 * sigma * sigma)).exp(), k0 * x)
            })
            .collect();
        let norm = (psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx).sqrt();
        for a in &mut psi {
            *a /= norm;
        }
        let mat = DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() * dx);
        Ok(GridDensityMatrix { x0, dx, mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_grid(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.x0 + j as f64 * self.dx).collect()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn diagonal_probs(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.mat[(j, j)].re).collect()
    }

    pub fn entropy_bits(&self) -> Result<f64, BremsError> {
        let rho = DensityMatrix::from_matrix(self.mat.clone())?;
        Ok(entropy::von_neumann(&rho)?.bits)
    }
}

/// The grid decoherence factor beta[i,j] = e^{-Phi(x_i - x_j)}. Toeplitz:
/// only n distinct separations are evaluated.
pub fn brems_beta_grid(
    n: usize,
    dx: f64,
    params: &BremsParams,
) -> Result<DecoherenceMatrix, BremsError> {
    if !(dx > 0.0) {
        return Err(BremsError::InvalidGridStep { value: dx });
    }
    if n < 2 {
        return Err(BremsError::GridTooSmall { n });
    }
    let row: Vec<Complex64> = (0..n)
        .map(|k| (-kernel_phi(k as f64 * dx, params)).exp())
        .collect();
    let mat = DMatrix::from_fn(n, n, |i, j| {
        if i >= j {
            row[i - j]
        } else {
            row[j - i].conj()
        }
    });
    Ok(DecoherenceMatrix::new(mat)?)
}

/// One emission event: element-wise product with the grid kernel. The
/// diagonal is carried over exactly; the result is verified PSD.
pub fn apply_brems(
    rho: &GridDensityMatrix,
    params: &BremsParams,
) -> Result<GridDensityMatrix, BremsError> {
    let beta = brems_beta_grid(rho.dim(), rho.dx, params)?;
    let dressed = schur_apply(&beta, &DensityMatrix::from_matrix(rho.mat.clone())?)?;
    Ok(GridDensityMatrix {
        x0: rho.x0,
        dx: rho.dx,
        mat: dressed.matrix().clone(),
    })
}

/// Entropy (bits) across `iterations` repeated emission events; index 0 is
/// the untouched state.
pub fn iterated_entropies(
    rho: &GridDensityMatrix,
    params: &BremsParams,
    iterations: usize,
) -> Result<Vec<f64>, BremsError> {
    let beta = brems_beta_grid(rho.dim(), rho.dx, params)?;
    let mut out = Vec::with_capacity(iterations + 1);
    let mut current = DensityMatrix::from_matrix(rho.mat.clone())?;
    out.push(entropy::von_neumann(&current)?.bits);
    for _ in 0..iterations {
        current = schur_apply(&beta, &current)?;
        out.push(entropy::von_neumann(&current)?.bits);
    }
    Ok(out)
}

/// Momentum-representation diagonal: conjugation by the unitary DFT,
/// clamped at zero and normalized to a probability vector. Index k holds
/// wavenumber 2 pi k / (n dx), aliased the usual DFT way.
pub fn momentum_diagonal(rho: &GridDensityMatrix) -> Vec<f64> {
    let n = rho.dim();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let scale = 1.0 / (n as f64).sqrt();

    // A = F rho: forward transform down each column.
    let mut a = rho.mat.clone();
    for j in 0..n {
        let mut col: Vec<Complex64> = a.column(j).iter().copied().collect();
        fwd.process(&mut col);
        for (i, v) in col.into_iter().enumerate() {
            a[(i, j)] = v * scale;
        }
    }
    // B = A F^dag: inverse transform along each row.
    let mut diag = vec![0.0; n];
    let mut row = vec![Complex64::ZERO; n];
    for i in 0..n {
        for j in 0..n {
            row[j] = a[(i, j)];
        }
        inv.process(&mut row);
        diag[i] = (row[i] * scale).re.max(0.0);
    }
    let total: f64 = diag.iter().sum();
    for p in &mut diag {
        *p /= total;
    }
    diag
}
