//! Entropy production and time reversal in discrete scatterer-reservoir models.
//!
//! The crate simulates a quantum particle that scatters off a 1D array of
//! barriers while entangling with reservoir degrees of freedom (spins, photon
//! modes), and tracks the von Neumann entropy of the reduced particle state.
//! The pieces:
//!
//! * [`qstate`]: sparse grand states (particle ⊗ spin reservoir), reduction to
//!   the particle density matrix, fidelities.
//! * [`entropy`]: von Neumann / Shannon entropies from Hermitian
//!   eigendecomposition.
//! * [`decoherence`]: unit-diagonal decoherence matrices applied by Schur
//!   (element-wise) product, Gramian checks, phase-kick channel synthesis,
//!   and randomized monotonicity trials.
//! * [`walk1d`]: the discrete-time scatterer-spin walk with fresh or
//!   persistent reservoirs, complete and incomplete time reversal, entropy
//!   drop detection, and a half-space emission scenario.
//! * [`disorder`]: randomized scattering amplitudes and continuous-time
//!   random scatterer positions, with trajectory / component censuses and
//!   growth-law fits.
//! * [`brems`]: photon-emission dephasing kernel applied to coordinate-space
//!   density matrices.
//! * [`mirrors`]: wave-packet refocusing by piecewise phase conjugation on a
//!   planned mirror array, with cost-accuracy scaling.
//! * [`cli`]: seeded, reproducible command-line runs emitting CSV or JSON.

pub mod brems;
pub mod cli;
pub mod decoherence;
pub mod disorder;
pub mod entropy;
pub mod mirrors;
pub mod qstate;
pub mod seeding;
pub mod walk1d;
