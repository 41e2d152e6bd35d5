//! Sparse grand states and reduction to the particle density matrix.
//!
//! A grand state is a superposition over basis labels (site, direction, spin
//! configuration). Spin configurations are stored relative to the all-up
//! product state as the sorted set of flipped spin ids, so the reservoir can
//! be arbitrarily large while only touched spins cost memory. Path counts
//! grow exponentially with time, which rules out dense tensors over the spin
//! space; the sparse map stays proportional to the number of surviving
//! components.
//!
//! Reduction to the particle sector traces over spin configurations:
//! rho_{ab} = sum_s psi(a,s) conj(psi(b,s)).

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Amplitudes below this (relative to unit norm) are dropped after each
/// evolution step. No renormalization is applied afterwards; the norm error
/// stays bounded by the accumulated pruned weight, which callers track.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Default tolerance on | ||psi||^2 - 1 | for states meant to be normalized.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Hermiticity tolerance for density matrices (element-wise).
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;

/// Eigenvalues of a density matrix may undershoot zero by at most this much.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum QStateError {
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("state not normalized: ||psi||^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },
    #[error("basis does not contain occupied label {label:?}")]
    BasisMissingLabel { label: SysLabel },
    #[error("matrix is not Hermitian: max |rho - rho^dag| = {max_dev:.3e}")]
    NotHermitian { max_dev: f64 },
    #[error("trace is {trace:.12} instead of 1")]
    TraceNotOne { trace: f64 },
    #[error("basis length {basis_len} does not match matrix dimension {dim}")]
    DimensionMismatch { basis_len: usize, dim: usize },
}

/// Direction of motion of the particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    Right,
    Left,
}

impl Dir {
    pub fn flipped(self) -> Dir {
        match self {
            Dir::Right => Dir::Left,
            Dir::Left => Dir::Right,
        }
    }
}

/// Reservoir spin configuration: the sorted set of flipped spin ids.
///
/// Ids are opaque u64 values; the walk modules encode scatterer sites (and,
/// in fresh mode, time steps) into them. The empty configuration is the
/// all-up reference state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Spins(Vec<u64>);

impl Spins {
    pub fn empty() -> Self {
        Spins(Vec::new())
    }

    /// Configuration with exactly the given ids flipped.
    pub fn from_ids<I: IntoIterator<Item = u64>>(ids: I) -> Self {
        let set: BTreeSet<u64> = ids.into_iter().collect();
        Spins(set.into_iter().collect())
    }

    /// Flip state of one spin id.
    pub fn toggled(&self, id: u64) -> Spins {
        match self.0.binary_search(&id) {
            Ok(pos) => {
                let mut v = self.0.clone();
                v.remove(pos);
                Spins(v)
            }
            Err(pos) => {
                let mut v = self.0.clone();
                v.insert(pos, id);
                Spins(v)
            }
        }
    }

    pub fn is_flipped(&self, id: u64) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    /// Flip every spin of `universe`: ids in the universe leave the
    /// configuration if present and enter it if absent. Ids outside the
    /// universe are untouched.
    pub fn complement_within(&self, universe: &[u64]) -> Spins {
        let mut out = self.clone();
        for &id in universe {
            out = out.toggled(id);
        }
        out
    }

    pub fn flipped_count(&self) -> usize {
        self.0.len()
    }

    pub fn ids(&self) -> &[u64] {
        &self.0
    }
}

/// Full basis label of the grand system.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisLabel {
    pub site: i64,
    pub dir: Dir,
    pub spins: Spins,
}

impl BasisLabel {
    pub fn new(site: i64, dir: Dir, spins: Spins) -> Self {
        BasisLabel { site, dir, spins }
    }

    pub fn sys(&self) -> SysLabel {
        SysLabel {
            site: self.site,
            dir: self.dir,
        }
    }
}

/// Particle-sector label: what survives the trace over spins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SysLabel {
    pub site: i64,
    pub dir: Dir,
}

/// Sparse grand state. Keys are unique; ordering is fixed by the label Ord
/// so that every iteration over terms is deterministic.
#[derive(Debug, Clone)]
pub struct GrandState {
    terms: BTreeMap<BasisLabel, Complex64>,
    norm_tolerance: f64,
    pruned_weight: f64,
}

impl GrandState {
    /// Single-term state with amplitude 1.
    pub fn single(label: BasisLabel) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(label, Complex64::new(1.0, 0.0));
        GrandState {
            terms,
            norm_tolerance: NORM_TOLERANCE,
            pruned_weight: 0.0,
        }
    }

    /// Builds a state from (label, amplitude) pairs; duplicate labels merge
    /// by amplitude addition. No normalization requirement is imposed here;
    /// operations with a normalization precondition check it themselves.
    pub fn from_terms<I: IntoIterator<Item = (BasisLabel, Complex64)>>(pairs: I) -> Self {
        let mut terms: BTreeMap<BasisLabel, Complex64> = BTreeMap::new();
        for (label, amp) in pairs {
            *terms.entry(label).or_insert(Complex64::ZERO) += amp;
        }
        GrandState {
            terms,
            norm_tolerance: NORM_TOLERANCE,
            pruned_weight: 0.0,
        }
    }

    /// Cumulative squared weight removed by pruning along this state's
    /// history. Purely informational; bounds the norm deficit.
    pub fn pruned_weight(&self) -> f64 {
        self.pruned_weight
    }

    /// Carries an accumulated pruning total onto this state (evolution code
    /// threads the parent's total through each step).
    pub fn with_pruned_weight(mut self, weight: f64) -> Self {
        self.pruned_weight = weight;
        self
    }

    pub fn terms(&self) -> &BTreeMap<BasisLabel, Complex64> {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sq() - 1.0).abs() <= self.norm_tolerance
    }

    /// Rescales to unit norm, preserving relative phases.
    pub fn normalize(&self) -> Result<GrandState, QStateError> {
        let n2 = self.norm_sq();
        if n2 <= 0.0 {
            return Err(QStateError::ZeroNorm);
        }
        let scale = 1.0 / n2.sqrt();
        Ok(GrandState {
            terms: self
                .terms
                .iter()
                .map(|(l, a)| (l.clone(), a * scale))
                .collect(),
            norm_tolerance: self.norm_tolerance,
            pruned_weight: self.pruned_weight,
        })
    }

    /// Drops terms with |amplitude| below `threshold` and reports the total
    /// squared weight removed. The survivors are NOT renormalized.
    pub fn pruned(&self, threshold: f64) -> (GrandState, f64) {
        let mut dropped = 0.0;
        let mut terms = BTreeMap::new();
        for (l, a) in &self.terms {
            if a.norm() < threshold {
                dropped += a.norm_sqr();
            } else {
                terms.insert(l.clone(), *a);
            }
        }
        (
            GrandState {
                terms,
                norm_tolerance: self.norm_tolerance,
                pruned_weight: self.pruned_weight + dropped,
            },
            dropped,
        )
    }

    /// Occupied particle-sector labels, sorted.
    pub fn occupied_sys_labels(&self) -> Vec<SysLabel> {
        let set: BTreeSet<SysLabel> = self.terms.keys().map(BasisLabel::sys).collect();
        set.into_iter().collect()
    }

    /// Reduced density matrix over the occupied particle labels.
    pub fn partial_trace(&self) -> Result<DensityMatrix, QStateError> {
        let basis = self.occupied_sys_labels();
        self.partial_trace_on(&basis)
    }

    /// Reduced density matrix on an explicit (possibly padded) basis. Every
    /// occupied label must appear in `basis`.
    pub fn partial_trace_on(&self, basis: &[SysLabel]) -> Result<DensityMatrix, QStateError> {
        let n2 = self.norm_sq();
        if (n2 - 1.0).abs() > self.norm_tolerance {
            return Err(QStateError::NotNormalized { norm_sq: n2 });
        }
        let index: BTreeMap<SysLabel, usize> =
            basis.iter().enumerate().map(|(i, &l)| (l, i)).collect();

        // Group amplitudes by spin configuration; different configurations
        // are orthogonal and cannot interfere in the reduced matrix.
        let mut by_spins: BTreeMap<&Spins, Vec<(usize, Complex64)>> = BTreeMap::new();
        for (label, amp) in &self.terms {
            let idx = *index
                .get(&label.sys())
                .ok_or(QStateError::BasisMissingLabel { label: label.sys() })?;
            by_spins.entry(&label.spins).or_default().push((idx, *amp));
        }

        let n = basis.len();
        let mut mat = DMatrix::<Complex64>::zeros(n, n);
        for entries in by_spins.values() {
            for &(a, amp_a) in entries {
                for &(b, amp_b) in entries {
                    mat[(a, b)] += amp_a * amp_b.conj();
                }
            }
        }
        DensityMatrix::new(basis.to_vec(), mat)
    }

    /// Overlap probability |<a|b>|^2. Both states must be normalized.
    pub fn fidelity(a: &GrandState, b: &GrandState) -> Result<f64, QStateError> {
        for s in [a, b] {
            let n2 = s.norm_sq();
            if (n2 - 1.0).abs() > s.norm_tolerance {
                return Err(QStateError::NotNormalized { norm_sq: n2 });
            }
        }
        let mut overlap = Complex64::ZERO;
        for (label, amp_a) in &a.terms {
            if let Some(amp_b) = b.terms.get(label) {
                overlap += amp_a.conj() * amp_b;
            }
        }
        Ok(overlap.norm_sqr().min(1.0))
    }
}

/// Reduced density matrix of the particle sector, with its basis labels.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    basis: Vec<SysLabel>,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace. Positivity is checked where an
    /// eigendecomposition is computed anyway (entropy, Gramian tests) so
    /// construction stays O(n^2).
    pub fn new(basis: Vec<SysLabel>, mat: DMatrix<Complex64>) -> Result<Self, QStateError> {
        if basis.len() != mat.nrows() || !mat.is_square() {
            return Err(QStateError::DimensionMismatch {
                basis_len: basis.len(),
                dim: mat.nrows(),
            });
        }
        let mut max_dev: f64 = 0.0;
        for i in 0..mat.nrows() {
            for j in i..mat.ncols() {
                max_dev = max_dev.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
            }
        }
        if max_dev > HERMITICITY_TOL {
            return Err(QStateError::NotHermitian { max_dev });
        }
        let trace = mat.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(QStateError::TraceNotOne { trace });
        }
        Ok(DensityMatrix { basis, mat })
    }

    /// Anonymous basis (labels 0..n on the right-moving branch); convenient
    /// for channel-level code that never looks at labels.
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Result<Self, QStateError> {
        let basis = (0..mat.nrows())
            .map(|i| SysLabel {
                site: i as i64,
                dir: Dir::Right,
            })
            .collect();
        DensityMatrix::new(basis, mat)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn basis(&self) -> &[SysLabel] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Diagonal as a real probability vector.
    pub fn diagonal_probs(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    /// Real eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .mat
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Smallest eigenvalue; the PSD invariant requires it >= -PSD_TOL.
    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Max element-wise distance to another matrix on the same basis.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.basis, other.basis, "bases must match");
        (&self.mat - &other.mat)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn label(site: i64, dir: Dir, ids: &[u64]) -> BasisLabel {
        BasisLabel::new(site, dir, Spins::from_ids(ids.iter().copied()))
    }

    #[test]
    fn normalize_rescales_single_term() {
        let s = GrandState::from_terms([(label(0, Dir::Right, &[]), c(2.0, 0.0))]);
        let n = s.normalize().unwrap();
        let amp = n.terms()[&label(0, Dir::Right, &[])];
        assert!((amp - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn normalize_symmetric_pair() {
        let s = GrandState::from_terms([
            (label(0, Dir::Right, &[]), c(1.0, 0.0)),
            (label(1, Dir::Right, &[]), c(1.0, 0.0)),
        ]);
        let n = s.normalize().unwrap();
        for amp in n.terms().values() {
            assert!((amp.norm() - 1.0 / 2.0_f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_rejects_zero_norm() {
        let s = GrandState::from_terms([
            (label(0, Dir::Right, &[]), c(0.0, 0.0)),
            (label(1, Dir::Left, &[]), c(0.0, 0.0)),
        ]);
        assert!(matches!(s.normalize(), Err(QStateError::ZeroNorm)));
    }

    #[test]
    fn duplicate_labels_merge_by_addition() {
        let s = GrandState::from_terms([
            (label(0, Dir::Right, &[1]), c(0.5, 0.0)),
            (label(0, Dir::Right, &[1]), c(0.0, 0.5)),
        ]);
        assert_eq!(s.term_count(), 1);
        assert!((s.terms()[&label(0, Dir::Right, &[1])] - c(0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_of_product_state_is_pure() {
        let s = GrandState::single(label(0, Dir::Right, &[]));
        let rho = s.partial_trace().unwrap();
        assert_eq!(rho.dim(), 1);
        assert!((rho.matrix()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_spins_kill_off_diagonals() {
        let t = c(1.0 / 2.0_f64.sqrt(), 0.0);
        let r = c(0.0, 1.0 / 2.0_f64.sqrt());
        let s = GrandState::from_terms([
            (label(1, Dir::Right, &[1]), t),
            (label(0, Dir::Left, &[]), r),
        ]);
        let rho = s.partial_trace().unwrap();
        assert_eq!(rho.dim(), 2);
        for i in 0..2 {
            assert!((rho.matrix()[(i, i)].re - 0.5).abs() < 1e-12);
        }
        let (a, b) = (0, 1);
        assert!(rho.matrix()[(a, b)].norm() < 1e-15, "distinct spin configs must not interfere");
    }

    #[test]
    fn shared_spin_state_keeps_coherence() {
        // Same spin configuration on both branches: rho = |v><v| with
        // v = (t, r); off-diagonal t r*, eigenvalues {1, 0}.
        let t = c(1.0 / 2.0_f64.sqrt(), 0.0);
        let r = c(0.0, 1.0 / 2.0_f64.sqrt());
        let s = GrandState::from_terms([
            (label(1, Dir::Right, &[]), t),
            (label(0, Dir::Left, &[]), r),
        ]);
        let rho = s.partial_trace().unwrap();
        // Basis order is (0,Right) < (0,Left)? No: ordering is by site then dir.
        let basis = rho.basis().to_vec();
        let i_t = basis
            .iter()
            .position(|l| *l == SysLabel { site: 1, dir: Dir::Right })
            .unwrap();
        let i_r = basis
            .iter()
            .position(|l| *l == SysLabel { site: 0, dir: Dir::Left })
            .unwrap();
        let off = rho.matrix()[(i_t, i_r)];
        assert!((off - t * r.conj()).norm() < 1e-15);
        let ev = rho.eigenvalues();
        assert!(ev[0].abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let x = GrandState::single(label(0, Dir::Right, &[]));
        assert!((GrandState::fidelity(&x, &x).unwrap() - 1.0).abs() < 1e-15);

        let y = GrandState::single(label(0, Dir::Left, &[]));
        assert_eq!(GrandState::fidelity(&x, &y).unwrap(), 0.0);

        let h = GrandState::from_terms([
            (label(0, Dir::Right, &[]), c(1.0 / 2.0_f64.sqrt(), 0.0)),
            (label(1, Dir::Right, &[]), c(1.0 / 2.0_f64.sqrt(), 0.0)),
        ]);
        assert!((GrandState::fidelity(&x, &h).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn prune_drops_tiny_terms_without_renormalizing() {
        let s = GrandState::from_terms([
            (label(0, Dir::Right, &[]), c(1.0, 0.0)),
            (label(1, Dir::Right, &[]), c(1e-16, 0.0)),
        ]);
        let (p, dropped) = s.pruned(PRUNE_THRESHOLD);
        assert_eq!(p.term_count(), 1);
        assert!((dropped - 1e-32).abs() < 1e-40);
        assert!((p.norm_sq() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spins_toggle_and_complement() {
        let s = Spins::from_ids([2, 5]);
        assert!(s.is_flipped(5));
        let t = s.toggled(5);
        assert!(!t.is_flipped(5));
        let u = s.complement_within(&[1, 2, 5, 9]);
        assert_eq!(u, Spins::from_ids([1, 9]));
    }

    // Random normalized states over a small label alphabet.
    fn arb_state() -> impl Strategy<Value = GrandState> {
        let term = (
            -2i64..3,
            prop::bool::ANY,
            prop::collection::btree_set(1u64..4, 0..3),
            -1.0f64..1.0,
            -1.0f64..1.0,
        );
        prop::collection::vec(term, 1..6).prop_filter_map("zero norm", |terms| {
            let s = GrandState::from_terms(terms.into_iter().map(|(site, right, ids, re, im)| {
                let dir = if right { Dir::Right } else { Dir::Left };
                (
                    BasisLabel::new(site, dir, Spins::from_ids(ids)),
                    Complex64::new(re, im),
                )
            }));
            if s.norm_sq() > 1e-6 {
                Some(s.normalize().unwrap())
            } else {
                None
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn partial_trace_is_hermitian_psd_trace_one(s in arb_state()) {
            let rho = s.partial_trace().unwrap();
            prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-10);
            prop_assert!(rho.smallest_eigenvalue() >= -PSD_TOL);
        }

        #[test]
        fn product_state_reduces_to_projector(s in arb_state()) {
            // Force a single shared spin configuration.
            let spins = Spins::from_ids([7]);
            let prod = GrandState::from_terms(
                s.terms().iter().map(|(l, a)| {
                    (BasisLabel::new(l.site, l.dir, spins.clone()), *a)
                }),
            );
            let prod = prod.normalize().unwrap();
            let rho = prod.partial_trace().unwrap();
            let m = rho.matrix();
            let diff = (m * m - m).iter().map(|v| v.norm()).fold(0.0, f64::max);
            prop_assert!(diff < 1e-10, "rho^2 != rho, max dev {diff}");
        }

        #[test]
        fn fidelity_symmetric_and_phase_invariant(a in arb_state(), b in arb_state()) {
            let f_ab = GrandState::fidelity(&a, &b).unwrap();
            let f_ba = GrandState::fidelity(&b, &a).unwrap();
            prop_assert!((f_ab - f_ba).abs() < 1e-12);

            let phase = Complex64::from_polar(1.0, 0.83);
            let a_rot = GrandState::from_terms(
                a.terms().iter().map(|(l, amp)| (l.clone(), amp * phase)),
            );
            let f_rot = GrandState::fidelity(&a_rot, &b).unwrap();
            prop_assert!((f_ab - f_rot).abs() < 1e-12);
        }
    }
}
