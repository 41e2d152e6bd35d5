//! Discrete-time walk of a particle through a 1D array of spin-carrying
//! scatterers.
//!
//! Geometry: cell i is the segment between scatterers i and i+1; the
//! particle traverses exactly one cell per unit time (linear dispersion, no
//! packet spreading), so a right mover in cell i meets scatterer i+1 during
//! the next step and a left mover meets scatterer i. Each scatterer is a
//! unitary 2x2 scattering matrix
//!
//! ```text
//! r_LL = i sqrt(1-T) e^{i chi_LL}      t = sqrt(T) e^{i chi_LR}
//! r_RR = i sqrt(1-T) e^{i(2 chi_LR - chi_LL)}
//! ```
//!
//! (r_RR is the unitarity completion; its free phase is unobservable in the
//! entropy, which a property test pins down). A transmitted particle rotates
//! the scatterer's spin by `flip_angle` about x,
//!
//! ```text
//! W(a) = e^{i a/2} exp(-i (a/2) sigma_x),    W(pi) = sigma_x,
//! ```
//!
//! applied as W on left-to-right crossings and W^dag on right-to-left ones;
//! reflection leaves spins alone. With the default full flip both directions
//! act as the NOT gate, entanglement grows with every new spin touched, and
//! revisits of already-entangled spins are what permit local entropy drops.
//!
//! Backward evolution is the exact operator adjoint of the forward step;
//! time reversal comes in two flavors, basis-only (`reverse_incomplete`) and
//! basis plus amplitude conjugation (`reverse_complete`). Only the latter
//! rewinds the dynamics.

use crate::entropy::{self, EntropyError};
use crate::qstate::{BasisLabel, Dir, GrandState, QStateError, Spins, PRUNE_THRESHOLD};
use crate::seeding::zigzag;
use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

/// Default cap on stored terms; persistent mode is worst-case exponential in
/// time, and the cap turns memory exhaustion into a reported limit.
pub const TERM_CAP: usize = 5_000_000;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("transparency {value} outside [0, 1]")]
    InvalidTransparency { value: f64 },
    #[error("transparency {value} outside the open interval (0, 1)")]
    TransparencyNotInterior { value: f64 },
    #[error("scattering matrix deviates from unitarity by {dev:.3e}")]
    NonUnitaryScattering { dev: f64 },
    #[error("scatterer position {position} is not an integer lattice site")]
    NonIntegerPosition { position: f64 },
    #[error("two scatterers share site {site}")]
    DuplicateSite { site: i64 },
    #[error("fresh-spin mode requires has_spin at every reachable scatterer; site {site} has none")]
    FreshModeNeedsSpins { site: i64 },
    #[error("fresh-spin mode supports single-term initial states only")]
    FreshModeNeedsSimpleInitial,
    #[error("initial state is not normalized")]
    InitialNotNormalized,
    #[error("time reversal needs persistent spins")]
    ReversalNeedsPersistentSpins,
    #[error("state grew past the term cap: {terms} terms (cap {cap})")]
    TooManyTerms { terms: usize, cap: usize },
    #[error("state explosion at step {reached_tau}; partial series retained")]
    StateExplosion {
        reached_tau: i64,
        partial: EntropySeries,
    },
    #[error(transparent)]
    State(#[from] QStateError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

/// One scatterer: transparency, the two free scattering phases, and its spin.
#[derive(Debug, Clone)]
pub struct ScattererSpec {
    pub position: f64,
    pub transparency: f64,
    pub phase_ll: f64,
    pub phase_lr: f64,
    pub has_spin: bool,
    pub flip_angle: f64,
}

impl ScattererSpec {
    pub fn new(
        position: f64,
        transparency: f64,
        phase_ll: f64,
        phase_lr: f64,
    ) -> Result<Self, WalkError> {
        if !(0.0..=1.0).contains(&transparency) || !transparency.is_finite() {
            return Err(WalkError::InvalidTransparency {
                value: transparency,
            });
        }
        let spec = ScattererSpec {
            position,
            transparency,
            phase_ll,
            phase_lr,
            has_spin: true,
            flip_angle: std::f64::consts::PI,
        };
        let s = build_scattering_matrix(&spec);
        let dev = (s.adjoint() * s - Matrix2::identity())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if dev > 1e-12 {
            return Err(WalkError::NonUnitaryScattering { dev });
        }
        Ok(spec)
    }

    pub fn without_spin(mut self) -> Self {
        self.has_spin = false;
        self
    }

    pub fn with_flip_angle(mut self, flip_angle: f64) -> Self {
        self.flip_angle = flip_angle;
        self
    }

    fn amps(&self) -> ScatterAmps {
        let t = Complex64::from_polar(self.transparency.sqrt(), self.phase_lr);
        let r_mag = (1.0 - self.transparency).sqrt();
        let r_ll = Complex64::i() * Complex64::from_polar(r_mag, self.phase_ll);
        let r_rr = Complex64::i() * Complex64::from_polar(r_mag, 2.0 * self.phase_lr - self.phase_ll);
        ScatterAmps { t, r_ll, r_rr }
    }

    /// Branch amplitudes (keep, flip) of the transmission spin kick; the
    /// adjoint variant serves right-to-left crossings and backward steps.
    fn spin_kick(&self, adjoint: bool) -> (Complex64, Complex64) {
        if !self.has_spin {
            return (Complex64::new(1.0, 0.0), Complex64::ZERO);
        }
        let theta = 0.5 * self.flip_angle;
        let sign = if adjoint { -1.0 } else { 1.0 };
        let phase = Complex64::from_polar(1.0, sign * theta);
        let keep = phase * theta.cos();
        let flip = phase * theta.sin() * Complex64::new(0.0, -sign);
        (keep, flip)
    }
}

struct ScatterAmps {
    t: Complex64,
    r_ll: Complex64,
    r_rr: Complex64,
}

/// The 2x2 scattering matrix, columns indexed by incidence side (from the
/// left, from the right), rows by outgoing side.
pub fn build_scattering_matrix(spec: &ScattererSpec) -> Matrix2<Complex64> {
    let a = spec.amps();
    Matrix2::new(a.r_ll, a.t, a.t, a.r_rr)
}

/// Reservoir handling across steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinMode {
    /// Every step presents a brand-new spin register at each scatterer; the
    /// particle never meets the same reservoir degree of freedom twice.
    FreshEachStep,
    /// Spins stay in place and can be revisited.
    Persistent,
}

/// A full walk setup: scatterer array, reservoir mode, initial state,
/// number of steps.
#[derive(Debug, Clone)]
pub struct WalkScenario {
    scatterers: BTreeMap<i64, ScattererSpec>,
    pub spin_mode: SpinMode,
    pub initial: GrandState,
    pub horizon: usize,
    pub term_cap: usize,
}

impl WalkScenario {
    /// Particle in cell 0 moving right, all spins up.
    pub fn default_initial() -> GrandState {
        GrandState::single(BasisLabel::new(0, Dir::Right, Spins::empty()))
    }

    pub fn new(
        scatterers: Vec<ScattererSpec>,
        spin_mode: SpinMode,
        initial: GrandState,
        horizon: usize,
    ) -> Result<Self, WalkError> {
        let mut map = BTreeMap::new();
        for spec in scatterers {
            let site = spec.position.round();
            if (spec.position - site).abs() > 1e-9 {
                return Err(WalkError::NonIntegerPosition {
                    position: spec.position,
                });
            }
            let site = site as i64;
            if map.insert(site, spec).is_some() {
                return Err(WalkError::DuplicateSite { site });
            }
        }
        if !initial.is_normalized() {
            return Err(WalkError::InitialNotNormalized);
        }
        if spin_mode == SpinMode::FreshEachStep {
            if initial.term_count() != 1 {
                return Err(WalkError::FreshModeNeedsSimpleInitial);
            }
            let cells: Vec<i64> = initial.terms().keys().map(|l| l.site).collect();
            let lo = cells.iter().min().unwrap() - horizon as i64;
            let hi = cells.iter().max().unwrap() + 1 + horizon as i64;
            for (&site, spec) in &map {
                if site >= lo && site <= hi && !spec.has_spin {
                    return Err(WalkError::FreshModeNeedsSpins { site });
                }
            }
        }
        Ok(WalkScenario {
            scatterers: map,
            spin_mode,
            initial,
            horizon,
            term_cap: TERM_CAP,
        })
    }

    /// Identical scatterers on every site the walk can reach within the
    /// horizon, default initial state.
    pub fn regular(
        template: &ScattererSpec,
        spin_mode: SpinMode,
        horizon: usize,
    ) -> Result<Self, WalkError> {
        let w = horizon as i64 + 1;
        let scatterers = (-w..=w)
            .map(|site| ScattererSpec {
                position: site as f64,
                ..template.clone()
            })
            .collect();
        WalkScenario::new(scatterers, spin_mode, Self::default_initial(), horizon)
    }

    pub fn with_initial(mut self, initial: GrandState) -> Result<Self, WalkError> {
        if !initial.is_normalized() {
            return Err(WalkError::InitialNotNormalized);
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn with_term_cap(mut self, cap: usize) -> Self {
        self.term_cap = cap;
        self
    }

    pub fn scatterer_at(&self, site: i64) -> Option<&ScattererSpec> {
        self.scatterers.get(&site)
    }

    /// Spin register id for a crossing of `site` during forward step `tau`.
    fn spin_id(&self, tau: i64, site: i64) -> u64 {
        match self.spin_mode {
            SpinMode::Persistent => zigzag(site),
            SpinMode::FreshEachStep => (zigzag(tau) << 48) | zigzag(site),
        }
    }

    /// All persistent spin ids of the array; the reservoir the time-reversal
    /// operator flips.
    pub fn spin_universe(&self) -> Vec<u64> {
        self.scatterers
            .iter()
            .filter(|(_, s)| s.has_spin)
            .map(|(&site, _)| zigzag(site))
            .collect()
    }
}

/// Entropy time series with detected local drops.
#[derive(Debug, Clone, Default)]
pub struct EntropySeries {
    pub times: Vec<i64>,
    pub entropy_bits: Vec<f64>,
    /// Times tau (members of `times`) where S(tau) < S(previous time).
    pub drop_steps: Vec<i64>,
    /// Total squared amplitude removed by pruning over the run.
    pub pruned_weight: f64,
}

impl EntropySeries {
    /// Assembles a series and detects drops against the previous entry.
    /// A drop must exceed 1e-12 bits so eigensolver jitter does not count.
    pub fn from_points(times: Vec<i64>, entropy_bits: Vec<f64>, pruned_weight: f64) -> Self {
        assert_eq!(times.len(), entropy_bits.len());
        let drop_steps = times
            .iter()
            .zip(entropy_bits.iter())
            .skip(1)
            .zip(entropy_bits.iter())
            .filter_map(|((&t, &s), &prev)| if s < prev - 1e-12 { Some(t) } else { None })
            .collect();
        EntropySeries {
            times,
            entropy_bits,
            drop_steps,
            pruned_weight,
        }
    }

    /// First tau with S(tau + 1) < S(tau), if any.
    pub fn first_drop(&self) -> Option<i64> {
        self.drop_steps.first().map(|d| d - 1)
    }
}

/// One forward step of the walk. `tau` is the time of `state`; the result
/// sits at `tau + 1` (the index only matters for fresh-spin register
/// naming). Amplitudes below the prune threshold are dropped, without
/// renormalization; the removed weight accumulates on the state.
pub fn step(state: &GrandState, scenario: &WalkScenario, tau: i64) -> Result<GrandState, WalkError> {
    let mut out: Vec<(BasisLabel, Complex64)> = Vec::with_capacity(2 * state.term_count());
    for (label, &amp) in state.terms() {
        // Which scatterer the particle meets, and where transmission lands.
        let (gate, landing) = match label.dir {
            Dir::Right => (label.site + 1, label.site + 1),
            Dir::Left => (label.site, label.site - 1),
        };
        match scenario.scatterer_at(gate) {
            None => out.push((
                BasisLabel::new(landing, label.dir, label.spins.clone()),
                amp,
            )),
            Some(spec) => {
                let a = spec.amps();
                let (t, r) = match label.dir {
                    Dir::Right => (a.t, a.r_ll),
                    Dir::Left => (a.t, a.r_rr),
                };
                let (keep, flip) = spec.spin_kick(label.dir == Dir::Left);
                if keep.norm() > 0.0 {
                    out.push((
                        BasisLabel::new(landing, label.dir, label.spins.clone()),
                        amp * t * keep,
                    ));
                }
                if flip.norm() > 0.0 {
                    let flipped = label.spins.toggled(scenario.spin_id(tau, gate));
                    out.push((BasisLabel::new(landing, label.dir, flipped), amp * t * flip));
                }
                out.push((
                    BasisLabel::new(label.site, label.dir.flipped(), label.spins.clone()),
                    amp * r,
                ));
            }
        }
    }
    finish_step(out, state.pruned_weight(), scenario.term_cap)
}

/// Exact adjoint of [`step`]: `state` sits at time `tau`, the result at
/// `tau - 1`. `step(step_back(x, tau), tau - 1) = x` up to pruning.
pub fn step_back(
    state: &GrandState,
    scenario: &WalkScenario,
    tau: i64,
) -> Result<GrandState, WalkError> {
    let mut out: Vec<(BasisLabel, Complex64)> = Vec::with_capacity(2 * state.term_count());
    for (label, &amp) in state.terms() {
        // Forward, a mover in this direction last interacted at `gate`;
        // transmission came from `origin`, reflection from the opposite
        // direction at the same cell.
        let (gate, origin) = match label.dir {
            Dir::Right => (label.site, label.site - 1),
            Dir::Left => (label.site + 1, label.site + 1),
        };
        match scenario.scatterer_at(gate) {
            None => out.push((
                BasisLabel::new(origin, label.dir, label.spins.clone()),
                amp,
            )),
            Some(spec) => {
                let a = spec.amps();
                // Conjugate-transposed scattering: the adjoint of the
                // forward spin kick pairs with the conjugated amplitudes.
                let (t, r) = match label.dir {
                    Dir::Right => (a.t.conj(), a.r_rr.conj()),
                    Dir::Left => (a.t.conj(), a.r_ll.conj()),
                };
                let (keep, flip) = spec.spin_kick(label.dir == Dir::Right);
                if keep.norm() > 0.0 {
                    out.push((
                        BasisLabel::new(origin, label.dir, label.spins.clone()),
                        amp * t * keep,
                    ));
                }
                if flip.norm() > 0.0 {
                    let flipped = label.spins.toggled(scenario.spin_id(tau - 1, gate));
                    out.push((BasisLabel::new(origin, label.dir, flipped), amp * t * flip));
                }
                out.push((
                    BasisLabel::new(label.site, label.dir.flipped(), label.spins.clone()),
                    amp * r,
                ));
            }
        }
    }
    finish_step(out, state.pruned_weight(), scenario.term_cap)
}

fn finish_step(
    out: Vec<(BasisLabel, Complex64)>,
    carried: f64,
    cap: usize,
) -> Result<GrandState, WalkError> {
    let (pruned, dropped) = GrandState::from_terms(out).pruned(PRUNE_THRESHOLD);
    let next = pruned.with_pruned_weight(carried + dropped);
    if next.term_count() > cap {
        return Err(WalkError::TooManyTerms {
            terms: next.term_count(),
            cap,
        });
    }
    Ok(next)
}

/// Applies the inverse evolution `steps` times. `tau` is the current time
/// of `state`.
pub fn evolve_backward(
    state: &GrandState,
    scenario: &WalkScenario,
    steps: usize,
    tau: i64,
) -> Result<GrandState, WalkError> {
    let mut s = state.clone();
    for k in 0..steps {
        s = step_back(&s, scenario, tau - k as i64)?;
    }
    Ok(s)
}

/// Basis-vector time reversal: every direction flipped and every reservoir
/// spin of the array flipped. Amplitudes are NOT conjugated, which is
/// exactly why this reversal fails to rewind the walk.
pub fn reverse_incomplete(
    state: &GrandState,
    scenario: &WalkScenario,
) -> Result<GrandState, WalkError> {
    reverse_with(state, scenario, false)
}

/// Full antiunitary reversal: basis flip plus complex conjugation of all
/// amplitudes. Conjugating twice with evolution in between rewinds exactly.
pub fn reverse_complete(
    state: &GrandState,
    scenario: &WalkScenario,
) -> Result<GrandState, WalkError> {
    reverse_with(state, scenario, true)
}

fn reverse_with(
    state: &GrandState,
    scenario: &WalkScenario,
    conjugate: bool,
) -> Result<GrandState, WalkError> {
    if scenario.spin_mode != SpinMode::Persistent {
        return Err(WalkError::ReversalNeedsPersistentSpins);
    }
    let universe = scenario.spin_universe();
    Ok(GrandState::from_terms(state.terms().iter().map(|(l, a)| {
        (
            BasisLabel::new(
                l.site,
                l.dir.flipped(),
                l.spins.complement_within(&universe),
            ),
            if conjugate { a.conj() } else { *a },
        )
    })))
}

/// Entropy of the reduced particle state, in bits.
pub fn entropy_bits(state: &GrandState) -> Result<f64, WalkError> {
    let rho = state.partial_trace()?;
    Ok(entropy::von_neumann(&rho)?.bits)
}

/// Evolves the scenario and records S(tau) for tau = 0..=horizon.
///
/// Persistent mode tracks the full grand state and traces out the spins.
/// Fresh mode never builds the exponentially large register space: distinct
/// scattering histories carry orthogonal register states there, so the
/// reduced matrix is exactly diagonal and the classical (site, direction)
/// distribution evolves by the doubly stochastic split T / 1-T, with
/// Shannon entropy equal to the von Neumann value.
pub fn evolve_entropy(scenario: &WalkScenario) -> Result<EntropySeries, WalkError> {
    match scenario.spin_mode {
        SpinMode::Persistent => evolve_entropy_grand(scenario),
        SpinMode::FreshEachStep => evolve_entropy_classical(scenario),
    }
}

fn evolve_entropy_grand(scenario: &WalkScenario) -> Result<EntropySeries, WalkError> {
    let mut times = Vec::with_capacity(scenario.horizon + 1);
    let mut bits = Vec::with_capacity(scenario.horizon + 1);
    let mut state = scenario.initial.clone();
    for tau in 0..=scenario.horizon as i64 {
        times.push(tau);
        bits.push(entropy_bits(&state)?);
        if tau < scenario.horizon as i64 {
            state = match step(&state, scenario, tau) {
                Ok(s) => s,
                Err(WalkError::TooManyTerms { .. }) => {
                    return Err(WalkError::StateExplosion {
                        reached_tau: tau,
                        partial: EntropySeries::from_points(times, bits, state.pruned_weight()),
                    })
                }
                Err(e) => return Err(e),
            };
        }
    }
    Ok(EntropySeries::from_points(
        times,
        bits,
        state.pruned_weight(),
    ))
}

fn evolve_entropy_classical(scenario: &WalkScenario) -> Result<EntropySeries, WalkError> {
    let mut dist: BTreeMap<(i64, Dir), f64> = BTreeMap::new();
    for (label, amp) in scenario.initial.terms() {
        *dist.entry((label.site, label.dir)).or_insert(0.0) += amp.norm_sqr();
    }
    let mut times = Vec::with_capacity(scenario.horizon + 1);
    let mut bits = Vec::with_capacity(scenario.horizon + 1);
    for tau in 0..=scenario.horizon as i64 {
        times.push(tau);
        let p: Vec<f64> = dist.values().copied().collect();
        bits.push(entropy::shannon(&p)?.bits);
        if tau < scenario.horizon as i64 {
            let mut next: BTreeMap<(i64, Dir), f64> = BTreeMap::new();
            for (&(site, dir), &p) in &dist {
                let (gate, landing) = match dir {
                    Dir::Right => (site + 1, site + 1),
                    Dir::Left => (site, site - 1),
                };
                match scenario.scatterer_at(gate) {
                    None => *next.entry((landing, dir)).or_insert(0.0) += p,
                    Some(spec) => {
                        let t = spec.transparency;
                        *next.entry((landing, dir)).or_insert(0.0) += p * t;
                        *next.entry((site, dir.flipped())).or_insert(0.0) += p * (1.0 - t);
                    }
                }
            }
            next.retain(|_, p| *p > 0.0);
            dist = next;
        }
    }
    Ok(EntropySeries::from_points(times, bits, 0.0))
}

/// S(-tau) series for tau = 0..=horizon: the initial state evolved with the
/// inverse step. Times are emitted as 0, -1, -2, ...
pub fn evolve_entropy_backward(scenario: &WalkScenario) -> Result<EntropySeries, WalkError> {
    let mut times = Vec::with_capacity(scenario.horizon + 1);
    let mut bits = Vec::with_capacity(scenario.horizon + 1);
    let mut state = scenario.initial.clone();
    for k in 0..=scenario.horizon as i64 {
        times.push(-k);
        bits.push(entropy_bits(&state)?);
        if k < scenario.horizon as i64 {
            state = step_back(&state, scenario, -k)?;
        }
    }
    Ok(EntropySeries::from_points(
        times,
        bits,
        state.pruned_weight(),
    ))
}

/// First entropy-drop step for each transparency, on the regular array with
/// zero phases in persistent mode.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub transparency: f64,
    /// First tau with S(tau+1) < S(tau); None when no drop shows up within
    /// the horizon (reported, not fatal).
    pub first_drop_step: Option<i64>,
}

pub fn sweep_transparency(
    t_values: &[f64],
    horizon: usize,
) -> Result<Vec<SweepPoint>, WalkError> {
    for &t in t_values {
        if !(t > 0.0 && t < 1.0) {
            return Err(WalkError::TransparencyNotInterior { value: t });
        }
    }
    t_values
        .par_iter()
        .map(|&t| {
            let spec = ScattererSpec::new(0.0, t, 0.0, 0.0)?;
            let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, horizon)?;
            let series = evolve_entropy(&scenario)?;
            Ok(SweepPoint {
                transparency: t,
                first_drop_step: series.first_drop(),
            })
        })
        .collect()
}

/// Half-space emission run: `depth` scatterers on sites 0..depth, the
/// particle incident from the empty side (cell -1, moving right), T = 0.5.
///
/// Forward evolution runs to `reversal_step` = depth - 1, the last step
/// before components re-enter already-visited scatterers from the far side;
/// there the state is completely conjugated and the walk continues to
/// `horizon`. The retrace mirrors the forward entropies exactly, and once
/// the particle marginal has fully exited into the empty half the entropy
/// stays constant at 0: complete reversal returns a disentangled state.
#[derive(Debug, Clone)]
pub struct HalfSpaceReport {
    pub series: EntropySeries,
    pub reversal_step: i64,
}

pub fn half_space_scenario(depth: usize, horizon: usize) -> Result<HalfSpaceReport, WalkError> {
    let scatterers: Vec<ScattererSpec> = (0..depth as i64)
        .map(|site| ScattererSpec::new(site as f64, 0.5, 0.0, 0.0))
        .collect::<Result<_, _>>()?;
    let initial = GrandState::single(BasisLabel::new(-1, Dir::Right, Spins::empty()));
    let scenario = WalkScenario::new(scatterers, SpinMode::Persistent, initial, horizon)?;
    let reversal_step = (depth.max(1) - 1).min(horizon) as i64;

    let mut times = Vec::with_capacity(horizon + 1);
    let mut bits = Vec::with_capacity(horizon + 1);
    let mut state = scenario.initial.clone();
    for tau in 0..=horizon as i64 {
        times.push(tau);
        bits.push(entropy_bits(&state)?);
        if tau == reversal_step {
            state = reverse_complete(&state, &scenario)?;
        }
        if tau < horizon as i64 {
            state = step(&state, &scenario, tau)?;
        }
    }
    Ok(HalfSpaceReport {
        series: EntropySeries::from_points(times, bits, state.pruned_weight()),
        reversal_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scattering_matrix_plain_phases() {
        // T = 0.5, zero phases: t = 1/sqrt(2), r = i/sqrt(2).
        let spec = ScattererSpec::new(0.0, 0.5, 0.0, 0.0).unwrap();
        let s = build_scattering_matrix(&spec);
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        assert!((s[(1, 0)] - c(inv_sqrt2, 0.0)).norm() < 1e-15);
        assert!((s[(0, 0)] - c(0.0, inv_sqrt2)).norm() < 1e-15);
    }

    #[test]
    fn scattering_matrix_quarter_phase_pair() {
        // chi_LL = -3pi/4, chi_LR = pi/4 puts both amplitudes on the
        // diagonal of the complex plane: t = e^{i pi/4}/sqrt(2),
        // r_LL = r_RR = e^{-i pi/4}/sqrt(2).
        let spec = ScattererSpec::new(0.0, 0.5, -3.0 * FRAC_PI_4, FRAC_PI_4).unwrap();
        let s = build_scattering_matrix(&spec);
        let t_expect = Complex64::from_polar(1.0 / 2.0_f64.sqrt(), FRAC_PI_4);
        let r_expect = Complex64::from_polar(1.0 / 2.0_f64.sqrt(), -FRAC_PI_4);
        assert!((s[(1, 0)] - t_expect).norm() < 1e-15);
        assert!((s[(0, 0)] - r_expect).norm() < 1e-15);
        assert!((s[(1, 1)] - r_expect).norm() < 1e-15);
    }

    #[test]
    fn full_transparency_means_no_reflection() {
        let spec = ScattererSpec::new(0.0, 1.0, 0.3, -0.7).unwrap();
        let s = build_scattering_matrix(&spec);
        assert!((s[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!(s[(0, 0)].norm() < 1e-15);
        assert!(s[(1, 1)].norm() < 1e-15);
    }

    #[test]
    fn one_fresh_step_gives_one_bit() {
        let spec = ScattererSpec::new(0.0, 0.5, 0.0, 0.0).unwrap();
        let scenario = WalkScenario::regular(&spec, SpinMode::FreshEachStep, 1).unwrap();
        let after = step(&scenario.initial, &scenario, 0).unwrap();
        let rho = after.partial_trace().unwrap();
        assert_eq!(rho.dim(), 2);
        assert!(rho.matrix()[(0, 1)].norm() < 1e-15);
        assert!((entropy_bits(&after).unwrap() - 1.0).abs() < 1e-12);

        let series = evolve_entropy(&scenario).unwrap();
        assert!((series.entropy_bits[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transparent_array_keeps_entropy_zero() {
        let spec = ScattererSpec::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, 6).unwrap();
        let series = evolve_entropy(&scenario).unwrap();
        assert!(series.entropy_bits.iter().all(|&s| s.abs() < 1e-12));
        assert!(series.drop_steps.is_empty());
    }

    #[test]
    fn fresh_classical_path_matches_grand_state() {
        let spec = ScattererSpec::new(0.0, 0.37, 0.4, -1.2).unwrap();
        let scenario = WalkScenario::regular(&spec, SpinMode::FreshEachStep, 4).unwrap();
        let fast = evolve_entropy(&scenario).unwrap();

        let mut state = scenario.initial.clone();
        for tau in 0..4 {
            let s = entropy_bits(&state).unwrap();
            assert!(
                (s - fast.entropy_bits[tau as usize]).abs() < 1e-10,
                "tau {tau}: classical {} vs grand {s}",
                fast.entropy_bits[tau as usize]
            );
            state = step(&state, &scenario, tau).unwrap();
        }
    }

    #[test]
    fn reversal_flips_labels_and_is_involutive() {
        let spec = ScattererSpec::new(0.0, 0.5, 0.0, 0.0).unwrap();
        let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, 2).unwrap();
        let state = GrandState::single(BasisLabel::new(0, Dir::Right, Spins::empty()));
        let rev = reverse_incomplete(&state, &scenario).unwrap();
        let (label, amp) = rev.terms().iter().next().unwrap();
        assert_eq!(label.dir, Dir::Left);
        assert_eq!(label.spins.flipped_count(), scenario.spin_universe().len());
        assert_eq!(*amp, c(1.0, 0.0));

        let back = reverse_incomplete(&rev, &scenario).unwrap();
        assert_eq!(back.terms().len(), 1);
        assert!(back.terms().contains_key(state.terms().keys().next().unwrap()));
    }

    #[test]
    fn half_space_canonical_run() {
        let report = half_space_scenario(4, 12).unwrap();
        assert_eq!(report.reversal_step, 3);
        let s = &report.series.entropy_bits;
        // Forward leg never decreases.
        for k in 1..=3 {
            assert!(s[k] >= s[k - 1] - 1e-12);
        }
        // Retrace mirrors the forward leg.
        for k in 1..=3 {
            assert!(
                (s[3 + k] - s[3 - k]).abs() < 1e-10,
                "retrace asymmetry at offset {k}: {} vs {}",
                s[3 + k],
                s[3 - k]
            );
        }
        // After the particle exits, a flat plateau at exactly zero.
        for k in 6..=12 {
            assert!(s[k].abs() < 1e-10, "plateau broken at {k}: {}", s[k]);
        }
    }

    #[test]
    fn half_space_without_scatterers_is_silent() {
        let report = half_space_scenario(0, 6).unwrap();
        assert!(report.series.entropy_bits.iter().all(|&s| s.abs() < 1e-12));
    }

    #[test]
    fn early_steps_touch_only_new_spins_and_cannot_drop() {
        // First and second steps interact with never-touched spins only;
        // drops require revisiting, so they appear at step 3 or later.
        for t in [0.2, 0.36, 0.5, 0.65, 0.8, 0.95] {
            let spec = ScattererSpec::new(0.0, t, 0.0, 0.0).unwrap();
            let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, 2).unwrap();
            let series = evolve_entropy(&scenario).unwrap();
            assert!(series.entropy_bits[1] >= series.entropy_bits[0] - 1e-12);
            assert!(series.entropy_bits[2] >= series.entropy_bits[1] - 1e-12);
        }
    }

    #[test]
    fn drop_window_examples() {
        let points = sweep_transparency(&[0.40, 0.65, 0.75], 8).unwrap();
        assert_eq!(points[0].first_drop_step, Some(2));
        assert_eq!(points[1].first_drop_step, Some(3));
        assert_eq!(points[2].first_drop_step, Some(4));
    }

    #[test]
    fn sweep_rejects_boundary_transparency() {
        assert!(matches!(
            sweep_transparency(&[0.5, 1.0], 4),
            Err(WalkError::TransparencyNotInterior { .. })
        ));
    }

    #[test]
    fn term_cap_reports_explosion() {
        let spec = ScattererSpec::new(0.0, 0.5, 0.0, 0.0).unwrap();
        let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, 8)
            .unwrap()
            .with_term_cap(8);
        match evolve_entropy(&scenario) {
            Err(WalkError::StateExplosion { reached_tau, partial }) => {
                assert!(reached_tau >= 1);
                assert_eq!(partial.times.len(), (reached_tau + 1) as usize);
            }
            other => panic!("expected StateExplosion, got {other:?}"),
        }
    }

    fn series_for(t: f64, chi_ll: f64, chi_lr: f64, horizon: usize) -> Vec<f64> {
        let spec = ScattererSpec::new(0.0, t, chi_ll, chi_lr).unwrap();
        let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, horizon).unwrap();
        evolve_entropy(&scenario).unwrap().entropy_bits
    }

    #[test]
    fn entropy_series_ignores_scattering_phases() {
        // The r_RR completion phase is a gauge choice; no phase pair moves
        // the entropy of the regular walk.
        let base = series_for(0.45, 0.0, 0.0, 7);
        for (ll, lr) in [(0.7, -0.4), (1.1, 2.0), (-3.0 * FRAC_PI_4, FRAC_PI_4), (FRAC_PI_2, FRAC_PI_2)] {
            let other = series_for(0.45, ll, lr, 7);
            for (a, b) in base.iter().zip(other.iter()) {
                assert!((a - b).abs() < 1e-9, "phase pair ({ll}, {lr}) moved entropy");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn step_preserves_norm(
            t in 0.05f64..0.95,
            chi_ll in -3.0f64..3.0,
            chi_lr in -3.0f64..3.0,
            flip in 0.0f64..std::f64::consts::TAU,
        ) {
            let spec = ScattererSpec::new(0.0, t, chi_ll, chi_lr).unwrap().with_flip_angle(flip);
            let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, 6).unwrap();
            let mut state = scenario.initial.clone();
            for tau in 0..6 {
                state = step(&state, &scenario, tau).unwrap();
                prop_assert!((state.norm_sq() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn parity_pattern_holds(t in 0.05f64..0.95, steps in 1i64..6) {
            let spec = ScattererSpec::new(0.0, t, 0.3, -0.2).unwrap();
            let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, steps as usize).unwrap();
            let mut state = scenario.initial.clone();
            for tau in 0..steps {
                state = step(&state, &scenario, tau).unwrap();
            }
            for label in state.terms().keys() {
                match label.dir {
                    Dir::Right => prop_assert_eq!((label.site + steps).rem_euclid(2), 0),
                    Dir::Left => prop_assert_eq!((label.site + steps).rem_euclid(2), 1),
                }
            }
        }

        #[test]
        fn backward_inverts_forward(
            t in 0.05f64..0.95,
            chi_ll in -3.0f64..3.0,
            chi_lr in -3.0f64..3.0,
            steps in 1i64..5,
        ) {
            let spec = ScattererSpec::new(0.0, t, chi_ll, chi_lr).unwrap();
            let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, 8).unwrap();
            let mut state = scenario.initial.clone();
            for tau in 0..steps {
                state = step(&state, &scenario, tau).unwrap();
            }
            let back = evolve_backward(&state, &scenario, steps as usize, steps).unwrap();
            let f = GrandState::fidelity(&back, &scenario.initial).unwrap();
            prop_assert!((f - 1.0).abs() < 1e-12, "round trip fidelity {f}");
        }

        #[test]
        fn complete_reversal_round_trip_is_exact(
            t in 0.05f64..0.95,
            chi_ll in -3.0f64..3.0,
            chi_lr in -3.0f64..3.0,
            n in 1i64..5,
        ) {
            let spec = ScattererSpec::new(0.0, t, chi_ll, chi_lr).unwrap();
            let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, 10).unwrap();
            let mut state = scenario.initial.clone();
            for tau in 0..n {
                state = step(&state, &scenario, tau).unwrap();
            }
            let mut rewound = reverse_complete(&state, &scenario).unwrap();
            for tau in n..2 * n {
                rewound = step(&rewound, &scenario, tau).unwrap();
            }
            let target = reverse_complete(&scenario.initial, &scenario).unwrap();
            let f = GrandState::fidelity(&rewound, &target).unwrap();
            prop_assert!((f - 1.0).abs() < 1e-10, "fidelity {f} after {n} steps");
        }

        #[test]
        fn backward_entropy_mirrors_forward(t in 0.1f64..0.9) {
            let spec = ScattererSpec::new(0.0, t, 0.0, 0.0).unwrap();
            let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, 5).unwrap();
            let fwd = evolve_entropy(&scenario).unwrap();
            let bwd = evolve_entropy_backward(&scenario).unwrap();
            for k in 0..=5 {
                prop_assert!((fwd.entropy_bits[k] - bwd.entropy_bits[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn incomplete_reversal_fails_to_rewind() {
        let spec = ScattererSpec::new(0.0, 0.5, -3.0 * FRAC_PI_4, FRAC_PI_4).unwrap();
        let scenario = WalkScenario::regular(&spec, SpinMode::Persistent, 6).unwrap();
        let mut state = scenario.initial.clone();
        for tau in 0..2 {
            state = step(&state, &scenario, tau).unwrap();
        }
        let mut resumed = reverse_incomplete(&state, &scenario).unwrap();
        for tau in 2..4 {
            resumed = step(&resumed, &scenario, tau).unwrap();
        }
        let target = reverse_incomplete(&scenario.initial, &scenario).unwrap();
        let f = GrandState::fidelity(&resumed, &target).unwrap();
        assert!(f < 0.5, "incomplete reversal should not refocus, fidelity {f}");
        assert!((resumed.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flip_angle_pi_matches_plain_not() {
        // W(pi) must act exactly like the bit flip with unit amplitude.
        let spec = ScattererSpec::new(0.0, 0.5, 0.1, 0.2).unwrap();
        let (keep, flip) = spec.spin_kick(false);
        assert!(keep.norm() < 1e-15);
        assert!((flip - c(1.0, 0.0)).norm() < 1e-12);
        let (keep_adj, flip_adj) = spec.spin_kick(true);
        assert!(keep_adj.norm() < 1e-15);
        assert!((flip_adj - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn partial_flip_angle_stays_unitary_and_zero_angle_is_identity() {
        let spec = ScattererSpec::new(0.0, 0.5, 0.0, 0.0)
            .unwrap()
            .with_flip_angle(0.0);
        let (keep, flip) = spec.spin_kick(false);
        assert!((keep - c(1.0, 0.0)).norm() < 1e-15);
        assert!(flip.norm() < 1e-15);

        let spec = spec.with_flip_angle(1.234);
        let (keep, flip) = spec.spin_kick(false);
        assert!((keep.norm_sqr() + flip.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scenario_validation_errors() {
        assert!(matches!(
            ScattererSpec::new(0.0, 1.2, 0.0, 0.0),
            Err(WalkError::InvalidTransparency { .. })
        ));
        let a = ScattererSpec::new(0.0, 0.5, 0.0, 0.0).unwrap();
        let b = ScattererSpec::new(0.3, 0.5, 0.0, 0.0).unwrap();
        assert!(matches!(
            WalkScenario::new(vec![b], SpinMode::Persistent, WalkScenario::default_initial(), 2),
            Err(WalkError::NonIntegerPosition { .. })
        ));
        let dup = ScattererSpec::new(0.0, 0.6, 0.0, 0.0).unwrap();
        assert!(matches!(
            WalkScenario::new(
                vec![a.clone(), dup],
                SpinMode::Persistent,
                WalkScenario::default_initial(),
                2
            ),
            Err(WalkError::DuplicateSite { .. })
        ));
        let spinless = ScattererSpec::new(1.0, 0.5, 0.0, 0.0).unwrap().without_spin();
        assert!(matches!(
            WalkScenario::new(
                vec![spinless],
                SpinMode::FreshEachStep,
                WalkScenario::default_initial(),
                2
            ),
            Err(WalkError::FreshModeNeedsSpins { .. })
        ));
    }

    #[test]
    fn fresh_growth_is_logarithmic_in_time() {
        // Spot check of the long-horizon growth law; the CLI-facing fit
        // uses many more points.
        let spec = ScattererSpec::new(0.0, 0.5, 0.0, 0.0).unwrap();
        let scenario = WalkScenario::regular(&spec, SpinMode::FreshEachStep, 64).unwrap();
        let series = evolve_entropy(&scenario).unwrap();
        let s16 = series.entropy_bits[16];
        let s64 = series.entropy_bits[64];
        assert!((s16 - 3.9999).abs() < 0.01, "S(16) = {s16}");
        assert!((s64 - 5.0357).abs() < 0.01, "S(64) = {s64}");
    }

    #[test]
    fn flip_angle_pi_is_default_full_not() {
        assert!((ScattererSpec::new(0.0, 0.4, 0.0, 0.0).unwrap().flip_angle - PI).abs() < 1e-15);
    }
}
