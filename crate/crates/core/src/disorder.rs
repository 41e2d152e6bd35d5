//! Randomized scatterer arrays: per-site disorder in the scattering
//! parameters on the lattice walk, and position disorder with genuinely
//! continuous arrival times.
//!
//! The continuous engine tracks sharp wavefronts, one component per
//! distinct (position, direction, spin configuration). A component splits
//! in two at every scatterer crossing; components meeting again at the same
//! phase-space point merge by amplitude addition. Merging is what separates
//! the trajectory count N_t (never merged, grows by the split rule alone)
//! from the wave-function component count N_wf.

use crate::entropy::{self, EntropyError};
use crate::qstate::{DensityMatrix, Dir, Spins};
use crate::seeding::{substream, zigzag};
use crate::walk1d::{
    evolve_entropy, EntropySeries, ScattererSpec, SpinMode, WalkError, WalkScenario,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

/// Components closer than this (same direction, same spins) are one
/// arrival. Coincident paths land on exactly equal path lengths up to
/// rounding; genuinely distinct arrivals under disorder are far apart.
pub const MERGE_TOL: f64 = 1e-9;
/// Amplitude floor below which a merged component no longer counts toward
/// N_wf. It still carries its trajectory count.
pub const LIVE_AMP: f64 = 1e-12;
/// Hard cap on simultaneously tracked components.
pub const COMPONENT_CAP: usize = 5_000_000;

const START_X: f64 = 0.75;
const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DisorderError {
    #[error("transparency range ({lo}, {hi}) leaves the open interval (0, 1)")]
    TransparencyRange { lo: f64, hi: f64 },
    #[error("position disorder strength must be nonnegative, got {value}")]
    NegativeEta { value: f64 },
    #[error("scatterer window of half-width {half} sites cannot contain the light cone (needs {needed})")]
    WindowTooSmall { needed: i64, half: i64 },
    #[error("random-amplitude runs use regular positions; eta = {eta}")]
    EtaMustBeZero { eta: f64 },
    #[error("component count passed {cap} at time {reached_time}")]
    StateExplosion { reached_time: f64, cap: usize },
    #[error("probability drifted to {norm} at time {time}")]
    NormDrift { time: f64, norm: f64 },
    #[error("growth fit needs {needed} usable points, found {usable}")]
    InsufficientData { usable: usize, needed: usize },
    #[error("coverage {value} outside (0, 1]")]
    InvalidCoverage { value: f64 },
    #[error("negative weight at index {index}")]
    NegativeWeight { index: usize },
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

/// Disorder ensemble parameters. Per-site draws g are uniform on
/// [-0.5, 0.5]: T_i = base_T + g delta_T, chi_i = g delta_chi,
/// x_i = i + eta g. Each site consumes its own RNG substream, so the same
/// seed gives the same array regardless of window size or traversal order.
#[derive(Debug, Clone)]
pub struct DisorderSpec {
    pub base_t: f64,
    pub delta_t: f64,
    pub delta_chi_ll: f64,
    pub delta_chi_lr: f64,
    pub eta: f64,
    pub seed: u64,
    pub n_scatterers_window: usize,
}

impl DisorderSpec {
    pub fn new(
        base_t: f64,
        delta_t: f64,
        delta_chi_ll: f64,
        delta_chi_lr: f64,
        eta: f64,
        seed: u64,
        n_scatterers_window: usize,
    ) -> Result<Self, DisorderError> {
        let lo = base_t - 0.5 * delta_t.abs();
        let hi = base_t + 0.5 * delta_t.abs();
        if !(lo > 0.0 && hi < 1.0) {
            return Err(DisorderError::TransparencyRange { lo, hi });
        }
        if !(eta >= 0.0) {
            return Err(DisorderError::NegativeEta { value: eta });
        }
        Ok(DisorderSpec {
            base_t,
            delta_t,
            delta_chi_ll,
            delta_chi_lr,
            eta,
            seed,
            n_scatterers_window,
        })
    }

    /// Uniform array at the census working point, deltas zero.
    pub fn census_defaults(eta: f64, seed: u64) -> Result<Self, DisorderError> {
        DisorderSpec::new(0.4, 0.0, 0.0, 0.0, eta, seed, 64)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DisorderSpec { seed, ..self.clone() }
    }

    /// (T_i, chi_LL_i, chi_LR_i) for site i.
    fn site_params(&self, site: i64) -> (f64, f64, f64) {
        let mut rng = substream(self.seed, "amp", zigzag(site));
        let g_t: f64 = rng.random::<f64>() - 0.5;
        let g_ll: f64 = rng.random::<f64>() - 0.5;
        let g_lr: f64 = rng.random::<f64>() - 0.5;
        (
            self.base_t + g_t * self.delta_t,
            g_ll * self.delta_chi_ll,
            g_lr * self.delta_chi_lr,
        )
    }

    fn site_position(&self, site: i64) -> f64 {
        let mut rng = substream(self.seed, "pos", zigzag(site));
        let g: f64 = rng.random::<f64>() - 0.5;
        site as f64 + self.eta * g
    }
}

/// Lattice walk with per-site randomized scattering parameters, spins
/// persistent, positions regular.
pub fn run_random_amplitudes(
    spec: &DisorderSpec,
    horizon: usize,
) -> Result<EntropySeries, DisorderError> {
    if spec.eta != 0.0 {
        return Err(DisorderError::EtaMustBeZero { eta: spec.eta });
    }
    let w = horizon as i64 + 1;
    let scatterers: Vec<ScattererSpec> = (-w..=w)
        .map(|site| {
            let (t, chi_ll, chi_lr) = spec.site_params(site);
            ScattererSpec::new(site as f64, t, chi_ll, chi_lr)
        })
        .collect::<Result<_, _>>()?;
    let scenario = WalkScenario::new(
        scatterers,
        SpinMode::Persistent,
        WalkScenario::default_initial(),
        horizon,
    )?;
    Ok(evolve_entropy(&scenario)?)
}

/// Component and trajectory counts sampled over time.
#[derive(Debug, Clone, Default)]
pub struct ComponentCensus {
    pub times: Vec<f64>,
    /// N_t: Feynman trajectories, every scatterer crossing doubles.
    pub n_trajectories: Vec<u128>,
    /// N_wf: merged components with non-negligible amplitude.
    pub n_components: Vec<u64>,
    /// N_swf: smallest component set covering 99% of the probability.
    pub n_significant: Vec<u64>,
}

struct Component {
    pos: f64,
    dir: Dir,
    amp: Complex64,
    ntraj: u128,
    spins: Spins,
}

struct SiteScatterer {
    x: f64,
    id: u64,
    t_amp: Complex64,
    r_ll: Complex64,
    r_rr: Complex64,
}

/// Continuous-time run over a disordered array. The particle starts
/// between scatterers 0 and 1 (off center, so left and right arrivals
/// stay distinct at eta = 0) moving right; the census is sampled at every
/// integer time through `horizon`.
///
/// Spinless by default: transmission and reflection only move the particle,
/// the state stays pure and the entropy column is zero. With `with_spins`
/// every transmission flips the crossed scatterer's spin and the entropy is
/// that of the particle after tracing the spins out.
pub fn run_random_positions(
    spec: &DisorderSpec,
    horizon: f64,
    with_spins: bool,
) -> Result<(EntropySeries, ComponentCensus), DisorderError> {
    let half = (spec.n_scatterers_window / 2) as i64;
    let needed = (horizon + START_X + 0.5 * spec.eta + 1.0).ceil() as i64;
    if half < needed {
        return Err(DisorderError::WindowTooSmall { needed, half });
    }

    let mut scatterers: Vec<SiteScatterer> = (-half..=half)
        .map(|site| {
            let (t, chi_ll, chi_lr) = spec.site_params(site);
            let spec1 = ScattererSpec::new(site as f64, t, chi_ll, chi_lr)?;
            let m = crate::walk1d::build_scattering_matrix(&spec1);
            Ok(SiteScatterer {
                x: spec.site_position(site),
                id: zigzag(site),
                t_amp: m[(1, 0)],
                r_ll: m[(0, 0)],
                r_rr: m[(1, 1)],
            })
        })
        .collect::<Result<_, DisorderError>>()?;
    scatterers.sort_by(|a, b| a.x.total_cmp(&b.x));

    let mut components = vec![Component {
        pos: START_X,
        dir: Dir::Right,
        amp: Complex64::new(1.0, 0.0),
        ntraj: 1,
        spins: Spins::empty(),
    }];

    let last = horizon.floor() as i64;
    let mut census = ComponentCensus::default();
    let mut times = Vec::new();
    let mut bits = Vec::new();
    for tau in 0..=last {
        components = merge(components);
        let norm: f64 = components.iter().map(|c| c.amp.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(DisorderError::NormDrift {
                time: tau as f64,
                norm,
            });
        }
        sample(&components, tau as f64, &mut census);
        times.push(tau);
        bits.push(if with_spins {
            spin_traced_entropy(&components)?
        } else {
            0.0
        });
        if tau < last {
            components = advance(components, &scatterers, tau as f64, (tau + 1) as f64, with_spins)
                .map_err(|cap| DisorderError::StateExplosion {
                    reached_time: tau as f64,
                    cap,
                })?;
        }
    }
    Ok((EntropySeries::from_points(times, bits, 0.0), census))
}

fn advance(
    components: Vec<Component>,
    scatterers: &[SiteScatterer],
    t0: f64,
    t1: f64,
    with_spins: bool,
) -> Result<Vec<Component>, usize> {
    let mut work: Vec<(Component, f64)> = components.into_iter().map(|c| (c, t0)).collect();
    let mut settled = Vec::new();
    while let Some((c, t)) = work.pop() {
        // Next scatterer strictly ahead; the one at the current position
        // was just processed.
        let hit = match c.dir {
            Dir::Right => {
                let i = scatterers.partition_point(|s| s.x <= c.pos + TIME_EPS);
                scatterers.get(i)
            }
            Dir::Left => {
                let i = scatterers.partition_point(|s| s.x < c.pos - TIME_EPS);
                i.checked_sub(1).and_then(|i| scatterers.get(i))
            }
        };
        match hit {
            Some(s) if t + (s.x - c.pos).abs() <= t1 - TIME_EPS => {
                let t_hit = t + (s.x - c.pos).abs();
                let reflected = Component {
                    pos: s.x,
                    dir: c.dir.flipped(),
                    amp: c.amp
                        * match c.dir {
                            Dir::Right => s.r_ll,
                            Dir::Left => s.r_rr,
                        },
                    ntraj: c.ntraj,
                    spins: c.spins.clone(),
                };
                let transmitted = Component {
                    pos: s.x,
                    dir: c.dir,
                    amp: c.amp * s.t_amp,
                    ntraj: c.ntraj,
                    spins: if with_spins {
                        c.spins.toggled(s.id)
                    } else {
                        c.spins
                    },
                };
                work.push((transmitted, t_hit));
                work.push((reflected, t_hit));
                if work.len() + settled.len() > COMPONENT_CAP {
                    return Err(COMPONENT_CAP);
                }
            }
            _ => {
                let mut c = c;
                c.pos += match c.dir {
                    Dir::Right => t1 - t,
                    Dir::Left => -(t1 - t),
                };
                settled.push(c);
            }
        }
    }
    Ok(settled)
}

/// Collapses components sharing (direction, spins, position within
/// MERGE_TOL). The sort key is total, so the merge result is independent
/// of traversal order.
fn merge(mut components: Vec<Component>) -> Vec<Component> {
    components.sort_by(|a, b| {
        a.dir
            .cmp(&b.dir)
            .then_with(|| a.spins.cmp(&b.spins))
            .then_with(|| a.pos.total_cmp(&b.pos))
            .then_with(|| a.amp.re.total_cmp(&b.amp.re))
            .then_with(|| a.amp.im.total_cmp(&b.amp.im))
    });
    let mut out: Vec<Component> = Vec::with_capacity(components.len());
    for c in components {
        match out.last_mut() {
            Some(prev)
                if prev.dir == c.dir
                    && prev.spins == c.spins
                    && (c.pos - prev.pos).abs() <= MERGE_TOL =>
            {
                prev.amp += c.amp;
                prev.ntraj += c.ntraj;
            }
            _ => out.push(c),
        }
    }
    out
}

fn sample(components: &[Component], time: f64, census: &mut ComponentCensus) {
    census.times.push(time);
    census
        .n_trajectories
        .push(components.iter().map(|c| c.ntraj).sum());
    census.n_components.push(
        components
            .iter()
            .filter(|c| c.amp.norm() > LIVE_AMP)
            .count() as u64,
    );
    let weights: Vec<f64> = components.iter().map(|c| c.amp.norm_sqr()).collect();
    census
        .n_significant
        .push(census_significant(&weights, 0.99).expect("weights are squared magnitudes") as u64);
}

/// Entropy (bits) of the particle after tracing out the spins. Basis
/// labels are (direction, position cluster); positions are clustered
/// globally with the merge tolerance.
fn spin_traced_entropy(components: &[Component]) -> Result<f64, DisorderError> {
    let live: Vec<&Component> = components.iter().filter(|c| c.amp.norm() > LIVE_AMP).collect();
    if live.is_empty() {
        return Ok(0.0);
    }
    let mut positions: Vec<f64> = live.iter().map(|c| c.pos).collect();
    positions.sort_by(|a, b| a.total_cmp(b));
    let mut anchors: Vec<f64> = Vec::new();
    for p in positions {
        if anchors.last().map_or(true, |a| p - a > MERGE_TOL) {
            anchors.push(p);
        }
    }
    let cluster = |pos: f64| anchors.partition_point(|a| *a <= pos + MERGE_TOL) - 1;

    let mut labels: BTreeMap<(u8, usize), usize> = BTreeMap::new();
    let dir_key = |d: Dir| if d == Dir::Right { 0u8 } else { 1u8 };
    for c in &live {
        let key = (dir_key(c.dir), cluster(c.pos));
        let next = labels.len();
        labels.entry(key).or_insert(next);
    }
    let dim = labels.len();
    let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
    let mut by_spins: BTreeMap<&Spins, Vec<(usize, Complex64)>> = BTreeMap::new();
    for c in &live {
        let idx = labels[&(dir_key(c.dir), cluster(c.pos))];
        by_spins.entry(&c.spins).or_default().push((idx, c.amp));
    }
    for group in by_spins.values() {
        for &(i, a) in group {
            for &(j, b) in group {
                rho[(i, j)] += a * b.conj();
            }
        }
    }
    let rho = DensityMatrix::from_matrix(rho).map_err(WalkError::from)?;
    Ok(entropy::von_neumann(&rho)?.bits)
}

/// Smallest k such that the k largest weights cover `coverage` of the
/// total.
pub fn census_significant(weights: &[f64], coverage: f64) -> Result<usize, DisorderError> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(DisorderError::InvalidCoverage { value: coverage });
    }
    if let Some(index) = weights.iter().position(|w| *w < 0.0) {
        return Err(DisorderError::NegativeWeight { index });
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Ok(0);
    }
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    for (k, w) in sorted.iter().enumerate() {
        acc += w;
        if acc >= coverage * total {
            return Ok(k + 1);
        }
    }
    Ok(sorted.len())
}

/// Growth-law fit N = 2^(a tau^b), linearized as
/// log2 log2 N = log2 a + b log2 tau.
#[derive(Debug, Clone, Copy)]
pub struct GrowthFit {
    pub a: f64,
    pub b: f64,
    /// RMS residual in the linearized coordinates.
    pub residual: f64,
    pub points_used: usize,
}

/// Least-squares fit on points with tau >= 1 and N >= 3 (double logs of
/// smaller counts swing wildly and predate the growth regime). At least
/// six usable points required.
pub fn fit_series(times: &[f64], counts: &[f64]) -> Result<GrowthFit, DisorderError> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(counts.iter())
        .filter(|&(&t, &n)| t >= 1.0 && n >= 3.0)
        .map(|(&t, &n)| (t.log2(), n.log2().log2()))
        .collect();
    if pts.len() < 6 {
        return Err(DisorderError::InsufficientData {
            usable: pts.len(),
            needed: 6,
        });
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - b * sx) / n;
    let residual = (pts
        .iter()
        .map(|&(x, y)| (y - intercept - b * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(GrowthFit {
        a: intercept.exp2(),
        b,
        residual,
        points_used: pts.len(),
    })
}

/// Per-series growth fits of a census; a series without enough usable
/// points reports None.
#[derive(Debug, Clone)]
pub struct CensusFits {
    pub n_t: Option<GrowthFit>,
    pub n_wf: Option<GrowthFit>,
    pub n_swf: Option<GrowthFit>,
}

pub fn fit_growth(census: &ComponentCensus) -> CensusFits {
    let as_f64 = |v: &[u64]| v.iter().map(|&n| n as f64).collect::<Vec<_>>();
    let nt: Vec<f64> = census.n_trajectories.iter().map(|&n| n as f64).collect();
    CensusFits {
        n_t: fit_series(&census.times, &nt).ok(),
        n_wf: fit_series(&census.times, &as_f64(&census.n_components)).ok(),
        n_swf: fit_series(&census.times, &as_f64(&census.n_significant)).ok(),
    }
}

/// Finite-packet saturation estimate: packets of wavelength 1/k_max spread
/// over length `max_spread` cannot hold more than max_spread*k_max
/// resolvable components.
pub fn effective_components(n_wf: u64, max_spread: f64, k_max: f64) -> u64 {
    n_wf.min((max_spread * k_max).floor().max(0.0) as u64)
}

/// Element-wise median census across seeds (midpoint convention for even
/// counts). Seeds run in parallel; aggregation order is fixed by the seed
/// list.
#[derive(Debug, Clone)]
pub struct MedianCensus {
    pub times: Vec<f64>,
    pub n_t: Vec<f64>,
    pub n_wf: Vec<f64>,
    pub n_swf: Vec<f64>,
}

pub fn ensemble_median_census(
    spec: &DisorderSpec,
    seeds: &[u64],
    horizon: f64,
    with_spins: bool,
) -> Result<MedianCensus, DisorderError> {
    let runs: Vec<ComponentCensus> = seeds
        .par_iter()
        .map(|&s| run_random_positions(&spec.with_seed(s), horizon, with_spins).map(|r| r.1))
        .collect::<Result<_, _>>()?;
    let times = runs[0].times.clone();
    let median_at = |get: &dyn Fn(&ComponentCensus, usize) -> f64, k: usize| {
        let mut v: Vec<f64> = runs.iter().map(|c| get(c, k)).collect();
        v.sort_by(|a, b| a.total_cmp(b));
        if v.len() % 2 == 1 {
            v[v.len() / 2]
        } else {
            0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
        }
    };
    let mut out = MedianCensus {
        times: times.clone(),
        n_t: Vec::new(),
        n_wf: Vec::new(),
        n_swf: Vec::new(),
    };
    for k in 0..times.len() {
        out.n_t.push(median_at(&|c, k| c.n_trajectories[k] as f64, k));
        out.n_wf.push(median_at(&|c, k| c.n_components[k] as f64, k));
        out.n_swf.push(median_at(&|c, k| c.n_significant[k] as f64, k));
    }
    Ok(out)
}
