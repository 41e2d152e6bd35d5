//! Refocusing a freely spreading wave packet with an array of mirrors.
//!
//! A packet evolving under H = p^2/2m acquires, at large time, the local
//! phase m x^2 / 2 hbar tau. Full time reversal needs that phase conjugated
//! everywhere; a finite mirror array can only conjugate it piecewise. Around
//! each mirror position x_n the constant and linear parts of the phase are
//! reverted exactly, leaving the quadratic residual
//!
//! ```text
//! alpha(x) = m (x - x_n)^2 / (2 hbar tau),      |alpha| <= epsilon
//! ```
//!
//! inside intervals of width 2 sqrt(2 hbar tau epsilon / m). The net
//! operator, conjugate-then-kick, is applied in one shot; mirror switching
//! is never simulated. Mirror count N then scales as sqrt(tau/epsilon), and
//! the refocus infidelity as epsilon^2.
//!
//! Evolution itself is exact Fourier synthesis on centered grids; the
//! quadratic-phase asymptotics never enter the dynamics.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MirrorsError {
    #[error("momentum grid needs an even length >= 4, got {n}")]
    GridSizeInvalid { n: usize },
    #[error("grid step must be positive, got {value}")]
    InvalidGridStep { value: f64 },
    #[error("amplitudes not normalized: sum |f|^2 dk/2pi = {norm}")]
    NotNormalized { norm: f64 },
    #[error("mass must be positive, got {value}")]
    MassNotPositive { value: f64 },
    #[error("hbar must be positive, got {value}")]
    HbarNotPositive { value: f64 },
    #[error("evolution time must be nonnegative, got {value}")]
    InvalidTau { value: f64 },
    #[error("phase accuracy must be positive, got {value}")]
    InvalidEpsilon { value: f64 },
    #[error(
        "free evolution under-resolved: phase step {max_phase_step:.3} rad per cell \
         across the occupied band (limit pi); regrid to about {suggested_points} points"
    )]
    GridAliasing {
        max_phase_step: f64,
        suggested_points: usize,
    },
}

/// Fraction of the peak below which a momentum amplitude no longer counts
/// toward the occupied band used in the aliasing check.
const OCCUPIED_REL: f64 = 1e-12;

/// Free packet defined by momentum amplitudes on the centered grid
/// k_n = (n - N/2) dk, normalized as sum |f|^2 dk / 2 pi = 1.
#[derive(Debug, Clone)]
pub struct WavePacket {
    f: Vec<Complex64>,
    dk: f64,
    pub mass: f64,
    pub hbar: f64,
}

/// Position-space wave function on the matching centered grid
/// x_j = (j - N/2) dx with dx = 2 pi / (N dk).
#[derive(Debug, Clone)]
pub struct PositionWave {
    pub x0: f64,
    pub dx: f64,
    pub psi: Vec<Complex64>,
}

impl PositionWave {
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn norm(&self) -> f64 {
        (self.psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dx).sqrt()
    }

    /// L2 distance to another wave on the same grid.
    pub fn distance(&self, other: &PositionWave) -> f64 {
        (self
            .psi
            .iter()
            .zip(other.psi.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * self.dx)
            .sqrt()
    }
}

impl WavePacket {
    pub fn new(f: Vec<Complex64>, dk: f64, mass: f64, hbar: f64) -> Result<Self, MirrorsError> {
        let n = f.len();
        if n < 4 || n % 2 != 0 {
            return Err(MirrorsError::GridSizeInvalid { n });
        }
        if !(dk > 0.0) {
            return Err(MirrorsError::InvalidGridStep { value: dk });
        }
        if !(mass > 0.0) {
            return Err(MirrorsError::MassNotPositive { value: mass });
        }
        if !(hbar > 0.0) {
            return Err(MirrorsError::HbarNotPositive { value: hbar });
        }
        let norm = f.iter().map(|a| a.norm_sqr()).sum::<f64>() * dk / (2.0 * PI);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(MirrorsError::NotNormalized { norm });
        }
        Ok(WavePacket { f, dk, mass, hbar })
    }

    /// Gaussian f(k) = C exp(-k^2 sigma_x^2) on an n-point grid whose
    /// position spacing is dx; mass and hbar 1.
    pub fn gaussian(n: usize, dx: f64, sigma_x: f64) -> Result<Self, MirrorsError> {
        if n < 4 || n % 2 != 0 {
            return Err(MirrorsError::GridSizeInvalid { n });
        }
        if !(dx > 0.0) {
            return Err(MirrorsError::InvalidGridStep { value: dx });
        }
        let dk = 2.0 * PI / (n as f64 * dx);
        let mut f: Vec<Complex64> = (0..n)
            .map(|i| {
                let k = (i as f64 - (n / 2) as f64) * dk;
                Complex64::new((-k * k * sigma_x * sigma_x).exp(), 0.0)
            })
            .collect();
        let norm = (f.iter().map(|a| a.norm_sqr()).sum::<f64>() * dk / (2.0 * PI)).sqrt();
        for a in &mut f {
            *a /= norm;
        }
        WavePacket::new(f, dk, 1.0, 1.0)
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / (self.n() as f64 * self.dk)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.f
    }

    pub fn k(&self, i: usize) -> f64 {
        (i as f64 - (self.n() / 2) as f64) * self.dk
    }

    /// Same grid and constants, different amplitudes.
    pub fn with_amplitudes(&self, f: Vec<Complex64>) -> Result<Self, MirrorsError> {
        WavePacket::new(f, self.dk, self.mass, self.hbar)
    }

    /// Largest |k| carrying more than a relative floor of amplitude.
    fn occupied_k_max(&self) -> f64 {
        let peak = self.f.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let floor = OCCUPIED_REL * peak;
        (0..self.n())
            .filter(|&i| self.f[i].norm() > floor)
            .map(|i| self.k(i).abs())
            .fold(0.0, f64::max)
    }

    /// psi_j = dk/2pi (-1)^j e^{i pi N/2} IDFT[(-1)^n f_n]_j, the centered
    /// continuum synthesis written through the plain DFT.
    fn synth(&self, f_mod: &[Complex64]) -> PositionWave {
        let n = self.n();
        let parity = if n % 4 == 0 { 1.0 } else { -1.0 };
        let mut buf: Vec<Complex64> = f_mod
            .iter()
            .enumerate()
            .map(|(i, a)| if i % 2 == 0 { *a } else { -*a })
            .collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let dx = self.dx();
        let scale = self.dk / (2.0 * PI) * parity;
        let psi = buf
            .into_iter()
            .enumerate()
            .map(|(j, v)| v * scale * if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        PositionWave {
            x0: -((n / 2) as f64) * dx,
            dx,
            psi,
        }
    }

    /// Inverse of [`synth`]: momentum amplitudes of a position wave on the
    /// matching grid.
    pub fn analyze(&self, wave: &PositionWave) -> Vec<Complex64> {
        let n = self.n();
        let parity = if n % 4 == 0 { 1.0 } else { -1.0 };
        let mut buf: Vec<Complex64> = wave
            .psi
            .iter()
            .enumerate()
            .map(|(j, a)| if j % 2 == 0 { *a } else { -*a })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = wave.dx * parity;
        buf.into_iter()
            .enumerate()
            .map(|(i, v)| v * scale * if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// The packet at time zero.
    pub fn position_wave(&self) -> PositionWave {
        self.synth(&self.f)
    }
}

/// Exact free evolution: multiply each amplitude by e^{-i hbar k^2 tau/2m}
/// and synthesize. Fails when the kinetic phase changes by more than pi per
/// grid cell anywhere in the occupied band; the suggested point count
/// restores resolution at the same position spacing.
pub fn evolve_free(packet: &WavePacket, tau: f64) -> Result<PositionWave, MirrorsError> {
    evolve_banded(packet, tau, packet.occupied_k_max())
}

/// Evolution with the aliasing check taken against a caller-supplied band
/// rather than the packet's own spectrum.
fn evolve_banded(
    packet: &WavePacket,
    tau: f64,
    k_occ: f64,
) -> Result<PositionWave, MirrorsError> {
    if !(tau >= 0.0) {
        return Err(MirrorsError::InvalidTau { value: tau });
    }
    let max_phase_step = packet.hbar * k_occ * tau * packet.dk / packet.mass;
    if max_phase_step > PI {
        return Err(MirrorsError::GridAliasing {
            max_phase_step,
            suggested_points: (packet.n() as f64 * max_phase_step / PI).ceil() as usize,
        });
    }
    let f_mod: Vec<Complex64> = packet
        .f
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let k = packet.k(i);
            a * Complex64::from_polar(1.0, -packet.hbar * k * k * tau / (2.0 * packet.mass))
        })
        .collect();
    Ok(packet.synth(&f_mod))
}

/// Mirror positions (interval centers), the covered span, and the plan
/// parameters that fix the residual phase.
#[derive(Debug, Clone)]
pub struct MirrorPlan {
    pub positions: Vec<f64>,
    pub epsilon: f64,
    pub tau: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl MirrorPlan {
    pub fn count(&self) -> usize {
        self.positions.len()
    }

    /// Largest residual phase anywhere in the covered span: the quadratic
    /// phase at the interval edges, half an interval from the mirror.
    pub fn max_alpha(&self) -> f64 {
        let half = 0.5 * (self.x_hi - self.x_lo) / self.count() as f64;
        self.mass * half * half / (2.0 * self.hbar * self.tau)
    }
}

/// Untreated probability outside the mirror-covered span. Kept far below
/// epsilon^2 so the tail never dominates the refocus deficit; floored so
/// large epsilon does not demand absurd coverage.
fn coverage_tail(epsilon: f64) -> f64 {
    (epsilon.powi(4) / 48.0).min(1e-9)
}

/// Plans the mirror array for reversing `packet` after free time `tau`:
/// evolves the packet, finds the span holding all but a sliver of the
/// probability, and tiles it with intervals no wider than
/// 2 sqrt(2 hbar tau epsilon / m), one mirror per interval center.
pub fn plan_mirrors(
    packet: &WavePacket,
    tau: f64,
    epsilon: f64,
) -> Result<MirrorPlan, MirrorsError> {
    let wave = evolve_free(packet, tau)?;
    plan_for_wave(packet, &wave, tau, epsilon)
}

fn plan_for_wave(
    packet: &WavePacket,
    wave: &PositionWave,
    tau: f64,
    epsilon: f64,
) -> Result<MirrorPlan, MirrorsError> {
    if !(tau > 0.0) {
        return Err(MirrorsError::InvalidTau { value: tau });
    }
    if !(epsilon > 0.0) {
        return Err(MirrorsError::InvalidEpsilon { value: epsilon });
    }
    let tail = coverage_tail(epsilon);
    let total: f64 = wave.psi.iter().map(|a| a.norm_sqr()).sum();
    let mut cum = 0.0;
    let mut i_lo = 0;
    let mut i_hi = wave.psi.len() - 1;
    let mut found_lo = false;
    for (j, a) in wave.psi.iter().enumerate() {
        cum += a.norm_sqr() / total;
        if !found_lo && cum >= tail / 2.0 {
            i_lo = j;
            found_lo = true;
        }
        if cum >= 1.0 - tail / 2.0 {
            i_hi = j;
            break;
        }
    }
    let (x_lo, x_hi) = (wave.x(i_lo), wave.x(i_hi));
    let width = 2.0 * (2.0 * packet.hbar * tau * epsilon / packet.mass).sqrt();
    let count = ((x_hi - x_lo) / width).ceil().max(1.0) as usize;
    let pitch = (x_hi - x_lo) / count as f64;
    let positions = (0..count)
        .map(|k| x_lo + (k as f64 + 0.5) * pitch)
        .collect();
    Ok(MirrorPlan {
        positions,
        epsilon,
        tau,
        x_lo,
        x_hi,
        mass: packet.mass,
        hbar: packet.hbar,
    })
}

/// The net reversal operator of the mirror array: inside the covered span
/// the wave is conjugated and the quadratic residual phase around the
/// nearest mirror is left behind; outside it the wave passes untouched.
pub fn apply_approximate_conjugation(wave: &PositionWave, plan: &MirrorPlan) -> PositionWave {
    let mut out = wave.clone();
    for j in 0..wave.psi.len() {
        let x = wave.x(j);
        if x < plan.x_lo || x > plan.x_hi {
            continue;
        }
        let i = plan.positions.partition_point(|&p| p < x);
        let nearest = match (i.checked_sub(1), plan.positions.get(i)) {
            (Some(a), Some(&b)) => {
                let pa = plan.positions[a];
                if (x - pa).abs() <= (b - x).abs() {
                    pa
                } else {
                    b
                }
            }
            (Some(a), None) => plan.positions[a],
            (None, Some(&b)) => b,
            (None, None) => unreachable!("plans hold at least one mirror"),
        };
        let alpha = plan.mass * (x - nearest) * (x - nearest) / (2.0 * plan.hbar * plan.tau);
        out.psi[j] = wave.psi[j].conj() * Complex64::from_polar(1.0, alpha);
    }
    out
}

/// Squared overlap with the conjugated initial packet after the full
/// reverse-and-refocus cycle, with the diagnostics the scaling scans need.
#[derive(Debug, Clone)]
pub struct RefocusReport {
    pub fidelity: f64,
    pub mirrors: usize,
    pub max_alpha: f64,
    /// ||psi_tilde - psi*|| over the grid, bounded by max_alpha.
    pub conjugation_distance: f64,
}

/// evolve -> mirror-array conjugation -> evolve, scored against the
/// conjugated initial state. Both legs take the aliasing band from the
/// source packet: conjugation mirrors the spectrum in place, and the hard
/// window edges only scatter weight below the coverage tail across the
/// grid.
pub fn refocus_report(
    packet: &WavePacket,
    tau: f64,
    epsilon: f64,
) -> Result<RefocusReport, MirrorsError> {
    let band = packet.occupied_k_max();
    let spread = evolve_banded(packet, tau, band)?;
    let plan = plan_for_wave(packet, &spread, tau, epsilon)?;
    let conjugated = apply_approximate_conjugation(&spread, &plan);
    let exact = PositionWave {
        x0: spread.x0,
        dx: spread.dx,
        psi: spread.psi.iter().map(|a| a.conj()).collect(),
    };
    let distance = conjugated.distance(&exact);
    let refocused = evolve_banded(
        &packet.with_amplitudes(packet.analyze(&conjugated))?,
        tau,
        band,
    )?;
    Ok(RefocusReport {
        fidelity: overlap_with_conjugated_initial(packet, &refocused),
        mirrors: plan.count(),
        max_alpha: plan.max_alpha(),
        conjugation_distance: distance,
    })
}

pub fn refocus_fidelity(
    packet: &WavePacket,
    tau: f64,
    epsilon: f64,
) -> Result<f64, MirrorsError> {
    Ok(refocus_report(packet, tau, epsilon)?.fidelity)
}

/// Reference run with the whole wave conjugated exactly; up to roundoff the
/// cycle is perfect time reversal.
pub fn refocus_fidelity_exact(packet: &WavePacket, tau: f64) -> Result<f64, MirrorsError> {
    let band = packet.occupied_k_max();
    let spread = evolve_banded(packet, tau, band)?;
    let conjugated = PositionWave {
        x0: spread.x0,
        dx: spread.dx,
        psi: spread.psi.iter().map(|a| a.conj()).collect(),
    };
    let refocused = evolve_banded(
        &packet.with_amplitudes(packet.analyze(&conjugated))?,
        tau,
        band,
    )?;
    Ok(overlap_with_conjugated_initial(packet, &refocused))
}

/// |<psi_0^* | psi>|^2 on the grid.
fn overlap_with_conjugated_initial(packet: &WavePacket, wave: &PositionWave) -> f64 {
    let psi0 = packet.position_wave();
    let overlap: Complex64 = psi0
        .psi
        .iter()
        .zip(wave.psi.iter())
        .map(|(a, b)| a * b)
        .sum::<Complex64>()
        * psi0.dx;
    overlap.norm_sqr().min(1.0 + 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_packet() -> WavePacket {
        WavePacket::gaussian(16384, 0.4, 1.0).unwrap()
    }

    #[test]
    fn synthesis_round_trips_through_analysis() {
        let pk = reference_packet();
        let wave = pk.position_wave();
        assert!((wave.norm() - 1.0).abs() < 1e-10);
        let back = pk.analyze(&wave);
        let err = back
            .iter()
            .zip(pk.amplitudes().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "round trip error {err}");
    }

    #[test]
    fn zero_time_evolution_is_plain_synthesis() {
        let pk = reference_packet();
        let evolved = evolve_free(&pk, 0.0).unwrap();
        let direct = pk.position_wave();
        assert_eq!(evolved.distance(&direct), 0.0);
    }

    #[test]
    fn evolution_preserves_norm_and_inner_products() {
        let a = WavePacket::gaussian(4096, 0.4, 1.0).unwrap();
        let b = WavePacket::gaussian(4096, 0.4, 1.6).unwrap();
        let dot = |u: &PositionWave, v: &PositionWave| -> Complex64 {
            u.psi
                .iter()
                .zip(v.psi.iter())
                .map(|(x, y)| x.conj() * y)
                .sum::<Complex64>()
                * u.dx
        };
        let before = dot(&a.position_wave(), &b.position_wave());
        for tau in [5.0, 20.0, 60.0] {
            let ea = evolve_free(&a, tau).unwrap();
            let eb = evolve_free(&b, tau).unwrap();
            assert!((ea.norm() - 1.0).abs() < 1e-10, "tau {tau}");
            assert!((dot(&ea, &eb) - before).norm() < 1e-10, "tau {tau}");
        }
    }

    #[test]
    fn spread_packet_approaches_momentum_image() {
        // |psi(x, tau)| -> |f(x m / hbar tau)| sqrt(m / 2 pi hbar tau).
        let pk = reference_packet();
        let deviation = |tau: f64| -> f64 {
            let wave = evolve_free(&pk, tau).unwrap();
            let c = pk.amplitudes()[pk.n() / 2].norm();
            wave.psi
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    let kappa = wave.x(j) / tau;
                    let env = c * (-kappa * kappa).exp() / (2.0 * PI * tau).sqrt();
                    (a.norm() - env).powi(2) * wave.dx
                })
                .sum::<f64>()
                .sqrt()
        };
        let (d100, d300) = (deviation(100.0), deviation(300.0));
        assert!(d300 < d100, "deviation grew: {d100} -> {d300}");
        assert!(d300 < 0.05, "asymptotics not reached: {d300}");
    }

    #[test]
    fn coarse_grid_reports_aliasing_with_suggestion() {
        let pk = WavePacket::gaussian(256, 0.4, 1.0).unwrap();
        match evolve_free(&pk, 500.0) {
            Err(MirrorsError::GridAliasing {
                max_phase_step,
                suggested_points,
            }) => {
                assert!(max_phase_step > PI);
                assert!(suggested_points > 256);
            }
            other => panic!("expected GridAliasing, got {other:?}"),
        }
        // The occupied band, not the grid edge, decides: the same physical
        // packet on a finer grid evolves fine.
        assert!(evolve_free(&reference_packet(), 500.0).is_ok());
    }

    #[test]
    fn refocus_survives_window_edge_leakage() {
        // Hard window edges put broadband dust above the relative amplitude
        // floor; the report must still judge aliasing on the packet band.
        let report = refocus_report(&reference_packet(), 500.0, 0.1).unwrap();
        assert_eq!(report.mirrors, 153);
        assert!(report.fidelity > 0.9, "fidelity {}", report.fidelity);
    }

    #[test]
    fn mirror_count_scan_over_time() {
        let pk = reference_packet();
        let taus = [50.0, 80.0, 125.0, 200.0, 320.0, 500.0];
        let expect = [49usize, 62, 77, 97, 123, 153];
        let mut counts = Vec::new();
        for (&tau, &want) in taus.iter().zip(expect.iter()) {
            let plan = plan_mirrors(&pk, tau, 0.1).unwrap();
            assert_eq!(plan.count(), want, "tau = {tau}");
            counts.push(plan.count());
        }
        let slope = log_slope(&taus, &counts);
        assert!((slope - 0.5).abs() <= 0.1, "N vs tau slope {slope}");
    }

    #[test]
    fn mirror_count_scan_over_epsilon() {
        let pk = reference_packet();
        let epss = [0.4, 0.2, 0.1, 0.05];
        let expect = [49usize, 69, 97, 137];
        let mut counts = Vec::new();
        for (&eps, &want) in epss.iter().zip(expect.iter()) {
            let plan = plan_mirrors(&pk, 200.0, eps).unwrap();
            assert_eq!(plan.count(), want, "eps = {eps}");
            counts.push(plan.count());
        }
        let slope = log_slope(&epss, &counts);
        assert!((slope + 0.5).abs() <= 0.1, "N vs eps slope {slope}");
    }

    fn log_slope(xs: &[f64], ns: &[usize]) -> f64 {
        let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let ly: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let n = lx.len() as f64;
        let (sx, sy) = (lx.iter().sum::<f64>(), ly.iter().sum::<f64>());
        let sxx: f64 = lx.iter().map(|x| x * x).sum();
        let sxy: f64 = lx.iter().zip(ly.iter()).map(|(x, y)| x * y).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn doubling_time_or_precision_doubles_mirrors() {
        let pk = reference_packet();
        let base = plan_mirrors(&pk, 50.0, 0.1).unwrap().count() as f64;
        let quad_tau = plan_mirrors(&pk, 200.0, 0.1).unwrap().count() as f64;
        assert!((quad_tau / base - 2.0).abs() < 0.4, "tau x4: {base} -> {quad_tau}");
        let quarter_eps = plan_mirrors(&pk, 50.0, 0.025).unwrap().count() as f64;
        assert!(
            (quarter_eps / base - 2.0).abs() < 0.4,
            "eps /4: {base} -> {quarter_eps}"
        );
    }

    #[test]
    fn huge_epsilon_needs_one_mirror() {
        let pk = reference_packet();
        let plan = plan_mirrors(&pk, 50.0, 1000.0).unwrap();
        assert_eq!(plan.count(), 1);
    }

    #[test]
    fn residual_phase_stays_under_epsilon() {
        let pk = reference_packet();
        for eps in [0.4, 0.2, 0.1, 0.05] {
            let plan = plan_mirrors(&pk, 200.0, eps).unwrap();
            assert!(
                plan.max_alpha() <= eps + 1e-12,
                "eps {eps}: max alpha {}",
                plan.max_alpha()
            );
        }
    }

    #[test]
    fn conjugation_distance_bounded_by_epsilon() {
        let pk = reference_packet();
        let expect = [0.173, 0.0875, 0.0443, 0.0222];
        for (&eps, &want) in [0.4, 0.2, 0.1, 0.05].iter().zip(expect.iter()) {
            let report = refocus_report(&pk, 200.0, eps).unwrap();
            assert!(
                report.conjugation_distance <= eps,
                "eps {eps}: distance {}",
                report.conjugation_distance
            );
            assert!(
                (report.conjugation_distance - want).abs() < 5e-4,
                "eps {eps}: distance {} vs frozen {want}",
                report.conjugation_distance
            );
        }
    }

    #[test]
    fn refocus_deficit_scales_quadratically() {
        let pk = reference_packet();
        let frozen = [1.333e-2, 3.406e-3, 8.727e-4, 2.195e-4];
        let epss = [0.4, 0.2, 0.1, 0.05];
        let mut prev_deficit = f64::INFINITY;
        for (&eps, &want) in epss.iter().zip(frozen.iter()) {
            let f = refocus_fidelity(&pk, 200.0, eps).unwrap();
            let deficit = 1.0 - f;
            assert!(
                (deficit / want - 1.0).abs() < 5e-3,
                "eps {eps}: 1-F = {deficit} vs frozen {want}"
            );
            assert!(deficit <= 0.1 * eps * eps, "eps {eps}: deficit {deficit}");
            assert!(deficit <= prev_deficit, "deficit not monotone at eps {eps}");
            prev_deficit = deficit;
        }
    }

    #[test]
    fn exact_conjugation_refocuses_perfectly() {
        let pk = reference_packet();
        let f = refocus_fidelity_exact(&pk, 200.0).unwrap();
        assert!(f >= 1.0 - 1e-8, "fidelity {f}");
    }

    #[test]
    fn no_conjugation_means_no_refocus() {
        // Skipping the mirrors and just evolving onward leaves a packet
        // twice as spread, nearly orthogonal to the initial one.
        let pk = reference_packet();
        let spread = evolve_free(&pk, 400.0).unwrap();
        let f = overlap_with_conjugated_initial(&pk, &spread);
        assert!(f < 0.1, "fidelity {f}");
    }

    #[test]
    fn packet_validation() {
        assert!(matches!(
            WavePacket::gaussian(255, 0.4, 1.0),
            Err(MirrorsError::GridSizeInvalid { .. })
        ));
        assert!(matches!(
            WavePacket::gaussian(256, -0.4, 1.0),
            Err(MirrorsError::InvalidGridStep { .. })
        ));
        let f = vec![Complex64::new(1.0, 0.0); 256];
        assert!(matches!(
            WavePacket::new(f.clone(), 0.01, 1.0, 1.0),
            Err(MirrorsError::NotNormalized { .. })
        ));
        assert!(matches!(
            WavePacket::new(f.clone(), 0.01, -1.0, 1.0),
            Err(MirrorsError::MassNotPositive { .. })
        ));
        assert!(matches!(
            WavePacket::new(f, 0.01, 1.0, 0.0),
            Err(MirrorsError::HbarNotPositive { .. })
        ));
        let pk = reference_packet();
        assert!(matches!(
            evolve_free(&pk, -1.0),
            Err(MirrorsError::InvalidTau { value: _ })
        ));
        assert!(matches!(
            plan_mirrors(&pk, 50.0, 0.0),
            Err(MirrorsError::InvalidEpsilon { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn plans_respect_their_phase_budget(
            sigma in 0.7f64..2.0,
            tau in 10.0f64..80.0,
            eps in 0.05f64..0.5,
        ) {
            let pk = WavePacket::gaussian(4096, 0.4, sigma).unwrap();
            let wave = evolve_free(&pk, tau).unwrap();
            prop_assert!((wave.norm() - 1.0).abs() < 1e-10);
            let plan = plan_mirrors(&pk, tau, eps).unwrap();
            prop_assert!(plan.max_alpha() <= eps + 1e-12);
            let report = refocus_report(&pk, tau, eps).unwrap();
            prop_assert!(report.conjugation_distance <= eps);
            prop_assert!(report.fidelity > 1.0 - eps * eps);
        }
    }
}
