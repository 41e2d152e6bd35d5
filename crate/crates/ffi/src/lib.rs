//! C interface over the core library: opaque handles, integer status codes,
//! caller-owned output buffers. Every entry point is panic-safe; failures
//! leave a message retrievable with `entlab_last_error_message` until the
//! next call on the same thread.

use std::cell::RefCell;
use std::ffi::{CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};

use entlab::brems::{self, BremsParams, GridDensityMatrix};
use entlab::decoherence;
use entlab::mirrors::{MirrorsError, WavePacket, plan_mirrors, refocus_report};
use entlab::qstate::GrandState;
use entlab::walk1d::{
    ScattererSpec, SpinMode, WalkError, WalkScenario, entropy_bits, reverse_complete,
    reverse_incomplete, step,
};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EntlabStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    /// Term count passed the configured cap during evolution.
    StateExplosion = 3,
    /// The requested free evolution is not resolvable on this grid.
    GridAliasing = 4,
    Panic = 5,
}

/// Spin handling of the walk reservoir.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EntlabSpinMode {
    /// One spin per scatterer, revisited on every crossing.
    Persistent = 0,
    /// A new register spin on every scattering event.
    Fresh = 1,
}

/// Refocusing run summary.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct EntlabRefocusReport {
    pub fidelity: f64,
    pub mirrors: u64,
    pub max_alpha: f64,
    pub conjugation_distance: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let owned = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn fail(status: EntlabStatus, message: &str) -> EntlabStatus {
    set_error(message);
    status
}

fn walk_status(err: &WalkError) -> EntlabStatus {
    match err {
        WalkError::TooManyTerms { .. } | WalkError::StateExplosion { .. } => {
            EntlabStatus::StateExplosion
        }
        _ => EntlabStatus::InvalidArgument,
    }
}

fn mirrors_status(err: &MirrorsError) -> EntlabStatus {
    match err {
        MirrorsError::GridAliasing { .. } => EntlabStatus::GridAliasing,
        _ => EntlabStatus::InvalidArgument,
    }
}

/// Runs a body, converting panics into a status instead of unwinding into C.
fn guarded(body: impl FnOnce() -> EntlabStatus) -> EntlabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(EntlabStatus::Panic, &msg)
        }
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; never freed by the
/// caller.
#[no_mangle]
pub extern "C" fn entlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static null-terminated string; never freed.
#[no_mangle]
pub extern "C" fn entlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Discrete scatterer walk with live state: step, reverse, inspect.
pub struct EntlabWalk {
    scenario: WalkScenario,
    state: GrandState,
    tau: i64,
}

/// Creates a walk on a regular array with identical scatterers and the
/// particle starting in cell 0 moving right. On success writes the handle to
/// `out`; release with `entlab_walk_free`.
///
/// # Safety
/// `out` must be a valid pointer to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn entlab_walk_new_regular(
    transparency: f64,
    chi_ll: f64,
    chi_lr: f64,
    flip_angle: f64,
    spin_mode: EntlabSpinMode,
    horizon: u64,
    out: *mut *mut EntlabWalk,
) -> EntlabStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EntlabStatus::NullArgument, "out is null");
        }
        let template = match ScattererSpec::new(0.0, transparency, chi_ll, chi_lr) {
            Ok(t) => t.with_flip_angle(flip_angle),
            Err(e) => return fail(EntlabStatus::InvalidArgument, &e.to_string()),
        };
        let mode = match spin_mode {
            EntlabSpinMode::Persistent => SpinMode::Persistent,
            EntlabSpinMode::Fresh => SpinMode::FreshEachStep,
        };
        match WalkScenario::regular(&template, mode, horizon as usize) {
            Ok(scenario) => {
                let state = scenario.initial.clone();
                let walk = Box::new(EntlabWalk {
                    scenario,
                    state,
                    tau: 0,
                });
                unsafe { out.write(Box::into_raw(walk)) };
                EntlabStatus::Ok
            }
            Err(e) => fail(walk_status(&e), &e.to_string()),
        }
    })
}

/// Releases a walk handle. Null is accepted and ignored.
///
/// # Safety
/// `walk` must be null or a handle from `entlab_walk_new_regular` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn entlab_walk_free(walk: *mut EntlabWalk) {
    if !walk.is_null() {
        drop(unsafe { Box::from_raw(walk) });
    }
}

/// Advances the walk by one scattering step. Fails once the construction
/// horizon is exhausted.
///
/// # Safety
/// `walk` must be a live handle from `entlab_walk_new_regular`.
#[no_mangle]
pub unsafe extern "C" fn entlab_walk_step(walk: *mut EntlabWalk) -> EntlabStatus {
    guarded(|| {
        let Some(walk) = (unsafe { walk.as_mut() }) else {
            return fail(EntlabStatus::NullArgument, "walk is null");
        };
        if walk.tau >= walk.scenario.horizon as i64 {
            return fail(
                EntlabStatus::InvalidArgument,
                "horizon exhausted; rebuild with a larger one",
            );
        }
        match step(&walk.state, &walk.scenario, walk.tau) {
            Ok(next) => {
                walk.state = next;
                walk.tau += 1;
                EntlabStatus::Ok
            }
            Err(e) => fail(walk_status(&e), &e.to_string()),
        }
    })
}

/// Reverses the walk in place. `complete` true flips velocities, spins and
/// conjugates amplitudes, so continued stepping retraces the history;
/// false flips velocities and spins only.
///
/// # Safety
/// `walk` must be a live handle from `entlab_walk_new_regular`.
#[no_mangle]
pub unsafe extern "C" fn entlab_walk_reverse(walk: *mut EntlabWalk, complete: bool) -> EntlabStatus {
    guarded(|| {
        let Some(walk) = (unsafe { walk.as_mut() }) else {
            return fail(EntlabStatus::NullArgument, "walk is null");
        };
        let reversed = if complete {
            reverse_complete(&walk.state, &walk.scenario)
        } else {
            reverse_incomplete(&walk.state, &walk.scenario)
        };
        match reversed {
            Ok(next) => {
                walk.state = next;
                EntlabStatus::Ok
            }
            Err(e) => fail(walk_status(&e), &e.to_string()),
        }
    })
}

/// Number of steps taken so far.
///
/// # Safety
/// `walk` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn entlab_walk_tau(walk: *const EntlabWalk, out: *mut i64) -> EntlabStatus {
    guarded(|| {
        let (Some(walk), false) = (unsafe { walk.as_ref() }, out.is_null()) else {
            return fail(EntlabStatus::NullArgument, "walk or out is null");
        };
        unsafe { out.write(walk.tau) };
        EntlabStatus::Ok
    })
}

/// Entanglement entropy of the particle, in bits, at the current step.
///
/// # Safety
/// `walk` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn entlab_walk_entropy_bits(
    walk: *const EntlabWalk,
    out: *mut f64,
) -> EntlabStatus {
    guarded(|| {
        let (Some(walk), false) = (unsafe { walk.as_ref() }, out.is_null()) else {
            return fail(EntlabStatus::NullArgument, "walk or out is null");
        };
        match entropy_bits(&walk.state) {
            Ok(bits) => {
                unsafe { out.write(bits) };
                EntlabStatus::Ok
            }
            Err(e) => fail(walk_status(&e), &e.to_string()),
        }
    })
}

/// Number of stored basis terms in the grand state.
///
/// # Safety
/// `walk` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn entlab_walk_term_count(
    walk: *const EntlabWalk,
    out: *mut u64,
) -> EntlabStatus {
    guarded(|| {
        let (Some(walk), false) = (unsafe { walk.as_ref() }, out.is_null()) else {
            return fail(EntlabStatus::NullArgument, "walk or out is null");
        };
        unsafe { out.write(walk.state.term_count() as u64) };
        EntlabStatus::Ok
    })
}

/// Free wave packet on a uniform momentum grid.
pub struct EntlabPacket {
    packet: WavePacket,
}

/// Creates a Gaussian packet (mass and hbar 1) on an `n`-point grid with
/// position spacing `dx` and width `sigma_x`. Release with
/// `entlab_packet_free`.
///
/// # Safety
/// `out` must be a valid pointer to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn entlab_packet_new_gaussian(
    n: u64,
    dx: f64,
    sigma_x: f64,
    out: *mut *mut EntlabPacket,
) -> EntlabStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EntlabStatus::NullArgument, "out is null");
        }
        match WavePacket::gaussian(n as usize, dx, sigma_x) {
            Ok(packet) => {
                unsafe { out.write(Box::into_raw(Box::new(EntlabPacket { packet }))) };
                EntlabStatus::Ok
            }
            Err(e) => fail(mirrors_status(&e), &e.to_string()),
        }
    })
}

/// Releases a packet handle. Null is accepted and ignored.
///
/// # Safety
/// `packet` must be null or a handle from `entlab_packet_new_gaussian` that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn entlab_packet_free(packet: *mut EntlabPacket) {
    if !packet.is_null() {
        drop(unsafe { Box::from_raw(packet) });
    }
}

/// Plans the conjugating mirror array for spreading time `tau` and phase
/// budget `epsilon`: mirror count and the worst residual quadratic phase.
///
/// # Safety
/// `packet` must be a live handle; `out_count` and `out_max_alpha` must
/// point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn entlab_packet_plan_mirrors(
    packet: *const EntlabPacket,
    tau: f64,
    epsilon: f64,
    out_count: *mut u64,
    out_max_alpha: *mut f64,
) -> EntlabStatus {
    guarded(|| {
        let Some(handle) = (unsafe { packet.as_ref() }) else {
            return fail(EntlabStatus::NullArgument, "packet is null");
        };
        if out_count.is_null() || out_max_alpha.is_null() {
            return fail(EntlabStatus::NullArgument, "output pointer is null");
        }
        match plan_mirrors(&handle.packet, tau, epsilon) {
            Ok(plan) => {
                unsafe {
                    out_count.write(plan.count() as u64);
                    out_max_alpha.write(plan.max_alpha());
                }
                EntlabStatus::Ok
            }
            Err(e) => fail(mirrors_status(&e), &e.to_string()),
        }
    })
}

/// Runs the full refocusing cycle (spread, piecewise conjugation, spread)
/// and writes its summary.
///
/// # Safety
/// `packet` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn entlab_packet_refocus(
    packet: *const EntlabPacket,
    tau: f64,
    epsilon: f64,
    out: *mut EntlabRefocusReport,
) -> EntlabStatus {
    guarded(|| {
        let (Some(handle), false) = (unsafe { packet.as_ref() }, out.is_null()) else {
            return fail(EntlabStatus::NullArgument, "packet or out is null");
        };
        match refocus_report(&handle.packet, tau, epsilon) {
            Ok(report) => {
                unsafe {
                    out.write(EntlabRefocusReport {
                        fidelity: report.fidelity,
                        mirrors: report.mirrors as u64,
                        max_alpha: report.max_alpha,
                        conjugation_distance: report.conjugation_distance,
                    })
                };
                EntlabStatus::Ok
            }
            Err(e) => fail(mirrors_status(&e), &e.to_string()),
        }
    })
}

/// One randomized check of the Schur-product entropy bound: entropies in
/// bits before and after applying a random Gramian decoherence matrix to a
/// random state of the given dimension.
///
/// # Safety
/// `out_s_before` and `out_s_after` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn entlab_lemma_trial(
    dim: u64,
    seed: u64,
    out_s_before: *mut f64,
    out_s_after: *mut f64,
) -> EntlabStatus {
    guarded(|| {
        if out_s_before.is_null() || out_s_after.is_null() {
            return fail(EntlabStatus::NullArgument, "output pointer is null");
        }
        if dim < 2 {
            return fail(EntlabStatus::InvalidArgument, "dim must be at least 2");
        }
        match decoherence::lemma_trial(dim as usize, seed) {
            Ok(trial) => {
                unsafe {
                    out_s_before.write(trial.s_before_bits);
                    out_s_after.write(trial.s_after_bits);
                }
                EntlabStatus::Ok
            }
            Err(e) => fail(EntlabStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Radiation dephasing kernel at separation `u` (units of v_F over the
/// frequency cutoff) for a given strength prefactor; real and imaginary
/// parts written separately.
///
/// # Safety
/// `out_re` and `out_im` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn entlab_kernel_phi(
    u: f64,
    prefactor: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> EntlabStatus {
    guarded(|| {
        if out_re.is_null() || out_im.is_null() {
            return fail(EntlabStatus::NullArgument, "output pointer is null");
        }
        match BremsParams::with_prefactor(prefactor) {
            Ok(params) => {
                let phi = brems::kernel_phi(u, &params);
                unsafe {
                    out_re.write(phi.re);
                    out_im.write(phi.im);
                }
                EntlabStatus::Ok
            }
            Err(e) => fail(EntlabStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// Entropy in bits of a Gaussian packet under `iterations` repeated
/// applications of the radiation dephasing channel. Writes `iterations + 1`
/// values (the initial entropy first) into `out`.
///
/// # Safety
/// `out` must point to writable storage for at least `iterations + 1`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn entlab_brems_entropy_series(
    points: u64,
    dx: f64,
    sigma: f64,
    k0: f64,
    prefactor: f64,
    iterations: u64,
    out: *mut f64,
) -> EntlabStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EntlabStatus::NullArgument, "out is null");
        }
        let params = match BremsParams::with_prefactor(prefactor) {
            Ok(p) => p,
            Err(e) => return fail(EntlabStatus::InvalidArgument, &e.to_string()),
        };
        let rho = match GridDensityMatrix::gaussian(points as usize, dx, sigma, k0) {
            Ok(r) => r,
            Err(e) => return fail(EntlabStatus::InvalidArgument, &e.to_string()),
        };
        match brems::iterated_entropies(&rho, &params, iterations as usize) {
            Ok(series) => {
                unsafe {
                    std::ptr::copy_nonoverlapping(series.as_ptr(), out, series.len());
                }
                EntlabStatus::Ok
            }
            Err(e) => fail(EntlabStatus::InvalidArgument, &e.to_string()),
        }
    })
}
