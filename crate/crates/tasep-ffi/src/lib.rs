//! C ABI for the `tasep` crate: opaque parameter handles, status codes,
//! and buffer-filling density solvers.
//!
//! Conventions:
//! - Every function is panic-safe: unwinding is caught and reported as
//!   [`TasepStatus::InternalError`].
//! - Functions returning [`TasepStatus`] store a message for the most
//!   recent failure in thread-local storage; fetch it with
//!   [`tasep_last_error`].
//! - Density buffers are indexed by site (entry `0` is the rightmost
//!   site, the exit) and must hold exactly `n` doubles.
//! - The `order` argument selects the model: `0` the master equation,
//!   `1..n-1` the mean-field closure of that order, `n` the full-order
//!   correlation dynamics.
//!
//! The C header is generated into `include/tasep.h` at build time.

use libc::{c_char, size_t};
use std::cell::RefCell;
use std::ffi::CString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use tasep::correlations::uniform_embedding;
use tasep::dynamics::{integrate, steady_state, State, System, STEADY_TOL};
use tasep::lattice::IndexLayout;
use tasep::master::{
    build_generator, evolve_master, stationary_master, MasterState,
};
use tasep::ode::Tolerances;
use tasep::ssa::{simulate, SsaConfig};
use tasep::{Error, LatticeParams};

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TasepStatus {
    /// The call succeeded.
    Ok = 0,
    /// An argument was outside its documented domain (null pointer,
    /// wrong buffer length, bad rate, bad order).
    InvalidInput = 1,
    /// A solver exhausted its budget without reaching the tolerance.
    NonConvergence = 2,
    /// A state violated the consistency equations beyond tolerance.
    Inconsistent = 3,
    /// A reduced linear system was singular.
    Singular = 4,
    /// A validation suite failed.
    ValidationFailed = 5,
    /// A panic was caught at the boundary; this is a bug in the library.
    InternalError = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() =
            CString::new(sanitized).unwrap_or_else(|_| CString::default());
    });
}

fn status_of(err: &Error) -> TasepStatus {
    match err {
        Error::InvalidInput(_) => TasepStatus::InvalidInput,
        Error::NonConvergence { .. } | Error::StepSizeUnderflow { .. } => {
            TasepStatus::NonConvergence
        }
        Error::Inconsistent { .. } => TasepStatus::Inconsistent,
        Error::Singular(_) => TasepStatus::Singular,
        Error::ValidationFailed(_) => TasepStatus::ValidationFailed,
    }
}

fn fail(err: &Error) -> TasepStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn invalid(message: &str) -> TasepStatus {
    set_error(message);
    TasepStatus::InvalidInput
}

/// Runs a fallible body behind a panic guard.
fn guarded<F: FnOnce() -> TasepStatus>(body: F) -> TasepStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic caught at the FFI boundary");
            TasepStatus::InternalError
        }
    }
}

/// Opaque lattice-parameter handle.
pub struct TasepParams {
    inner: LatticeParams,
}

/// Message for the most recent failure on this thread, NUL-terminated.
/// The pointer stays valid until the next failing call on the same
/// thread. Never null.
#[no_mangle]
pub extern "C" fn tasep_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates a parameter handle for `n` sites with entry rate `alpha`,
/// exit rate `beta`, and the `n - 1` interior hop rates in `hop_rates`.
/// Returns null on invalid input (see [`tasep_last_error`]).
///
/// # Safety
/// `hop_rates` must point to `hop_len` readable doubles (it may be null
/// when `hop_len` is 0).
#[no_mangle]
pub unsafe extern "C" fn tasep_params_new(
    n: size_t,
    alpha: f64,
    beta: f64,
    hop_rates: *const f64,
    hop_len: size_t,
) -> *mut TasepParams {
    let result = catch_unwind(AssertUnwindSafe(|| {
        let hops: Vec<f64> = if hop_len == 0 {
            Vec::new()
        } else {
            if hop_rates.is_null() {
                set_error("hop_rates is null but hop_len is nonzero");
                return std::ptr::null_mut();
            }
            std::slice::from_raw_parts(hop_rates, hop_len).to_vec()
        };
        match LatticeParams::new(n, alpha, beta, hops) {
            Ok(inner) => {
                Box::into_raw(Box::new(TasepParams { inner }))
            }
            Err(e) => {
                set_error(&e.to_string());
                std::ptr::null_mut()
            }
        }
    }));
    match result {
        Ok(ptr) => ptr,
        Err(_) => {
            set_error("internal panic caught at the FFI boundary");
            std::ptr::null_mut()
        }
    }
}

/// Creates a parameter handle with a single uniform hop rate. Returns
/// null on invalid input (see [`tasep_last_error`]).
#[no_mangle]
pub extern "C" fn tasep_params_new_uniform(
    n: size_t,
    alpha: f64,
    beta: f64,
    hop: f64,
) -> *mut TasepParams {
    let hops = vec![hop; n.saturating_sub(1)];
    // Delegate through the safe constructor path.
    match LatticeParams::new(n, alpha, beta, hops) {
        Ok(inner) => Box::into_raw(Box::new(TasepParams { inner })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Frees a parameter handle. Null is ignored.
///
/// # Safety
/// `params` must be null or a pointer returned by a `tasep_params_new`
/// function that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn tasep_params_free(params: *mut TasepParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Number of sites of a parameter handle; 0 for null.
///
/// # Safety
/// `params` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tasep_params_n(
    params: *const TasepParams,
) -> size_t {
    if params.is_null() {
        return 0;
    }
    (*params).inner.n()
}

unsafe fn borrow_params<'a>(
    params: *const TasepParams,
) -> Result<&'a LatticeParams, TasepStatus> {
    if params.is_null() {
        return Err(invalid("params is null"));
    }
    Ok(&(*params).inner)
}

unsafe fn borrow_buffer<'a>(
    ptr: *mut f64,
    len: size_t,
    expected: usize,
    name: &str,
) -> Result<&'a mut [f64], TasepStatus> {
    if ptr.is_null() {
        return Err(invalid(&format!("{name} is null")));
    }
    if len != expected {
        return Err(invalid(&format!(
            "{name} has length {len}, expected {expected}"
        )));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// Writes the stationary density of the master equation into `density`
/// (`len` must equal the number of sites).
///
/// # Safety
/// `params` must be a live handle and `density` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tasep_stationary_density(
    params: *const TasepParams,
    density: *mut f64,
    len: size_t,
) -> TasepStatus {
    let params = match borrow_params(params) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let out = match borrow_buffer(density, len, params.n(), "density") {
        Ok(b) => b,
        Err(s) => return s,
    };
    guarded(|| {
        let a = match build_generator(params) {
            Ok(a) => a,
            Err(e) => return fail(&e),
        };
        match stationary_master(&a) {
            Ok(z) => {
                out.copy_from_slice(&z.density_profile());
                TasepStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

fn system_for(order: usize, n: usize) -> Result<System, Error> {
    if order == 0 {
        Ok(System::Master)
    } else if order == n {
        Ok(System::Full)
    } else if order < n {
        Ok(System::MeanField(order))
    } else {
        Err(Error::InvalidInput(format!(
            "order {order} exceeds the lattice size {n}"
        )))
    }
}

/// Solves for the steady state of the selected model (see the module
/// docs for `order`) from the uniform-distribution start and writes its
/// density into `density`. A non-positive `tol` selects the default
/// residual tolerance. `residual_norm` and `interior_margin` receive
/// solver diagnostics when non-null.
///
/// # Safety
/// `params` must be a live handle, `density` must point to `len`
/// writable doubles, and `residual_norm`/`interior_margin` must each be
/// null or point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn tasep_steady_density(
    params: *const TasepParams,
    order: size_t,
    tol: f64,
    density: *mut f64,
    len: size_t,
    residual_norm: *mut f64,
    interior_margin: *mut f64,
) -> TasepStatus {
    let params = match borrow_params(params) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let out = match borrow_buffer(density, len, params.n(), "density") {
        Ok(b) => b,
        Err(s) => return s,
    };
    let residual_norm = residual_norm.as_mut();
    let interior_margin = interior_margin.as_mut();
    guarded(move || {
        let n = params.n();
        let tol = if tol > 0.0 { tol } else { STEADY_TOL };
        let system = match system_for(order, n) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let x0 = match &system {
            System::Master => match MasterState::uniform(n) {
                Ok(z) => State::Master(z),
                Err(e) => return fail(&e),
            },
            System::Full | System::MeanField(_) => {
                let m = match &system {
                    System::Full => n,
                    System::MeanField(m) => *m,
                    System::Master => unreachable!(),
                };
                match IndexLayout::new(n, m) {
                    Ok(layout) => {
                        State::Correlations(uniform_embedding(layout))
                    }
                    Err(e) => return fail(&e),
                }
            }
        };
        match steady_state(&system, params, &x0, tol) {
            Ok(report) => {
                if let Some(slot) = residual_norm {
                    *slot = report.residual_norm;
                }
                if let Some(slot) = interior_margin {
                    *slot = report.interior_margin;
                }
                if !report.converged {
                    set_error(&format!(
                        "steady state of {} stalled at residual {:.3e}",
                        system.label(),
                        report.residual_norm
                    ));
                    return TasepStatus::NonConvergence;
                }
                out.copy_from_slice(
                    &report.equilibrium.density_profile(),
                );
                TasepStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Integrates the selected model (see the module docs for `order`) from
/// the uniform-distribution start to time `t_final` and writes the
/// density of the final state into `density`.
///
/// # Safety
/// `params` must be a live handle and `density` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tasep_evolve_density(
    params: *const TasepParams,
    order: size_t,
    t_final: f64,
    density: *mut f64,
    len: size_t,
) -> TasepStatus {
    let params = match borrow_params(params) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let out = match borrow_buffer(density, len, params.n(), "density") {
        Ok(b) => b,
        Err(s) => return s,
    };
    guarded(move || {
        let n = params.n();
        let system = match system_for(order, n) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let profile = match &system {
            System::Master => {
                let z0 = match MasterState::uniform(n) {
                    Ok(z) => z,
                    Err(e) => return fail(&e),
                };
                let a = match build_generator(params) {
                    Ok(a) => a,
                    Err(e) => return fail(&e),
                };
                match evolve_master(&a, &z0, t_final, Tolerances::default())
                {
                    Ok(z) => z.density_profile(),
                    Err(e) => return fail(&e),
                }
            }
            System::Full | System::MeanField(_) => {
                let m = match &system {
                    System::Full => n,
                    System::MeanField(m) => *m,
                    System::Master => unreachable!(),
                };
                let x0 = match IndexLayout::new(n, m) {
                    Ok(layout) => {
                        State::Correlations(uniform_embedding(layout))
                    }
                    Err(e) => return fail(&e),
                };
                match integrate(
                    &system,
                    params,
                    &x0,
                    t_final,
                    Tolerances::default(),
                ) {
                    Ok(traj) => traj.final_state().density_profile(),
                    Err(e) => return fail(&e),
                }
            }
        };
        out.copy_from_slice(&profile);
        TasepStatus::Ok
    })
}

/// Runs the Gillespie simulator with `samples` replicas and writes the
/// per-site density estimates and their standard errors. `stderr_out`
/// may be null when the standard errors are not needed.
///
/// # Safety
/// `params` must be a live handle, `density` must point to `len`
/// writable doubles, and `stderr_out` must be null or point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tasep_ssa_density(
    params: *const TasepParams,
    samples: size_t,
    t_burn: f64,
    t_measure: f64,
    seed: u64,
    density: *mut f64,
    stderr_out: *mut f64,
    len: size_t,
) -> TasepStatus {
    let params = match borrow_params(params) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let out = match borrow_buffer(density, len, params.n(), "density") {
        Ok(b) => b,
        Err(s) => return s,
    };
    let se_out = if stderr_out.is_null() {
        None
    } else {
        match borrow_buffer(stderr_out, len, params.n(), "stderr_out") {
            Ok(b) => Some(b),
            Err(s) => return s,
        }
    };
    guarded(move || {
        let config = SsaConfig {
            params: params.clone(),
            n_samples: samples,
            t_burn,
            t_measure,
            seed,
        };
        match simulate(&config) {
            Ok(estimate) => {
                out.copy_from_slice(&estimate.density);
                if let Some(se) = se_out {
                    se.copy_from_slice(&estimate.density_se);
                }
                TasepStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
