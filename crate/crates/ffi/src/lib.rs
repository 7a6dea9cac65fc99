//! C ABI over `maplab`.
//!
//! Every fallible entry point returns a `MaplabStatus`; results go through
//! out-pointers. On failure `maplab_last_error_message` describes the error
//! for the calling thread. Handles are opaque and owned by the caller, who
//! releases them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use maplab::convexify::{beta_star, big_f, ConvexifySpec};
use maplab::inverse::{minimize_om, om_value, Potential};
use maplab::sequence::{cm_norm_sq, derived_constants, lp_norm, Point, PriorSpec};
use maplab::smallball::{ball_mass, hilbert_ratio_bound, lp_ratio_bound, BallQuery};
use maplab::{DiagonalGaussian, Error};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaplabStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    NonFinite = 3,
    NullPointer = 4,
    Panic = 5,
}

/// Truncated diagonal Gaussian prior on ℓ^p.
pub struct MaplabPrior {
    inner: PriorSpec,
}

/// Data-misfit potential of a linear model with identity noise.
pub struct MaplabPotential {
    inner: Potential,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MaplabStatus {
    match e {
        Error::DimensionMismatch { .. } => MaplabStatus::DimensionMismatch,
        Error::NonFinite(_) => MaplabStatus::NonFinite,
        _ => MaplabStatus::InvalidArgument,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MaplabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MaplabStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed for `{name}`"));
            MaplabStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".to_string());
            MaplabStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn maplab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `sigmas` must point to `len` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn maplab_prior_new(
    p: f64,
    sigmas: *const f64,
    len: usize,
    out_prior: *mut *mut MaplabPrior,
) -> MaplabStatus {
    guard(|| {
        let s = slice(sigmas, len, "sigmas")?.to_vec();
        let dst = out(out_prior, "out_prior")?;
        let inner = PriorSpec::new(p, s)?;
        *dst = Box::into_raw(Box::new(MaplabPrior { inner }));
        Ok(())
    })
}

/// # Safety
/// `prior` must come from `maplab_prior_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn maplab_prior_free(prior: *mut MaplabPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

/// # Safety
/// `prior` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn maplab_prior_dim(prior: *const MaplabPrior) -> usize {
    prior.as_ref().map_or(0, |p| p.inner.dim())
}

/// # Safety
/// `prior` must be a live handle and the out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn maplab_derived_constants(
    prior: *const MaplabPrior,
    out_alpha: *mut f64,
    out_q: *mut f64,
    out_s: *mut f64,
) -> MaplabStatus {
    guard(|| {
        let c = derived_constants(&handle(prior, "prior")?.inner);
        *out(out_alpha, "out_alpha")? = c.alpha;
        *out(out_q, "out_q")? = c.q;
        *out(out_s, "out_s")? = c.s;
        Ok(())
    })
}

/// # Safety
/// `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_lp_norm(x: *const f64, len: usize, p: f64, out_value: *mut f64) -> MaplabStatus {
    guard(|| {
        let v = lp_norm(slice(x, len, "x")?, p)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Cameron-Martin norm Σ x_j²/σ_j².
///
/// # Safety
/// `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_cm_norm_sq(
    prior: *const MaplabPrior,
    x: *const f64,
    len: usize,
    out_value: *mut f64,
) -> MaplabStatus {
    guard(|| {
        let v = cm_norm_sq(slice(x, len, "x")?, &handle(prior, "prior")?.inner)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Φ(u) = ½‖y − A u‖² − ½‖y‖² for a row-major `rows × cols` matrix `a`.
///
/// # Safety
/// `a` must point to `rows * cols` doubles and `y` to `rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_potential_linear_new(
    rows: usize,
    cols: usize,
    a: *const f64,
    y: *const f64,
    out_potential: *mut *mut MaplabPotential,
) -> MaplabStatus {
    guard(|| {
        let entries = slice(a, rows * cols, "a")?;
        let data = slice(y, rows, "y")?.to_vec();
        let dst = out(out_potential, "out_potential")?;
        let inner = Potential::linear_identity_noise(DMatrix::from_row_slice(rows, cols, entries), data)?;
        *dst = Box::into_raw(Box::new(MaplabPotential { inner }));
        Ok(())
    })
}

/// # Safety
/// `potential` must come from `maplab_potential_linear_new`.
#[no_mangle]
pub unsafe extern "C" fn maplab_potential_free(potential: *mut MaplabPotential) {
    if !potential.is_null() {
        drop(Box::from_raw(potential));
    }
}

/// # Safety
/// `u` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_potential_phi(
    potential: *const MaplabPotential,
    u: *const f64,
    len: usize,
    out_value: *mut f64,
) -> MaplabStatus {
    guard(|| {
        let v = handle(potential, "potential")?.inner.phi(slice(u, len, "u")?)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// I(u) = Φ(u) + ½ Σ u_j²/σ_j².
///
/// # Safety
/// `u` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_om_value(
    potential: *const MaplabPotential,
    prior: *const MaplabPrior,
    u: *const f64,
    len: usize,
    out_value: *mut f64,
) -> MaplabStatus {
    guard(|| {
        let pot = &handle(potential, "potential")?.inner;
        let v = om_value(pot, &handle(prior, "prior")?.inner, slice(u, len, "u")?)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Minimizes I from `x0`; the minimizer is written to `out_minimizer`
/// (`len` doubles).
///
/// # Safety
/// `x0` and `out_minimizer` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_minimize_om(
    potential: *const MaplabPotential,
    prior: *const MaplabPrior,
    x0: *const f64,
    len: usize,
    tol: f64,
    max_iter: usize,
    out_minimizer: *mut f64,
    out_value: *mut f64,
    out_converged: *mut bool,
) -> MaplabStatus {
    guard(|| {
        let pot = &handle(potential, "potential")?.inner;
        let prior = &handle(prior, "prior")?.inner;
        let start = Point::new(slice(x0, len, "x0")?.to_vec());
        if out_minimizer.is_null() {
            return Err(Failure::Null("out_minimizer"));
        }
        let r = minimize_om(pot, prior, &start, tol, max_iter)?;
        std::slice::from_raw_parts_mut(out_minimizer, len).copy_from_slice(r.minimizer.coords());
        *out(out_value, "out_value")? = r.value;
        *out(out_converged, "out_converged")? = r.converged;
        Ok(())
    })
}

/// Prior mass of the ℓ^p ball of radius `delta` around `center`, by Monte
/// Carlo with `n` samples.
///
/// # Safety
/// `center` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_ball_mass(
    prior: *const MaplabPrior,
    center: *const f64,
    len: usize,
    delta: f64,
    n: usize,
    seed: u64,
    out_value: *mut f64,
    out_std_error: *mut f64,
) -> MaplabStatus {
    guard(|| {
        let prior = &handle(prior, "prior")?.inner;
        let g = DiagonalGaussian::from_prior(prior);
        let q = BallQuery::new(Point::new(slice(center, len, "center")?.to_vec()), delta, prior.p())?;
        let est = ball_mass(&g, &q, n, seed)?;
        *out(out_value, "out_value")? = est.value;
        *out(out_std_error, "out_std_error")? = est.std_error;
        Ok(())
    })
}

/// # Safety
/// `z` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_hilbert_ratio_bound(
    prior: *const MaplabPrior,
    z: *const f64,
    len: usize,
    delta: f64,
    n_index: usize,
    out_value: *mut f64,
) -> MaplabStatus {
    guard(|| {
        let v = hilbert_ratio_bound(&handle(prior, "prior")?.inner, slice(z, len, "z")?, delta, n_index)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// # Safety
/// `z` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_lp_ratio_bound(
    prior: *const MaplabPrior,
    z: *const f64,
    len: usize,
    delta: f64,
    k_index: usize,
    gamma: f64,
    out_value: *mut f64,
) -> MaplabStatus {
    guard(|| {
        let v = lp_ratio_bound(&handle(prior, "prior")?.inner, slice(z, len, "z")?, delta, k_index, gamma)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// f(x) = Σ x_j²/ρ_j² − β L(x).
///
/// # Safety
/// `rho` and `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_convexify_f(
    p: f64,
    rho: *const f64,
    len: usize,
    gamma: f64,
    beta: f64,
    x: *const f64,
    out_value: *mut f64,
) -> MaplabStatus {
    guard(|| {
        let spec = ConvexifySpec::new(p, slice(rho, len, "rho")?.to_vec(), gamma, beta)?;
        let v = big_f(&spec, slice(x, len, "x")?)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// β* = 2γ^{2−α} / (q ρ_1^α).
///
/// # Safety
/// `rho` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn maplab_beta_star(
    p: f64,
    rho: *const f64,
    len: usize,
    gamma: f64,
    out_value: *mut f64,
) -> MaplabStatus {
    guard(|| {
        let spec = ConvexifySpec::new(p, slice(rho, len, "rho")?.to_vec(), gamma, 0.0)?;
        *out(out_value, "out_value")? = beta_star(&spec);
        Ok(())
    })
}
