//! C ABI for the barrier-lab library.
//!
//! Conventions:
//! - Shapes are opaque handles created by `bl_shape_new` and released by
//!   `bl_shape_free`.
//! - Every fallible function returns an integer status: `BL_OK` (0) on
//!   success, `BL_ERR_PARAMETER` (2) for invalid input, `BL_ERR_NUMERIC` (3)
//!   for solver/quadrature failures, `BL_ERR_NULL` (4) for null pointers.
//! - Results are written through out-pointers only on success.
//! - `bl_last_error` copies the message of the most recent failure on the
//!   calling thread into a caller-supplied buffer (always NUL-terminated).

use barrier_lab::analytic1d::{flux_shape, stationary_profile_shape};
use barrier_lab::coefficients::{CutoffProfile, ModelParams, Shape};
use barrier_lab::error::BarrierError;
use barrier_lab::hitting::{hit_prob_membrane, HittingQuery};
use barrier_lab::membrane::{MembraneParams, StartPos};
use barrier_lab::sdepath::{exit_prob_exact_shape, mc_exit_left_xtilde_shape};
use libc::{c_char, size_t};
use std::cell::RefCell;

/// Success.
pub const BL_OK: i32 = 0;
/// Invalid parameter or domain error.
pub const BL_ERR_PARAMETER: i32 = 2;
/// Numeric failure (quadrature, solver, Monte Carlo setup).
pub const BL_ERR_NUMERIC: i32 = 3;
/// A required pointer argument was null.
pub const BL_ERR_NULL: i32 = 4;

/// Piecewise-power cutoff with wall layers.
pub const BL_PROFILE_PIECEWISE: i32 = 0;
/// Piecewise-power cutoff without wall layers.
pub const BL_PROFILE_PIECEWISE_BARE: i32 = 1;
/// Smooth arctan example profile.
pub const BL_PROFILE_ARCTAN: i32 = 2;
/// Quadratic model barrier (chibar = |x| / eps inside the core).
pub const BL_PROFILE_QUADRATIC: i32 = 3;
/// Constant profile; `chibar` gives the level.
pub const BL_PROFILE_CONSTANT: i32 = 4;

/// Start at an interior point given by `x`.
pub const BL_START_INTERIOR: i32 = 0;
/// Start on the positive side of the membrane (0+).
pub const BL_START_PLUS: i32 = 1;
/// Start on the negative side of the membrane (0-).
pub const BL_START_MINUS: i32 = 2;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.to_string());
}

fn fail(err: BarrierError) -> i32 {
    set_error(&err.to_string());
    match err.exit_code() {
        2 => BL_ERR_PARAMETER,
        _ => BL_ERR_NUMERIC,
    }
}

fn fail_null(what: &str) -> i32 {
    set_error(&format!("null pointer: {what}"));
    BL_ERR_NULL
}

/// Opaque diffusivity-shape handle.
pub struct BlShape {
    inner: Shape,
}

/// Copy the last error message on this thread into `buf` (capacity `len`,
/// always NUL-terminated, truncating if needed). Returns the untruncated
/// message length in bytes.
///
/// # Safety
/// `buf` must be valid for writes of `len` bytes (or null / len == 0, in
/// which case nothing is written).
#[no_mangle]
pub unsafe extern "C" fn bl_last_error(buf: *mut c_char, len: size_t) -> size_t {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a shape handle. `profile` is one of the `BL_PROFILE_*` constants;
/// `chibar` is used only by `BL_PROFILE_CONSTANT`. On success writes the
/// handle through `out` and returns `BL_OK`; the handle must be released
/// with `bl_shape_free`.
///
/// # Safety
/// `out` must be a valid pointer to a `*mut BlShape`.
#[no_mangle]
pub unsafe extern "C" fn bl_shape_new(
    eps: f64,
    kappa_eps: f64,
    kappa_t: f64,
    alpha: f64,
    k: f64,
    t_plus: f64,
    profile: i32,
    chibar: f64,
    out: *mut *mut BlShape,
) -> i32 {
    if out.is_null() {
        return fail_null("out");
    }
    let params = ModelParams {
        eps,
        kappa_eps,
        kappa_t,
        alpha,
        k_scale: k,
        t_plus,
    };
    let shape = match profile {
        BL_PROFILE_PIECEWISE => Shape::new(params, CutoffProfile::piecewise_power()),
        BL_PROFILE_PIECEWISE_BARE => Shape::new(params, CutoffProfile::piecewise_power_bare()),
        BL_PROFILE_ARCTAN => Shape::new(params, CutoffProfile::arctan_example()),
        BL_PROFILE_QUADRATIC => params.validate().map(|()| Shape::quadratic_model(params)),
        BL_PROFILE_CONSTANT => params.validate().map(|()| Shape::constant(params, chibar)),
        other => Err(BarrierError::parameter(format!(
            "unknown profile code {other}"
        ))),
    };
    match shape {
        Ok(s) => {
            *out = Box::into_raw(Box::new(BlShape { inner: s }));
            BL_OK
        }
        Err(e) => fail(e),
    }
}

/// Release a shape handle. Passing null is a no-op.
///
/// # Safety
/// `shape` must be null or a handle returned by `bl_shape_new` that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn bl_shape_free(shape: *mut BlShape) {
    if !shape.is_null() {
        drop(Box::from_raw(shape));
    }
}

unsafe fn shape_ref<'a>(shape: *const BlShape) -> Option<&'a Shape> {
    shape.as_ref().map(|s| &s.inner)
}

/// Evaluate the cutoff profile chibar at `x`.
///
/// # Safety
/// `shape` must be a live handle; `out` must be a valid f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn bl_chibar(shape: *const BlShape, x: f64, out: *mut f64) -> i32 {
    let Some(s) = shape_ref(shape) else {
        return fail_null("shape");
    };
    if out.is_null() {
        return fail_null("out");
    }
    *out = s.chibar(x);
    BL_OK
}

/// Evaluate the diffusivity a(x) = kappa_eps + kappa_T chibar(x)^2.
///
/// # Safety
/// `shape` must be a live handle; `out` must be a valid f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn bl_diffusivity(shape: *const BlShape, x: f64, out: *mut f64) -> i32 {
    let Some(s) = shape_ref(shape) else {
        return fail_null("shape");
    };
    if out.is_null() {
        return fail_null("out");
    }
    *out = s.diffusivity(x);
    BL_OK
}

/// Steady heat flux through the slab for the boundary data (T_plus, 0).
///
/// # Safety
/// `shape` must be a live handle; `out` must be a valid f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn bl_flux(shape: *const BlShape, out: *mut f64) -> i32 {
    let Some(s) = shape_ref(shape) else {
        return fail_null("shape");
    };
    if out.is_null() {
        return fail_null("out");
    }
    match flux_shape(s) {
        Ok(v) => {
            *out = v;
            BL_OK
        }
        Err(e) => fail(e),
    }
}

/// Stationary temperature at the `n` grid points `xs` (strictly increasing,
/// spanning exactly [-1, 1]); writes `n` temperatures to `out_temps`.
///
/// # Safety
/// `shape` must be a live handle; `xs` and `out_temps` must be valid for
/// `n` f64 reads / writes respectively.
#[no_mangle]
pub unsafe extern "C" fn bl_stationary_profile(
    shape: *const BlShape,
    xs: *const f64,
    n: size_t,
    out_temps: *mut f64,
) -> i32 {
    let Some(s) = shape_ref(shape) else {
        return fail_null("shape");
    };
    if xs.is_null() {
        return fail_null("xs");
    }
    if out_temps.is_null() {
        return fail_null("out_temps");
    }
    let grid = std::slice::from_raw_parts(xs, n);
    match stationary_profile_shape(s, grid) {
        Ok(prof) => {
            let dst = std::slice::from_raw_parts_mut(out_temps, n);
            dst.copy_from_slice(&prof.temps[..n]);
            BL_OK
        }
        Err(e) => fail(e),
    }
}

/// Exact probability that the diffusion started at `x0` exits `[x1, x2]`
/// through the left end, from the scale function.
///
/// # Safety
/// `shape` must be a live handle; `out` must be a valid f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn bl_exit_prob_exact(
    shape: *const BlShape,
    x0: f64,
    x1: f64,
    x2: f64,
    out: *mut f64,
) -> i32 {
    let Some(s) = shape_ref(shape) else {
        return fail_null("shape");
    };
    if out.is_null() {
        return fail_null("out");
    }
    match exit_prob_exact_shape(s, x0, x1, x2) {
        Ok(v) => {
            *out = v;
            BL_OK
        }
        Err(e) => fail(e),
    }
}

/// Monte Carlo exit-left frequency of the time-changed diffusion on
/// [-1, 1]. Writes the estimate and its standard error.
///
/// # Safety
/// `shape` must be a live handle; `out_estimate` and `out_std_error` must
/// be valid f64 pointers.
#[no_mangle]
pub unsafe extern "C" fn bl_mc_exit_left(
    shape: *const BlShape,
    x0: f64,
    n_paths: u64,
    h: f64,
    seed: u64,
    out_estimate: *mut f64,
    out_std_error: *mut f64,
) -> i32 {
    let Some(s) = shape_ref(shape) else {
        return fail_null("shape");
    };
    if out_estimate.is_null() || out_std_error.is_null() {
        return fail_null("out_estimate/out_std_error");
    }
    match mc_exit_left_xtilde_shape(s, x0, n_paths, h, seed) {
        Ok(summary) => {
            *out_estimate = summary.estimate;
            *out_std_error = summary.std_error;
            BL_OK
        }
        Err(e) => fail(e),
    }
}

/// Closed-form probability that semipermeable-membrane Brownian motion hits
/// `a` before `b`. `start_kind` is a `BL_START_*` constant; `start_x` is
/// read only for `BL_START_INTERIOR`.
///
/// # Safety
/// `out` must be a valid f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn bl_hit_prob_membrane(
    a: f64,
    b: f64,
    start_kind: i32,
    start_x: f64,
    beta_plus: f64,
    beta_minus: f64,
    out: *mut f64,
) -> i32 {
    if out.is_null() {
        return fail_null("out");
    }
    let start = match start_kind {
        BL_START_INTERIOR => StartPos::Interior(start_x),
        BL_START_PLUS => match StartPos::parse("+0") {
            Ok(s) => s,
            Err(e) => return fail(e),
        },
        BL_START_MINUS => match StartPos::parse("-0") {
            Ok(s) => s,
            Err(e) => return fail(e),
        },
        other => {
            return fail(BarrierError::parameter(format!(
                "unknown start kind {other}"
            )))
        }
    };
    let mp = match MembraneParams::new(beta_plus, beta_minus) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    match hit_prob_membrane(&HittingQuery { a, b, start, mp }) {
        Ok(v) => {
            *out = v;
            BL_OK
        }
        Err(e) => fail(e),
    }
}
