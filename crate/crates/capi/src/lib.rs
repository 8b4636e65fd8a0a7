//! C ABI for the core toolkit. Parameter sets travel as opaque handles,
//! every fallible call returns a `bykov_status` code, and the most recent
//! error message is kept per thread for retrieval with
//! [`bykov_last_error_message`]. The matching declarations live in
//! `include/bykov_lab.h`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CString};

use bykov_lab::integrate::{self, IntegratorConfig};
use bykov_lab::lyapunov::{self, LyapunovSettings};
use bykov_lab::model::{self, ModelParams};

/// Status codes shared with the header. 0 is success; everything else maps
/// a family of core errors.
pub const BYKOV_OK: c_int = 0;
pub const BYKOV_ERR_NULL_POINTER: c_int = 1;
pub const BYKOV_ERR_INVALID_PARAMS: c_int = 2;
pub const BYKOV_ERR_DOMAIN: c_int = 3;
pub const BYKOV_ERR_INTEGRATION: c_int = 4;
pub const BYKOV_ERR_LYAPUNOV: c_int = 5;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(code: c_int, message: impl std::fmt::Display) -> c_int {
    let text = CString::new(message.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
    code
}

/// Opaque parameter handle; only ever manipulated through pointers.
pub struct BykovParams {
    inner: ModelParams,
}

/// Mirror of the derived-constant bundle, laid out for C.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BykovConstants {
    pub c1: f64,
    pub c2: f64,
    pub e1: f64,
    pub e2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta: f64,
    pub k: f64,
    pub komega: f64,
}

/// Lyapunov spectrum summary, laid out for C.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BykovSpectrum {
    /// Tangent exponents, descending.
    pub lambda: [f64; 3],
    /// Transverse (radial) exponent; near -2 on the sphere.
    pub radial: f64,
    /// Count of exponents within or above the zero band.
    pub nonneg: c_int,
    /// 1 when the tail of the running estimates settled, else 0.
    pub converged: c_int,
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bykov_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Allocates a validated parameter set. On success `*out` owns the handle;
/// release it with `bykov_params_free`.
#[no_mangle]
pub unsafe extern "C" fn bykov_params_new(
    alpha: f64,
    beta: f64,
    omega: f64,
    tau1: f64,
    tau2: f64,
    kappa: f64,
    out: *mut *mut BykovParams,
) -> c_int {
    if out.is_null() {
        return fail(BYKOV_ERR_NULL_POINTER, "out pointer is null");
    }
    match ModelParams::new(alpha, beta, omega, tau1, tau2, kappa) {
        Ok(p) => {
            *out = Box::into_raw(Box::new(BykovParams { inner: p }));
            BYKOV_OK
        }
        Err(e) => fail(BYKOV_ERR_INVALID_PARAMS, e),
    }
}

/// Frees a handle from `bykov_params_new`. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn bykov_params_free(p: *mut BykovParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

unsafe fn params_ref<'a>(p: *const BykovParams) -> Result<&'a ModelParams, c_int> {
    p.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| fail(BYKOV_ERR_NULL_POINTER, "params handle is null"))
}

/// Evaluates the full 4D vector field. `x` and `out` are length-4 arrays.
#[no_mangle]
pub unsafe extern "C" fn bykov_eval_field_4d(
    p: *const BykovParams,
    x: *const f64,
    out: *mut f64,
) -> c_int {
    let params = match params_ref(p) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if x.is_null() || out.is_null() {
        return fail(BYKOV_ERR_NULL_POINTER, "state pointer is null");
    }
    let state: [f64; 4] = std::slice::from_raw_parts(x, 4).try_into().unwrap();
    let f = model::eval_field_4d(params, &state);
    std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&f);
    BYKOV_OK
}

/// Evaluates the planar reduced field. `z` and `out` are length-2 arrays.
#[no_mangle]
pub unsafe extern "C" fn bykov_eval_field_2d(
    p: *const BykovParams,
    z: *const f64,
    out: *mut f64,
) -> c_int {
    let params = match params_ref(p) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if z.is_null() || out.is_null() {
        return fail(BYKOV_ERR_NULL_POINTER, "state pointer is null");
    }
    let state: [f64; 2] = std::slice::from_raw_parts(z, 2).try_into().unwrap();
    let f = model::eval_field_2d(params, &state);
    std::slice::from_raw_parts_mut(out, 2).copy_from_slice(&f);
    BYKOV_OK
}

/// Fills the derived-constant bundle for a parameter set.
#[no_mangle]
pub unsafe extern "C" fn bykov_derived_constants(
    p: *const BykovParams,
    out: *mut BykovConstants,
) -> c_int {
    let params = match params_ref(p) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let Some(out) = out.as_mut() else {
        return fail(BYKOV_ERR_NULL_POINTER, "out pointer is null");
    };
    let c = model::derived_constants(params);
    *out = BykovConstants {
        c1: c.c1,
        c2: c.c2,
        e1: c.e1,
        e2: c.e2,
        delta1: c.delta1,
        delta2: c.delta2,
        delta: c.delta,
        k: c.k,
        komega: c.komega,
    };
    BYKOV_OK
}

/// Lower regime curve h1(komega); requires komega > 0.
#[no_mangle]
pub unsafe extern "C" fn bykov_h1_curve(komega: f64, out: *mut f64) -> c_int {
    curve(komega, out, model::h1_curve)
}

/// Upper regime curve h2(komega); requires komega > 0.
#[no_mangle]
pub unsafe extern "C" fn bykov_h2_curve(komega: f64, out: *mut f64) -> c_int {
    curve(komega, out, model::h2_curve)
}

unsafe fn curve(
    komega: f64,
    out: *mut f64,
    f: impl Fn(f64) -> Result<f64, bykov_lab::ModelError>,
) -> c_int {
    let Some(out) = out.as_mut() else {
        return fail(BYKOV_ERR_NULL_POINTER, "out pointer is null");
    };
    match f(komega) {
        Ok(v) => {
            *out = v;
            BYKOV_OK
        }
        Err(e) => fail(BYKOV_ERR_DOMAIN, e),
    }
}

/// Integrates the 4D flow from `x0` (length 4) to `t_end` with default
/// tolerances and writes the final state to `out` (length 4). Set
/// `project_to_sphere` nonzero to renormalize each accepted step.
#[no_mangle]
pub unsafe extern "C" fn bykov_integrate_final(
    p: *const BykovParams,
    x0: *const f64,
    t_end: f64,
    project_to_sphere: c_int,
    out: *mut f64,
) -> c_int {
    let params = match params_ref(p) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if x0.is_null() || out.is_null() {
        return fail(BYKOV_ERR_NULL_POINTER, "state pointer is null");
    }
    let start: [f64; 4] = std::slice::from_raw_parts(x0, 4).try_into().unwrap();
    let cfg = IntegratorConfig {
        project_to_sphere: project_to_sphere != 0,
        ..IntegratorConfig::default()
    };
    match integrate::propagate(
        &|x| model::eval_field_4d(params, x),
        start,
        0.0,
        t_end,
        &cfg,
        cfg.project_to_sphere,
        None,
        |_, _| {},
    ) {
        Ok((xf, _)) => {
            std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&xf);
            BYKOV_OK
        }
        Err(e) => fail(BYKOV_ERR_INTEGRATION, e),
    }
}

/// Computes the Lyapunov spectrum from `x0` (length 4) with the default
/// settings except for `t_total` (pass 0 or less to keep the default).
#[no_mangle]
pub unsafe extern "C" fn bykov_lyapunov_spectrum(
    p: *const BykovParams,
    x0: *const f64,
    t_total: f64,
    out: *mut BykovSpectrum,
) -> c_int {
    let params = match params_ref(p) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if x0.is_null() {
        return fail(BYKOV_ERR_NULL_POINTER, "state pointer is null");
    }
    let Some(out) = out.as_mut() else {
        return fail(BYKOV_ERR_NULL_POINTER, "out pointer is null");
    };
    let start: [f64; 4] = std::slice::from_raw_parts(x0, 4).try_into().unwrap();
    let cfg = IntegratorConfig::default();
    let mut set = LyapunovSettings::default();
    if t_total > 0.0 {
        set.t_total = t_total;
    }
    let s = match lyapunov::spectrum(params, start, &cfg, &set) {
        Ok(s) => s,
        Err(e) => return fail(BYKOV_ERR_LYAPUNOV, e),
    };
    let class = match lyapunov::classify(&s, set.zero_tol, true) {
        Ok(c) => c,
        Err(e) => return fail(BYKOV_ERR_LYAPUNOV, e),
    };
    *out = BykovSpectrum {
        lambda: s.exponents,
        radial: s.radial_exponent,
        nonneg: class.nonneg_count as c_int,
        converged: s.converged as c_int,
    };
    BYKOV_OK
}
