//! C ABI over the nsgeom diagnostics.
//!
//! Every entry point returns an [`NsgStatus`]. On failure a message is kept in
//! thread-local storage and can be read with [`nsg_last_error`]. Objects cross
//! the boundary as opaque handles that the caller releases with the matching
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nsgeom::fields::snapshot::{load_series, read_velocity, write_velocity, SnapshotError};
use nsgeom::fields::{curl, DiscSpec, FieldError, GridSpec, SnapshotSeries, VectorField};
use nsgeom::flux::{disc_flux_sampled, gamma_decay_profile, DecayOptions, FluxError, FluxIntegrand};
use nsgeom::geometry::{
    cone_deficiency, direction_field, stretching_factor_with, GeometryError, StretchMethod, StretchingOptions,
};
use nsgeom::quad::DiscQuadrature;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Computation = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsgStretchMethod {
    Quadrature = 0,
    Spectral = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsgFluxIntegrand {
    /// `|omega_3|`
    AbsOmega3 = 0,
    /// `sgn(omega_3) omega_3`
    Omega3Tilde = 1,
    /// `sqrt(omega_3^2 + 1)`
    FOmega3 = 2,
}

/// Double-cone fit of the vorticity directions above a threshold.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NsgCone {
    pub axis: [f64; 3],
    pub s: f64,
    pub delta: f64,
    /// Infinite when no cone exists.
    pub constant: f64,
    pub n_samples: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NsgStretching {
    pub direction: [f64; 3],
    pub pv: f64,
    pub pv_at_cut: f64,
    pub pv_at_double_cut: f64,
    pub direct: f64,
}

/// Opaque velocity or vorticity field on a periodic grid.
pub struct NsgField(VectorField);

/// Opaque time-ordered snapshot series.
pub struct NsgSeries(SnapshotSeries);

#[derive(Debug, thiserror::Error)]
enum Error {
    #[error("null pointer: {0}")]
    Null(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Computation(String),
}

impl Error {
    fn status(&self) -> NsgStatus {
        match self {
            Error::Null(_) => NsgStatus::NullPointer,
            Error::Invalid(_) => NsgStatus::InvalidArgument,
            Error::Io(_) => NsgStatus::Io,
            Error::Format(_) => NsgStatus::Format,
            Error::Computation(_) => NsgStatus::Computation,
        }
    }
}

impl From<SnapshotError> for Error {
    fn from(e: SnapshotError) -> Self {
        match e {
            SnapshotError::Io { .. } => Error::Io(e.to_string()),
            _ => Error::Format(e.to_string()),
        }
    }
}

impl From<FieldError> for Error {
    fn from(e: FieldError) -> Self {
        Error::Invalid(e.to_string())
    }
}

impl From<GeometryError> for Error {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Options(_) => Error::Invalid(e.to_string()),
            _ => Error::Computation(e.to_string()),
        }
    }
}

impl From<FluxError> for Error {
    fn from(e: FluxError) -> Self {
        match e {
            FluxError::InvalidParameter(_) | FluxError::Field(_) => Error::Invalid(e.to_string()),
            _ => Error::Computation(e.to_string()),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> NsgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NsgStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            e.status()
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            NsgStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Error> {
    if p.is_null() {
        return Err(Error::Null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Error::Invalid("path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn field_ref<'a>(h: *const NsgField, what: &'static str) -> Result<&'a VectorField, Error> {
    h.as_ref().map(|f| &f.0).ok_or(Error::Null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Error> {
    p.as_mut().ok_or(Error::Null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nsg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn nsg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a field from three component arrays of `n[0] n[1] n[2]` values each,
/// first index fastest.
///
/// # Safety
/// `n`, `len` point to 3 values; each component pointer to `n[0] n[1] n[2]` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsg_field_new(
    n: *const usize,
    len: *const f64,
    time: f64,
    v1: *const f64,
    v2: *const f64,
    v3: *const f64,
    out: *mut *mut NsgField,
) -> NsgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if n.is_null() || len.is_null() || v1.is_null() || v2.is_null() || v3.is_null() {
            return Err(Error::Null("grid or component"));
        }
        let n = [*n, *n.add(1), *n.add(2)];
        let len = [*len, *len.add(1), *len.add(2)];
        let grid = GridSpec::new(n, len)?;
        let copy = |p: *const f64| std::slice::from_raw_parts(p, grid.len()).to_vec();
        let v = VectorField::new(grid, [copy(v1), copy(v2), copy(v3)], time)?;
        *out = Box::into_raw(Box::new(NsgField(v)));
        Ok(())
    })
}

/// Reads a velocity snapshot file.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nsg_field_read(path: *const c_char, out: *mut *mut NsgField) -> NsgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let v = read_velocity(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(NsgField(v)));
        Ok(())
    })
}

/// # Safety
/// `field` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nsg_field_write(field: *const NsgField, path: *const c_char) -> NsgStatus {
    guard(|| {
        let v = field_ref(field, "field")?;
        write_velocity(&path_arg(path)?, v)?;
        Ok(())
    })
}

/// # Safety
/// `field` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nsg_field_free(field: *mut NsgField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Grid counts, box lengths and time of a field. Any output may be NULL.
///
/// # Safety
/// `field` is a live handle; non-NULL `n`, `len` hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn nsg_field_shape(field: *const NsgField, n: *mut usize, len: *mut f64, time: *mut f64) -> NsgStatus {
    guard(|| {
        let v = field_ref(field, "field")?;
        for a in 0..3 {
            if !n.is_null() {
                *n.add(a) = v.grid.n[a];
            }
            if !len.is_null() {
                *len.add(a) = v.grid.len[a];
            }
        }
        if let Some(t) = time.as_mut() {
            *t = v.time;
        }
        Ok(())
    })
}

/// Copies component `c` (0, 1 or 2) into `buf`, which holds `cap` doubles.
///
/// # Safety
/// `field` is a live handle; `buf` holds `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsg_field_component(field: *const NsgField, c: usize, buf: *mut f64, cap: usize) -> NsgStatus {
    guard(|| {
        let v = field_ref(field, "field")?;
        if buf.is_null() {
            return Err(Error::Null("buf"));
        }
        if c > 2 {
            return Err(Error::Invalid(format!("component {c} out of range")));
        }
        let src = &v.components[c];
        if cap < src.len() {
            return Err(Error::Invalid(format!("buffer holds {cap} values, need {}", src.len())));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// Spectral curl; returns a new handle.
///
/// # Safety
/// `field` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nsg_field_curl(field: *const NsgField, out: *mut *mut NsgField) -> NsgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let w = curl(field_ref(field, "field")?)?;
        *out = Box::into_raw(Box::new(NsgField(w)));
        Ok(())
    })
}

/// Cone fit of the directions of `omega` where `|omega| > fraction max |omega|`.
///
/// # Safety
/// `omega` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nsg_cone_fit(omega: *const NsgField, fraction: f64, out: *mut NsgCone) -> NsgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let w = field_ref(omega, "omega")?;
        if !(fraction >= 0.0) {
            return Err(Error::Invalid(format!("fraction {fraction}")));
        }
        let fit = cone_deficiency(&direction_field(w, fraction * w.max_norm())?)?;
        *out = NsgCone {
            axis: fit.axis,
            s: fit.s,
            delta: fit.delta,
            constant: fit.constant,
            n_samples: fit.n_samples,
        };
        Ok(())
    })
}

/// Stretching factor at `x` with cut radius `rho_cut`.
///
/// # Safety
/// `omega` is a live handle; `x` holds 3 values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nsg_stretching(
    omega: *const NsgField,
    x: *const f64,
    rho_cut: f64,
    method: NsgStretchMethod,
    out: *mut NsgStretching,
) -> NsgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let w = field_ref(omega, "omega")?;
        if x.is_null() {
            return Err(Error::Null("x"));
        }
        let opts = StretchingOptions {
            method: match method {
                NsgStretchMethod::Quadrature => StretchMethod::Quadrature,
                NsgStretchMethod::Spectral => StretchMethod::Spectral,
            },
            ..StretchingOptions::default()
        };
        let s = stretching_factor_with(w, [*x, *x.add(1), *x.add(2)], rho_cut, &opts)?;
        *out = NsgStretching {
            direction: s.direction,
            pv: s.pv,
            pv_at_cut: s.pv_at_cut,
            pv_at_double_cut: s.pv_at_double_cut,
            direct: s.direct,
        };
        Ok(())
    })
}

/// Integral of a function of `omega_3` over the horizontal disc of radius `r`
/// at height `z` centered on `center`.
///
/// # Safety
/// `omega` is a live handle; `center` holds 2 values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nsg_disc_flux(
    omega: *const NsgField,
    center: *const f64,
    z: f64,
    r: f64,
    integrand: NsgFluxIntegrand,
    out: *mut f64,
) -> NsgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let w = field_ref(omega, "omega")?;
        if center.is_null() {
            return Err(Error::Null("center"));
        }
        let disc = DiscSpec::new(r, z, w.time, [*center, *center.add(1)])?;
        let integrand = match integrand {
            NsgFluxIntegrand::AbsOmega3 => FluxIntegrand::AbsOmega3,
            NsgFluxIntegrand::Omega3Tilde => FluxIntegrand::Omega3Tilde,
            NsgFluxIntegrand::FOmega3 => FluxIntegrand::FOmega3,
        };
        *out = disc_flux_sampled(w, &disc, integrand, &DiscQuadrature::default())?;
        Ok(())
    })
}

/// Loads every snapshot in a directory, ordered by time.
///
/// # Safety
/// `dir` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nsg_series_load(dir: *const c_char, out: *mut *mut NsgSeries) -> NsgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let s = load_series(&path_arg(dir)?)?;
        *out = Box::into_raw(Box::new(NsgSeries(s)));
        Ok(())
    })
}

/// # Safety
/// `series` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nsg_series_free(series: *mut NsgSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Number of snapshots and their first and last times. Any output may be NULL.
///
/// # Safety
/// `series` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn nsg_series_info(
    series: *const NsgSeries,
    len: *mut usize,
    t_first: *mut f64,
    t_last: *mut f64,
) -> NsgStatus {
    guard(|| {
        let s = &series.as_ref().ok_or(Error::Null("series"))?.0;
        let t = s.times();
        if let Some(l) = len.as_mut() {
            *l = s.len();
        }
        if let Some(a) = t_first.as_mut() {
            *a = t[0];
        }
        if let Some(b) = t_last.as_mut() {
            *b = t[t.len() - 1];
        }
        Ok(())
    })
}

/// `sup Gamma` over the cylinders of radius `r0 2^-m` ending at `(x0, t0)`,
/// `m = 0..levels`, written to `out[m]`.
///
/// # Safety
/// `series` is a live handle; `x0` holds 3 values; `out` holds `levels` doubles.
#[no_mangle]
pub unsafe extern "C" fn nsg_gamma_decay(
    series: *const NsgSeries,
    x0: *const f64,
    t0: f64,
    r0: f64,
    levels: usize,
    out: *mut f64,
) -> NsgStatus {
    guard(|| {
        let s = &series.as_ref().ok_or(Error::Null("series"))?.0;
        if x0.is_null() || out.is_null() {
            return Err(Error::Null("x0 or out"));
        }
        let p = gamma_decay_profile(s, [*x0, *x0.add(1), *x0.add(2)], t0, r0, levels, &DecayOptions::default())?;
        ptr::copy_nonoverlapping(p.sup_gamma.as_ptr(), out, p.sup_gamma.len());
        Ok(())
    })
}
