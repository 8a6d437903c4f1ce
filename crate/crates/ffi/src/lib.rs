//! C ABI over the homeospline core.
//!
//! Fitted objects are returned as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns an [`HsStatus`];
//! the message of the most recent failure on the calling thread is available
//! from [`hs_last_error_message`]. Planar points are passed as interleaved
//! `x0, y0, x1, y1, ...` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use homeospline::flow::{FlowMap, DEFAULT_STEPS};
use homeospline::monotone::{
    local_linear, monotonize, monotonize_observed, rule_bandwidth, Dataset, LambdaPolicy,
};
use homeospline::warp2d::{default_kernel_2d, match_homeo, LandmarkPairs};
use homeospline::{Error, Kernel, MonotoneEstimate, SplineFit, VectorSplineFit2D};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Input = 3,
    InsufficientData = 4,
    DegenerateDesign = 5,
    Numerical = 6,
    Divergence = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque monotone estimate.
pub struct HsMonotone {
    inner: MonotoneEstimate,
}

/// Opaque unconstrained 1D smoothing spline.
pub struct HsSpline {
    inner: SplineFit,
}

/// Opaque planar homeomorphic map.
pub struct HsFlow2d {
    inner: FlowMap<VectorSplineFit2D>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> HsStatus {
    match err {
        Error::Config(_) | Error::Json(_) => HsStatus::Config,
        Error::Input(_) => HsStatus::Input,
        Error::InsufficientData { .. } => HsStatus::InsufficientData,
        Error::DegenerateDesign(_) => HsStatus::DegenerateDesign,
        Error::Numerical { .. } => HsStatus::Numerical,
        Error::Divergence { .. } => HsStatus::Divergence,
        Error::Io(_) => HsStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer passed for {what}"));
            HsStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            HsStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn pairs(flat: &[f64]) -> Vec<[f64; 2]> {
    flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

fn kernel_1d(sigma: f64, x: &[f64]) -> Result<Kernel, Error> {
    if sigma > 0.0 {
        Kernel::gaussian(sigma)
    } else {
        Kernel::default_for(x)
    }
}

/// Message of the last failure on this thread; empty when none. Valid until the next call on the thread.
#[no_mangle]
pub extern "C" fn hs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fits a monotone increasing estimate to `n` points.
///
/// `sigma <= 0` selects the default Gaussian width, `lambda <= 0` selects the
/// penalty by GCV, `steps == 0` uses the default step count. With
/// `local_linear_pre != 0` the data are pre-smoothed before monotonization.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn hs_monotone_fit(
    x: *const f64,
    y: *const f64,
    n: usize,
    sigma: f64,
    lambda: f64,
    steps: usize,
    local_linear_pre: i32,
    out: *mut *mut HsMonotone,
) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let x = input(x, n, "x")?;
        let y = input(y, n, "y")?;
        let data = Dataset::new(x.to_vec(), y.to_vec())?;
        let kernel = kernel_1d(sigma, &data.x)?;
        let policy = if lambda > 0.0 {
            LambdaPolicy::Fixed(lambda)
        } else {
            LambdaPolicy::Gcv
        };
        let steps = if steps == 0 { DEFAULT_STEPS } else { steps };
        let est = if local_linear_pre != 0 {
            let h = rule_bandwidth(&data.y)?.bandwidth;
            let f_hat = local_linear(&data.x, &data.y, h, &data.x)?.values;
            monotonize_observed(&data.x, &f_hat, &data.y, &kernel, policy, steps)?
        } else {
            monotonize(&data.x, &data.y, &kernel, policy, steps)?
        };
        *out = Box::into_raw(Box::new(HsMonotone { inner: est }));
        Ok(())
    })
}

/// Evaluates the estimate at `m` points.
///
/// # Safety
/// `h` must come from [`hs_monotone_fit`]; `points` and `values` must hold `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_monotone_eval(
    h: *const HsMonotone,
    points: *const f64,
    m: usize,
    values: *mut f64,
) -> HsStatus {
    guard(|| {
        let est = h.as_ref().ok_or(Failure::Null("handle"))?;
        let pts = input(points, m, "points")?;
        let dst = output(values, m, "values")?;
        dst.copy_from_slice(&est.inner.eval(pts)?);
        Ok(())
    })
}

/// Selected penalty, or NaN for a null handle.
///
/// # Safety
/// `h` must be null or come from [`hs_monotone_fit`].
#[no_mangle]
pub unsafe extern "C" fn hs_monotone_lambda(h: *const HsMonotone) -> f64 {
    h.as_ref().map_or(f64::NAN, |e| e.inner.lambda_selected)
}

/// Nonzero when the step count exceeded the field's sup-norm.
///
/// # Safety
/// `h` must be null or come from [`hs_monotone_fit`].
#[no_mangle]
pub unsafe extern "C" fn hs_monotone_guard_holds(h: *const HsMonotone) -> i32 {
    h.as_ref().map_or(0, |e| e.inner.guard.holds as i32)
}

/// # Safety
/// `h` must be null or a handle from [`hs_monotone_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_monotone_free(h: *mut HsMonotone) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Unconstrained smoothing spline with a Gaussian kernel (`sigma <= 0` for the default width).
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn hs_spline_fit(
    x: *const f64,
    y: *const f64,
    n: usize,
    sigma: f64,
    lambda: f64,
    out: *mut *mut HsSpline,
) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let x = input(x, n, "x")?;
        let y = input(y, n, "y")?;
        let kernel = kernel_1d(sigma, x)?;
        let fit = homeospline::fit_spline_1d(x, y, &kernel, lambda)?;
        *out = Box::into_raw(Box::new(HsSpline { inner: fit }));
        Ok(())
    })
}

/// # Safety
/// `h` must come from [`hs_spline_fit`]; `points` and `values` must hold `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_spline_eval(
    h: *const HsSpline,
    points: *const f64,
    m: usize,
    values: *mut f64,
) -> HsStatus {
    guard(|| {
        let fit = h.as_ref().ok_or(Failure::Null("handle"))?;
        let pts = input(points, m, "points")?;
        let dst = output(values, m, "values")?;
        for (d, &p) in dst.iter_mut().zip(pts) {
            *d = fit.inner.eval(p);
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`hs_spline_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_spline_free(h: *mut HsSpline) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Homeomorphic matching of `n` landmark pairs (`sigma <= 0` for the default width,
/// `steps == 0` for the default step count).
///
/// # Safety
/// `sources` and `targets` must each hold `2n` doubles; `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn hs_match_homeo(
    sources: *const f64,
    targets: *const f64,
    n: usize,
    sigma: f64,
    lambda: f64,
    steps: usize,
    out: *mut *mut HsFlow2d,
) -> HsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let src = pairs(input(sources, 2 * n, "sources")?);
        let dst = pairs(input(targets, 2 * n, "targets")?);
        let kernel = if sigma > 0.0 {
            Kernel::gaussian(sigma)?
        } else {
            default_kernel_2d(&src)?
        };
        let steps = if steps == 0 { DEFAULT_STEPS } else { steps };
        let map = match_homeo(&LandmarkPairs::new(src, dst)?, &kernel, lambda, steps)?;
        *out = Box::into_raw(Box::new(HsFlow2d { inner: map }));
        Ok(())
    })
}

unsafe fn flow2d_apply(
    h: *const HsFlow2d,
    points: *const f64,
    m: usize,
    values: *mut f64,
    inverse: bool,
) -> HsStatus {
    guard(|| {
        let map = h.as_ref().ok_or(Failure::Null("handle"))?;
        let pts = pairs(input(points, 2 * m, "points")?);
        let dst = output(values, 2 * m, "values")?;
        let mapped = if inverse {
            map.inner.field.integrate_inverse(&pts)?
        } else {
            map.inner.field.integrate_forward(&pts)?
        };
        for (d, p) in dst.chunks_exact_mut(2).zip(mapped) {
            d.copy_from_slice(&p);
        }
        Ok(())
    })
}

/// Applies the forward map to `m` interleaved points.
///
/// # Safety
/// `h` must come from [`hs_match_homeo`]; `points` and `values` must hold `2m` doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_flow2d_forward(
    h: *const HsFlow2d,
    points: *const f64,
    m: usize,
    values: *mut f64,
) -> HsStatus {
    flow2d_apply(h, points, m, values, false)
}

/// Applies the inverse map to `m` interleaved points.
///
/// # Safety
/// As [`hs_flow2d_forward`].
#[no_mangle]
pub unsafe extern "C" fn hs_flow2d_inverse(
    h: *const HsFlow2d,
    points: *const f64,
    m: usize,
    values: *mut f64,
) -> HsStatus {
    flow2d_apply(h, points, m, values, true)
}

/// # Safety
/// `h` must be null or a handle from [`hs_match_homeo`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_flow2d_free(h: *mut HsFlow2d) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
