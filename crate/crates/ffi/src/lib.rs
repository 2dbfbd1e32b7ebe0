//! C ABI over pic-core. Every call returns a [`PicStatus`]; on failure the
//! message is available from [`pic_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pic_core::config::{env_from_name, RunConfig};
use pic_core::environments::NoiseConfig;
use pic_core::infometrics::{estimate_pic, optimize_temperature, BinCheck, TemperatureGrid};
use pic_core::rollout::{collect_returns, ReturnMatrix, SamplingPlan};
use pic_core::scoring::{normalized_score, ScoreInputs};
use pic_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    TooFewBins = 3,
    Degenerate = 4,
    Io = 5,
    Panic = 6,
}

/// Opaque return matrix.
pub struct PicMatrix {
    inner: ReturnMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PicStatus {
    match e {
        Error::TooFewBins { .. } => PicStatus::TooFewBins,
        Error::Degenerate(_) | Error::Empty(_) => PicStatus::Degenerate,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => PicStatus::Io,
        _ => PicStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PicStatus>) -> PicStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PicStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside pic-core".into());
            PicStatus::Panic
        }
    }
}

fn fail(e: Error) -> PicStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> PicStatus {
    set_error(format!("null pointer: {what}"));
    PicStatus::NullPointer
}

/// Message for the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn pic_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a matrix from `n * m` row-major returns.
///
/// # Safety
/// `values` must point to `n * m` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pic_matrix_from_values(
    values: *const f64,
    n: usize,
    m: usize,
    out: *mut *mut PicMatrix,
) -> PicStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(m).ok_or_else(|| fail(Error::InvalidSpec("n * m overflows".into())))?;
        let flat = std::slice::from_raw_parts(values, len);
        let rows = if m == 0 { Vec::new() } else { flat.chunks(m).map(<[f64]>::to_vec).collect() };
        let inner = ReturnMatrix::from_values(rows).map_err(fail)?;
        *out = Box::into_raw(Box::new(PicMatrix { inner }));
        Ok(())
    })
}

/// Samples a matrix from a named environment with its default random policy.
/// `horizon` 0 keeps the environment default.
///
/// # Safety
/// `env_name` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pic_matrix_sample(
    env_name: *const c_char,
    horizon: usize,
    n: usize,
    m: usize,
    seed: u64,
    out: *mut *mut PicMatrix,
) -> PicStatus {
    guard(|| {
        if env_name.is_null() {
            return Err(null("env_name"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(env_name)
            .to_str()
            .map_err(|_| fail(Error::InvalidSpec("environment name is not UTF-8".into())))?;
        let env = env_from_name(name, (horizon > 0).then_some(horizon), NoiseConfig::default()).map_err(fail)?;
        let cfg = RunConfig { env: Some(env.clone()), ..Default::default() };
        let policy = cfg.policy().map_err(fail)?;
        let plan = SamplingPlan::new(n, m, seed);
        plan.validate().map_err(fail)?;
        let inner = collect_returns(&env, &policy, &plan).map_err(fail)?;
        *out = Box::into_raw(Box::new(PicMatrix { inner }));
        Ok(())
    })
}

/// Releases a matrix. NULL is ignored.
///
/// # Safety
/// `matrix` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pic_matrix_free(matrix: *mut PicMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// # Safety
/// `matrix` must be a live handle; `n` and `m` writable.
#[no_mangle]
pub unsafe extern "C" fn pic_matrix_shape(matrix: *const PicMatrix, n: *mut usize, m: *mut usize) -> PicStatus {
    guard(|| {
        let mat = matrix.as_ref().ok_or_else(|| null("matrix"))?;
        if n.is_null() || m.is_null() {
            return Err(null("n/m"));
        }
        *n = mat.inner.n();
        *m = mat.inner.m();
        Ok(())
    })
}

/// Copies the returns row-major into `buf`, which holds `len` doubles.
///
/// # Safety
/// `matrix` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pic_matrix_values(matrix: *const PicMatrix, buf: *mut f64, len: usize) -> PicStatus {
    guard(|| {
        let mat = matrix.as_ref().ok_or_else(|| null("matrix"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let vals = mat.inner.values();
        if len < vals.len() {
            return Err(fail(Error::DimensionMismatch { expected: vals.len(), got: len }));
        }
        std::ptr::copy_nonoverlapping(vals.as_ptr(), buf, vals.len());
        Ok(())
    })
}

/// Histogram mutual information between parameters and returns.
/// `allow_few_bins` nonzero downgrades the bins-vs-episodes check to a warning.
///
/// # Safety
/// `matrix` must be a live handle and `pic` writable.
#[no_mangle]
pub unsafe extern "C" fn pic_estimate_pic(
    matrix: *const PicMatrix,
    bins: usize,
    allow_few_bins: i32,
    pic: *mut f64,
) -> PicStatus {
    guard(|| {
        let mat = matrix.as_ref().ok_or_else(|| null("matrix"))?;
        if pic.is_null() {
            return Err(null("pic"));
        }
        let check = if allow_few_bins != 0 { BinCheck::Warn } else { BinCheck::Strict };
        *pic = estimate_pic(&mat.inner, bins, check).map_err(fail)?.pic;
        Ok(())
    })
}

/// Optimality mutual information at the best temperature.
///
/// # Safety
/// `matrix` must be a live handle; `poic` and `eta` writable.
#[no_mangle]
pub unsafe extern "C" fn pic_estimate_poic(matrix: *const PicMatrix, poic: *mut f64, eta: *mut f64) -> PicStatus {
    guard(|| {
        let mat = matrix.as_ref().ok_or_else(|| null("matrix"))?;
        if poic.is_null() || eta.is_null() {
            return Err(null("poic/eta"));
        }
        let s = optimize_temperature(&mat.inner, &TemperatureGrid::default(), None).map_err(fail)?;
        *poic = s.poic_star;
        *eta = s.eta_star;
        Ok(())
    })
}

/// Normalized score of an average return against a random-sampling range.
/// Pass NaN for `r_max_algo` when there is none.
///
/// # Safety
/// `score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pic_normalized_score(
    r_ave: f64,
    r_min_rand: f64,
    r_max_rand: f64,
    r_max_algo: f64,
    score: *mut f64,
) -> PicStatus {
    guard(|| {
        if score.is_null() {
            return Err(null("score"));
        }
        let inputs =
            ScoreInputs { r_ave, r_min_rand, r_max_rand, r_max_algo: (!r_max_algo.is_nan()).then_some(r_max_algo) };
        *score = normalized_score(&inputs).map_err(fail)?;
        Ok(())
    })
}

/// Pearson correlation and two-sided p-value.
///
/// # Safety
/// `xs` and `ys` must hold `len` doubles; `r` and `p` writable.
#[no_mangle]
pub unsafe extern "C" fn pic_pearson(
    xs: *const f64,
    ys: *const f64,
    len: usize,
    r: *mut f64,
    p: *mut f64,
) -> PicStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() || r.is_null() || p.is_null() {
            return Err(null("xs/ys/r/p"));
        }
        let res = pic_core::stats::pearson(std::slice::from_raw_parts(xs, len), std::slice::from_raw_parts(ys, len))
            .map_err(fail)?;
        *r = res.r;
        *p = res.p_value;
        Ok(())
    })
}
