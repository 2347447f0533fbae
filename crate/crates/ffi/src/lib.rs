//! C ABI over `hd_delta`.
//!
//! Conventions:
//! - every fallible function returns an [`HdStatus`]; on failure the message
//!   is available from [`hd_last_error_message`] on the same thread;
//! - matrices are passed row-major (`a[i * ncols + j]`);
//! - output buffers are caller-allocated with the documented length;
//! - handles come from `*_new` and must be released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hd_delta::bound::{pathwise_check, BoundReport, FunctionSpec};
use hd_delta::estimators::{
    conservative_lasso, debias_dcl, lasso_cd, nodewise_precision, Dataset, Estimate, LassoOptions,
};
use hd_delta::montecarlo::{run_table1_with_threads, select_lambda_ic, SimCell, DEFAULT_LAMBDA_COEFS};
use hd_delta::norms::VectorNorm;
use hd_delta::portfolio::{gmv_weights, variance_error_bound_direct, variance_error_bound_theorem};
use hd_delta::Error;
use nalgebra::{DMatrix, DVector};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    InvalidArgument = 3,
    Degenerate = 4,
    Rank = 5,
    Domain = 6,
    Hypothesis = 7,
    Parse = 8,
    Io = 9,
    /// A Rust panic was caught at the boundary.
    Panic = 10,
}

/// Vector norm `q` and its compatible matrix norm.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdNorm {
    L1 = 1,
    L2 = 2,
    LInf = 3,
}

impl From<HdNorm> for VectorNorm {
    fn from(n: HdNorm) -> Self {
        match n {
            HdNorm::L1 => VectorNorm::L1,
            HdNorm::L2 => VectorNorm::L2,
            HdNorm::LInf => VectorNorm::LInf,
        }
    }
}

/// Summary of a fitted coefficient vector; β̂ itself goes to a separate buffer.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HdFitInfo {
    pub lambda: f64,
    pub sigma2_hat: f64,
    pub support_size: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HdBoundReport {
    pub fd_norm: f64,
    pub est_err: f64,
    pub actual: f64,
    pub linear_term: f64,
    pub remainder: f64,
    pub bound: f64,
    pub holds: bool,
}

impl From<&BoundReport> for HdBoundReport {
    fn from(r: &BoundReport) -> Self {
        HdBoundReport {
            fd_norm: r.fd_norm,
            est_err: r.est_err,
            actual: r.actual,
            linear_term: r.linear_term,
            remainder: r.remainder,
            bound: r.bound,
            holds: r.holds,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HdSimResult {
    pub mean_ratio: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub mean_selected_c: f64,
    pub used_reps: usize,
    pub excluded_reps: usize,
    pub ratio_violations: usize,
}

/// Opaque dataset handle.
pub struct HdDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HdStatus {
    match e {
        Error::Dimension(_) => HdStatus::Dimension,
        Error::InvalidArgument(_) => HdStatus::InvalidArgument,
        Error::Degenerate(_) => HdStatus::Degenerate,
        Error::Rank(_) => HdStatus::Rank,
        Error::Domain(_) => HdStatus::Domain,
        Error::Hypothesis(_) => HdStatus::Hypothesis,
        Error::Parse(_) => HdStatus::Parse,
        Error::Io(_) => HdStatus::Io,
    }
}

struct Fail(HdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult = std::result::Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> HdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            HdStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> std::result::Result<(), Fail> {
    if p.is_null() {
        Err(Fail(HdStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be valid for `len` reads (or `len == 0`).
unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> std::result::Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be valid for `len` writes.
unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> std::result::Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn row_major(p: *const f64, rows: usize, cols: usize, name: &str) -> std::result::Result<DMatrix<f64>, Fail> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Fail(HdStatus::Dimension, format!("{name}: {rows} x {cols} overflows")))?;
    Ok(DMatrix::from_row_slice(rows, cols, slice(p, len, name)?))
}

unsafe fn dataset<'a>(ds: *const HdDataset) -> std::result::Result<&'a Dataset, Fail> {
    non_null(ds, "dataset")?;
    Ok(&(*ds).inner)
}

unsafe fn write_fit(est: &Estimate, beta_out: *mut f64, info: *mut HdFitInfo) -> FfiResult {
    slice_mut(beta_out, est.beta_hat.len(), "beta_out")?.copy_from_slice(est.beta_hat.as_slice());
    if !info.is_null() {
        *info = HdFitInfo {
            lambda: est.lambda,
            sigma2_hat: est.sigma2_hat,
            support_size: est.support.len(),
            iterations: est.iterations,
            converged: est.converged,
        };
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next `hd_*` call on the same thread.
#[no_mangle]
pub extern "C" fn hd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `x` (`n × p`, row-major) and `y` (`n`) into a new dataset.
///
/// # Safety
/// `x` and `y` must point to `n * p` and `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hd_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut HdDataset,
) -> HdStatus {
    guard(|| {
        non_null(out, "out")?;
        let xm = row_major(x, n, p, "x")?;
        let yv = DVector::from_column_slice(slice(y, n, "y")?);
        let inner = Dataset::new(xm, yv)?;
        *out = Box::into_raw(Box::new(HdDataset { inner }));
        Ok(())
    })
}

/// Releases a dataset; null is ignored.
///
/// # Safety
/// `ds` must come from [`hd_dataset_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hd_dataset_free(ds: *mut HdDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hd_dataset_n(ds: *const HdDataset) -> usize {
    if ds.is_null() {
        0
    } else {
        (*ds).inner.n()
    }
}

/// # Safety
/// `ds` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hd_dataset_p(ds: *const HdDataset) -> usize {
    if ds.is_null() {
        0
    } else {
        (*ds).inner.p()
    }
}

/// Lasso by coordinate descent. `weights` may be null (unit penalties).
///
/// # Safety
/// `weights` (if non-null) and `beta_out` must hold `p` doubles; `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn hd_lasso(
    ds: *const HdDataset,
    lambda: f64,
    weights: *const f64,
    beta_out: *mut f64,
    info: *mut HdFitInfo,
) -> HdStatus {
    guard(|| {
        let data = dataset(ds)?;
        let w = if weights.is_null() { None } else { Some(slice(weights, data.p(), "weights")?) };
        let est = lasso_cd(data, lambda, w, &LassoOptions::default())?;
        write_fit(&est, beta_out, info)
    })
}

/// Two-stage conservative lasso with the same `lambda` in both stages.
///
/// # Safety
/// `beta_out` must hold `p` doubles; `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn hd_conservative_lasso(
    ds: *const HdDataset,
    lambda: f64,
    beta_out: *mut f64,
    info: *mut HdFitInfo,
) -> HdStatus {
    guard(|| {
        let est = conservative_lasso(dataset(ds)?, lambda, &LassoOptions::default())?;
        write_fit(&est, beta_out, info)
    })
}

/// Debiased conservative lasso with a nodewise precision matrix using
/// `node_lambda` for every column.
///
/// # Safety
/// `beta_out` must hold `p` doubles; `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn hd_dcl(
    ds: *const HdDataset,
    lambda: f64,
    node_lambda: f64,
    beta_out: *mut f64,
    info: *mut HdFitInfo,
) -> HdStatus {
    guard(|| {
        let data = dataset(ds)?;
        let opts = LassoOptions::default();
        let cl = conservative_lasso(data, lambda, &opts)?;
        let prec = nodewise_precision(data.x(), &vec![node_lambda; data.p()], &opts)?;
        let est = debias_dcl(data, &cl, &prec)?;
        write_fit(&est, beta_out, info)
    })
}

/// Information-criterion choice over `λ = c·√(log p/n)`. Null `coefs` uses
/// the default 13-point grid.
///
/// # Safety
/// `coefs` (if non-null) must hold `ncoefs` doubles; `beta_out` must hold
/// `p` doubles; `info` may be null.
#[no_mangle]
pub unsafe extern "C" fn hd_select_lambda_ic(
    ds: *const HdDataset,
    coefs: *const f64,
    ncoefs: usize,
    beta_out: *mut f64,
    info: *mut HdFitInfo,
) -> HdStatus {
    guard(|| {
        let data = dataset(ds)?;
        let grid = if coefs.is_null() { &DEFAULT_LAMBDA_COEFS[..] } else { slice(coefs, ncoefs, "coefs")? };
        let sel = select_lambda_ic(data, grid, &LassoOptions::default())?;
        write_fit(&sel.estimate, beta_out, info)
    })
}

/// Bound chain for `f(β) = Dβ` with `D` `m × p` row-major.
///
/// # Safety
/// `d` must hold `m * p` doubles, `beta_hat`/`beta0` `p` each; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_pathwise_check_linear(
    d: *const f64,
    m: usize,
    p: usize,
    beta_hat: *const f64,
    beta0: *const f64,
    norm: HdNorm,
    out: *mut HdBoundReport,
) -> HdStatus {
    guard(|| {
        non_null(out, "out")?;
        let f = FunctionSpec::linear(row_major(d, m, p, "d")?)?;
        check(&f, beta_hat, beta0, p, norm, out)
    })
}

/// Bound chain for `f(β) = β'Σβ` with symmetric `Σ` `p × p`.
///
/// # Safety
/// `sigma` must hold `p * p` doubles, `beta_hat`/`beta0` `p` each; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hd_pathwise_check_quadratic(
    sigma: *const f64,
    p: usize,
    beta_hat: *const f64,
    beta0: *const f64,
    norm: HdNorm,
    out: *mut HdBoundReport,
) -> HdStatus {
    guard(|| {
        non_null(out, "out")?;
        let f = FunctionSpec::quadratic(row_major(sigma, p, p, "sigma")?)?;
        check(&f, beta_hat, beta0, p, norm, out)
    })
}

unsafe fn check(
    f: &FunctionSpec,
    beta_hat: *const f64,
    beta0: *const f64,
    p: usize,
    norm: HdNorm,
    out: *mut HdBoundReport,
) -> FfiResult {
    let bh = DVector::from_column_slice(slice(beta_hat, p, "beta_hat")?);
    let b0 = DVector::from_column_slice(slice(beta0, p, "beta0")?);
    let report = pathwise_check(f, &bh, &b0, norm.into())?;
    *out = HdBoundReport::from(&report);
    Ok(())
}

/// GMV weights `Θ1/(1'Θ1)` for a `p × p` precision matrix.
///
/// # Safety
/// `theta` must hold `p * p` doubles and `w_out` `p`.
#[no_mangle]
pub unsafe extern "C" fn hd_gmv_weights(theta: *const f64, p: usize, w_out: *mut f64) -> HdStatus {
    guard(|| {
        let w = gmv_weights(&row_major(theta, p, p, "theta")?)?;
        slice_mut(w_out, p, "w_out")?.copy_from_slice(w.as_slice());
        Ok(())
    })
}

/// Both portfolio variance-error bounds for estimated weights `w_hat`
/// against `w` under covariance `sigma`. Either output may be null.
///
/// # Safety
/// `w_hat`/`w` must hold `p` doubles and `sigma` `p * p`.
#[no_mangle]
pub unsafe extern "C" fn hd_portfolio_bounds(
    w_hat: *const f64,
    w: *const f64,
    sigma: *const f64,
    p: usize,
    theorem_out: *mut HdBoundReport,
    direct_out: *mut HdBoundReport,
) -> HdStatus {
    guard(|| {
        let wh = DVector::from_column_slice(slice(w_hat, p, "w_hat")?);
        let w0 = DVector::from_column_slice(slice(w, p, "w")?);
        let s = row_major(sigma, p, p, "sigma")?;
        let theorem = variance_error_bound_theorem(&wh, &w0, &s)?;
        let direct = variance_error_bound_direct(&wh, &w0, &s)?;
        if !theorem_out.is_null() {
            *theorem_out = HdBoundReport::from(&theorem);
        }
        if !direct_out.is_null() {
            *direct_out = HdBoundReport::from(&direct);
        }
        Ok(())
    })
}

/// One Monte Carlo cell with the default λ grid and printed ratio scale.
/// `threads == 0` uses the global pool.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hd_simulate_cell(
    n: usize,
    p: usize,
    s0: usize,
    reps: usize,
    seed: u64,
    threads: usize,
    out: *mut HdSimResult,
) -> HdStatus {
    guard(|| {
        non_null(out, "out")?;
        let cell = SimCell {
            n,
            p,
            s0,
            reps,
            seed,
            lambda_coefs: DEFAULT_LAMBDA_COEFS.to_vec(),
            ratio_scale: Default::default(),
        };
        let threads = (threads > 0).then_some(threads);
        let table = run_table1_with_threads(std::slice::from_ref(&cell), threads, false)?;
        let r = &table.results[0];
        *out = HdSimResult {
            mean_ratio: r.mean_ratio,
            ratio_min: r.ratio_min,
            ratio_max: r.ratio_max,
            mean_selected_c: r.mean_selected_c,
            used_reps: r.used_reps,
            excluded_reps: r.excluded_reps,
            ratio_violations: r.ratio_violations,
        };
        Ok(())
    })
}
