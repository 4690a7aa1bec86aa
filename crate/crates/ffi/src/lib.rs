//! C ABI for `bellstrength`.
//!
//! Every fallible function returns a [`BsStatus`] and writes its result
//! through an out pointer. On failure, [`bs_last_error`] returns a message
//! describing the most recent error on the calling thread. Handles returned
//! through out pointers are owned by the caller and released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bellstrength::optimizer::{
    conjectured_optimum, optimize_cglmp_exact, ConjecturedOptions, ExactOptions,
    OptimizationReport, EXACT_MAX_DIM,
};
use bellstrength::quantum::{
    cglmp_behavior, entropy_of_entanglement, maximally_entangled, three_level_state, Behavior,
    SchmidtState,
};
use bellstrength::strength::min_kl_local;
use bellstrength::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidDimension = 2,
    InvalidCoefficient = 3,
    Shape = 4,
    InvalidBehavior = 5,
    ResourceLimit = 6,
    InvalidParameter = 7,
    SingularRatio = 8,
    NotConverged = 9,
    EigenNotConverged = 10,
    Io = 11,
    BufferTooSmall = 12,
    Panic = 13,
    Other = 14,
}

impl From<&Error> for BsStatus {
    fn from(e: &Error) -> Self {
        match e.root() {
            Error::InvalidDimension(_) => BsStatus::InvalidDimension,
            Error::InvalidCoefficient(_) => BsStatus::InvalidCoefficient,
            Error::Shape(_) => BsStatus::Shape,
            Error::InvalidBehavior(_) => BsStatus::InvalidBehavior,
            Error::ResourceLimit { .. } => BsStatus::ResourceLimit,
            Error::InvalidParameter(_) | Error::Usage(_) => BsStatus::InvalidParameter,
            Error::SingularRatio { .. } => BsStatus::SingularRatio,
            Error::NotConverged(_) => BsStatus::NotConverged,
            Error::EigenNotConverged { .. } => BsStatus::EigenNotConverged,
            Error::Io(_) => BsStatus::Io,
            _ => BsStatus::Other,
        }
    }
}

/// Which optimizer [`bs_optimize`] runs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsMode {
    /// Exact up to d = 6, conjectured above.
    Auto = 0,
    Exact = 1,
    Conjectured = 2,
}

/// Bipartite pure state in Schmidt form.
pub struct BsState(SchmidtState);

/// Joint outcome probabilities of a two-setting test.
pub struct BsBehavior(Behavior);

/// Result of a state optimization.
pub struct BsReport(OptimizationReport);

/// Best local fit of a behavior.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BsStrength {
    pub divergence_bits: f64,
    pub certificate_gap: f64,
    pub iterations: u64,
}

/// Scalar fields of a [`BsReport`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BsReportSummary {
    pub dim: usize,
    /// 1 for the conjectured route, 0 for the exact one.
    pub conjectured: i32,
    pub divergence_bits: f64,
    pub entanglement_bits: f64,
    /// Tilt parameter, NaN for the exact route.
    pub parameter: f64,
    pub consistency_residual: f64,
    pub converged: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard<F>(f: F) -> BsStatus
where
    F: FnOnce() -> Result<(), (BsStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BsStatus::Panic
        }
    }
}

fn fail(e: Error) -> (BsStatus, String) {
    (BsStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (BsStatus, String) {
    (BsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn out_handle<T>(out: *mut *mut T, value: T) -> Result<(), (BsStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// State `sum_i coeffs[i] |ii>`; coefficients must be nonnegative with unit norm.
///
/// # Safety
/// `coeffs` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_state_new(coeffs: *const f64, len: usize, out: *mut *mut BsState) -> BsStatus {
    guard(|| {
        if coeffs.is_null() {
            return Err(null("coeffs"));
        }
        let c = std::slice::from_raw_parts(coeffs, len).to_vec();
        out_handle(out, BsState(SchmidtState::new(c).map_err(fail)?))
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_state_maximally_entangled(d: usize, out: *mut *mut BsState) -> BsStatus {
    guard(|| out_handle(out, BsState(maximally_entangled(d).map_err(fail)?)))
}

/// Coefficients `(gamma, gamma, sqrt(1 - 2 gamma^2))`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_state_three_level(gamma: f64, out: *mut *mut BsState) -> BsStatus {
    guard(|| out_handle(out, BsState(three_level_state(gamma).map_err(fail)?)))
}

/// Local dimension, 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bs_state_dim(state: *const BsState) -> usize {
    state.as_ref().map_or(0, |s| s.0.dim())
}

/// Copies the Schmidt coefficients into `out[0..len]`; `len` must be at least the dimension.
///
/// # Safety
/// `state` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_state_coefficients(state: *const BsState, out: *mut f64, len: usize) -> BsStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = s.0.coeffs();
        if len < c.len() {
            return Err((BsStatus::BufferTooSmall, format!("need {} slots, got {len}", c.len())));
        }
        std::slice::from_raw_parts_mut(out, c.len()).copy_from_slice(c);
        Ok(())
    })
}

/// Entropy of entanglement in bits.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_state_entropy(state: *const BsState, out: *mut f64) -> BsStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = entropy_of_entanglement(&s.0);
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_state_free(state: *mut BsState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Behavior of `state` under the CGLMP measurements with uniform settings.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_behavior_cglmp(state: *const BsState, out: *mut *mut BsBehavior) -> BsStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        out_handle(out, BsBehavior(cglmp_behavior(&s.0).map_err(fail)?))
    })
}

/// Number of entries `m^2 n^2`, 0 for a null handle.
///
/// # Safety
/// `behavior` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bs_behavior_len(behavior: *const BsBehavior) -> usize {
    behavior.as_ref().map_or(0, |b| b.0.len())
}

/// Copies the joint probabilities, indexed `((iA m + iB) n + jA) n + jB`.
///
/// # Safety
/// `behavior` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_behavior_probs(behavior: *const BsBehavior, out: *mut f64, len: usize) -> BsStatus {
    guard(|| {
        let b = behavior.as_ref().ok_or_else(|| null("behavior"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = b.0.probs();
        if len < p.len() {
            return Err((BsStatus::BufferTooSmall, format!("need {} slots, got {len}", p.len())));
        }
        std::slice::from_raw_parts_mut(out, p.len()).copy_from_slice(p);
        Ok(())
    })
}

/// # Safety
/// `behavior` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_behavior_free(behavior: *mut BsBehavior) {
    if !behavior.is_null() {
        drop(Box::from_raw(behavior));
    }
}

/// Strength `min_{p local} D(q || p)` in bits, to certificate gap `tol`.
///
/// # Safety
/// `behavior` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_min_kl_local(behavior: *const BsBehavior, tol: f64, out: *mut BsStrength) -> BsStatus {
    guard(|| {
        let b = behavior.as_ref().ok_or_else(|| null("behavior"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let fit = min_kl_local(&b.0, tol).map_err(fail)?;
        *out = BsStrength {
            divergence_bits: fit.divergence_bits,
            certificate_gap: fit.certificate_gap,
            iterations: fit.iterations as u64,
        };
        Ok(())
    })
}

/// Optimal state for the `2 x d` CGLMP test.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_optimize(d: usize, mode: BsMode, tol: f64, out: *mut *mut BsReport) -> BsStatus {
    guard(|| {
        let exact = match mode {
            BsMode::Auto => d <= EXACT_MAX_DIM,
            BsMode::Exact => true,
            BsMode::Conjectured => false,
        };
        let report = if exact {
            let opts = ExactOptions {
                inner_tol: tol,
                ..ExactOptions::default()
            };
            optimize_cglmp_exact(d, &opts)
        } else {
            conjectured_optimum(d, &ConjecturedOptions::default())
        };
        out_handle(out, BsReport(report.map_err(fail)?))
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_report_summary(report: *const BsReport, out: *mut BsReportSummary) -> BsStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = BsReportSummary {
            dim: r.dim,
            conjectured: i32::from(r.mode == bellstrength::optimizer::Mode::Conjectured),
            divergence_bits: r.divergence_bits,
            entanglement_bits: r.entanglement_bits,
            parameter: r.parameter.unwrap_or(f64::NAN),
            consistency_residual: r.consistency_residual,
            converged: i32::from(r.converged),
        };
        Ok(())
    })
}

/// Optimal Schmidt coefficients, descending, as a new state handle.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_report_state(report: *const BsReport, out: *mut *mut BsState) -> BsStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        out_handle(out, BsState(r.0.best_state.clone()))
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_report_free(report: *mut BsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
