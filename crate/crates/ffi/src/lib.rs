//! C ABI over `dynsample`.
//!
//! Every function returns a [`DsStatus`]; on failure the message is kept per
//! thread and read with [`ds_last_error`]. Handles are opaque and owned by the
//! caller once returned; release each with its `_free` function. Strings
//! returned by the library are released with [`ds_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dynsample::datum::random_ball_member;
use dynsample::forward::Trace;
use dynsample::pipeline::{run_job, JobOutput, JobSettings};
use dynsample::recovery::recover_coefficients;
use dynsample::{Dynamics, Error, InitialDatum, OperatorSpec, SamplingPoint};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    SignPattern = 4,
    RhoBelowThreshold = 5,
    ResonantPoint = 6,
    PrecisionInsufficient = 7,
    TolUnachievable = 8,
    IllConditioned = 9,
    RootBracket = 10,
    Parse = 11,
    BufferTooSmall = 12,
    Internal = 13,
}

impl From<&Error> for DsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::EmptyCoefficients | Error::SignPatternViolation(_) => DsStatus::SignPattern,
            Error::RhoBelowThreshold { .. } => DsStatus::RhoBelowThreshold,
            Error::ResonantPoint(_) => DsStatus::ResonantPoint,
            Error::PrecisionInsufficient { .. } => DsStatus::PrecisionInsufficient,
            Error::TolUnachievable { .. } => DsStatus::TolUnachievable,
            Error::IllConditioned { .. } => DsStatus::IllConditioned,
            Error::RootBracketFailure { .. } => DsStatus::RootBracket,
            Error::Parse(_) | Error::Config(_) => DsStatus::Parse,
            Error::InvalidProfile(_) | Error::InvalidArgument(_) | Error::Io(_) => DsStatus::InvalidArgument,
        }
    }
}

/// Spatial operator `Σ α_{2l} ∂_x^{2l}` on `[0, π]` with Dirichlet ends.
pub struct DsOperator(OperatorSpec);

/// Initial datum given by its sine coefficients.
pub struct DsDatum(InitialDatum);

/// Plan, trace and recovery of one synthetic job.
pub struct DsJob(JobOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(DsStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DsStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(DsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = CString::new(s).map_err(|_| Failure(DsStatus::Internal, "string contains nul".into()))?.into_raw();
    Ok(())
}

/// Copy into a caller buffer; `*len` receives the needed length either way.
unsafe fn copy_out(values: &[f64], out: *mut f64, cap: usize, len: *mut usize) -> Result<(), Failure> {
    if len.is_null() {
        return Err(null("len"));
    }
    *len = values.len();
    if cap < values.len() {
        return Err(Failure(DsStatus::BufferTooSmall, format!("need {} entries, buffer holds {cap}", values.len())));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ds_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Operator from `α₂, α₄, …` (`len ≥ 1`), which must alternate in sign
/// starting positive.
///
/// # Safety
/// `alpha` points to `len` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_operator_new(alpha: *const f64, len: usize, out: *mut *mut DsOperator) -> DsStatus {
    guard(|| {
        let a = slice(alpha, len, "alpha")?;
        put(out, DsOperator(OperatorSpec::from_f64(a)?))
    })
}

/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_operator_heat(out: *mut *mut DsOperator) -> DsStatus {
    guard(|| put(out, DsOperator(OperatorSpec::heat())))
}

/// # Safety
/// `op` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_operator_lambda(op: *const DsOperator, k: u64, out: *mut f64) -> DsStatus {
    guard(|| {
        let op = deref(op, "op")?;
        if k == 0 {
            return Err(Failure(DsStatus::InvalidArgument, "k must be at least 1".into()));
        }
        *out.as_mut().ok_or_else(|| null("out"))? = op.0.lambda_f64(k);
        Ok(())
    })
}

/// Smallest admissible ratio, `2N ln 2` (strict).
///
/// # Safety
/// `op` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_operator_rho_threshold(op: *const DsOperator, out: *mut f64) -> DsStatus {
    guard(|| {
        *out.as_mut().ok_or_else(|| null("out"))? = deref(op, "op")?.0.rho_threshold();
        Ok(())
    })
}

/// Ratio at which the coefficient bounds propagate for `n` samples.
///
/// # Safety
/// `op` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_operator_induction_rho(op: *const DsOperator, n: usize, out: *mut f64) -> DsStatus {
    guard(|| {
        *out.as_mut().ok_or_else(|| null("out"))? = deref(op, "op")?.0.induction_rho(n);
        Ok(())
    })
}

/// # Safety
/// `op` comes from this library or is null; it is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ds_operator_free(op: *mut DsOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Datum with sine coefficients `coeffs[k-1] = f̂_k` and smoothness `r`.
///
/// # Safety
/// `coeffs` points to `len` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_datum_new(r: f64, coeffs: *const f64, len: usize, out: *mut *mut DsDatum) -> DsStatus {
    guard(|| {
        let c = slice(coeffs, len, "coeffs")?;
        put(out, DsDatum(InitialDatum::new(r, c.to_vec())?))
    })
}

/// Seeded member of the smoothness-`r` unit ball supported on `k ≤ support`.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_datum_random(
    r: f64,
    support: usize,
    margin: f64,
    seed: u64,
    out: *mut *mut DsDatum,
) -> DsStatus {
    guard(|| put(out, DsDatum(random_ball_member(r, support, margin, seed)?)))
}

/// # Safety
/// `d` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_datum_ball_norm(d: *const DsDatum, out: *mut f64) -> DsStatus {
    guard(|| {
        *out.as_mut().ok_or_else(|| null("out"))? = deref(d, "datum")?.0.ball_norm();
        Ok(())
    })
}

/// # Safety
/// `d` comes from this library or is null; it is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ds_datum_free(d: *mut DsDatum) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Sample `datum` at `x0` (an expression such as `"pi*(sqrt(5)-1)/2"`) on
/// the geometric schedule `t_j = ρ^{j-1} t₁`, `j = 1..n`, and recover.
/// Precision is chosen automatically.
///
/// # Safety
/// `op` and `datum` are live handles; `x0` is a nul-terminated string;
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_job_run(
    op: *const DsOperator,
    datum: *const DsDatum,
    x0: *const c_char,
    k_scan: u64,
    t1: f64,
    rho: f64,
    n: usize,
    out: *mut *mut DsJob,
) -> DsStatus {
    guard(|| {
        let op = deref(op, "op")?;
        let datum = deref(datum, "datum")?;
        let point = SamplingPoint::from_expr(text(x0, "x0")?, k_scan)?;
        let dynamics = Dynamics::Autonomous(op.0.clone());
        put(out, DsJob(run_job(&dynamics, &datum.0, &point, &JobSettings::new(t1, rho, n))?))
    })
}

/// Recovered `c̄_k`, `k = 1..n`, rounded to double.
///
/// # Safety
/// `job` is a live handle; `out` holds `cap` doubles; `len` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_job_coefficients(
    job: *const DsJob,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> DsStatus {
    guard(|| {
        let v: Vec<f64> = deref(job, "job")?.0.result.c_bar.iter().map(|c| c.to_f64()).collect();
        copy_out(&v, out, cap, len)
    })
}

/// Reconstructed sine coefficients `f̄_k`, `k = 1..⌈n/2⌉`.
///
/// # Safety
/// `job` is a live handle; `out` holds `cap` doubles; `len` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_job_reconstruction(
    job: *const DsJob,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> DsStatus {
    guard(|| {
        let v: Vec<f64> = deref(job, "job")?.0.result.f_bar().iter().map(|c| c.to_f64()).collect();
        copy_out(&v, out, cap, len)
    })
}

/// A-priori bounds on `|c_k - c̄_k|`.
///
/// # Safety
/// `job` is a live handle; `out` holds `cap` doubles; `len` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_job_bounds(job: *const DsJob, out: *mut f64, cap: usize, len: *mut usize) -> DsStatus {
    guard(|| {
        let v: Vec<f64> = deref(job, "job")?.0.result.apriori_bounds.iter().map(|c| c.to_f64()).collect();
        copy_out(&v, out, cap, len)
    })
}

/// `L²` distance between the datum and its reconstruction.
///
/// # Safety
/// `job` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_job_l2_error(job: *const DsJob, out: *mut f64) -> DsStatus {
    guard(|| {
        let e = deref(job, "job")?.0.result.l2_error.as_ref().expect("jobs carry their truth").to_f64();
        *out.as_mut().ok_or_else(|| null("out"))? = e;
        Ok(())
    })
}

/// `1` when every coefficient error is within its bound, else `0`.
///
/// # Safety
/// `job` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_job_bounds_hold(job: *const DsJob, out: *mut i32) -> DsStatus {
    guard(|| {
        let ok = deref(job, "job")?.0.result.bounds_hold().expect("jobs carry their truth");
        *out.as_mut().ok_or_else(|| null("out"))? = i32::from(ok);
        Ok(())
    })
}

/// Full result as JSON with decimal strings; release with [`ds_string_free`].
///
/// # Safety
/// `job` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_job_result_json(job: *const DsJob, out: *mut *mut c_char) -> DsStatus {
    guard(|| {
        let v = deref(job, "job")?.0.result.to_json();
        put_string(out, serde_json::to_string(&v).expect("json value serializes"))
    })
}

/// The sampled trace as JSON; release with [`ds_string_free`].
///
/// # Safety
/// `job` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_job_trace_json(job: *const DsJob, out: *mut *mut c_char) -> DsStatus {
    guard(|| put_string(out, deref(job, "job")?.0.trace.to_json()))
}

/// # Safety
/// `job` comes from this library or is null; it is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ds_job_free(job: *mut DsJob) {
    if !job.is_null() {
        drop(Box::from_raw(job));
    }
}

/// Run the recursion on a trace given as JSON (the format of
/// [`ds_job_trace_json`]).
///
/// # Safety
/// `op` is a live handle; `trace_json` is a nul-terminated string; `out`
/// holds `cap` doubles; `len` is writable.
#[no_mangle]
pub unsafe extern "C" fn ds_recover_trace_json(
    op: *const DsOperator,
    trace_json: *const c_char,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> DsStatus {
    guard(|| {
        let op = deref(op, "op")?;
        let trace = Trace::from_json(text(trace_json, "trace_json")?)?;
        let c: Vec<f64> = recover_coefficients(&trace, &op.0)?.iter().map(|c| c.to_f64()).collect();
        copy_out(&c, out, cap, len)
    })
}
