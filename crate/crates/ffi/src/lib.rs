//! C ABI for the `cellfree-urllc` simulator.
//!
//! Configurations and result sets are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns a
//! [`CfuStatus`]; on failure a message is available from
//! [`cfu_last_error_message`] on the same thread.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cellfree_urllc::harness::{
    run_experiment_with, write_outputs, Execution, ResultSet, RunConfig,
};
use cellfree_urllc::rate::{dispersion, shannon_rate, urllc_rate, UrllcParams};
use cellfree_urllc::scenario::UserKind;
use cellfree_urllc::Error;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfuStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    InvalidArgument = 3,
    Numerical = 4,
    Io = 5,
    Parse = 6,
    InvalidUtf8 = 7,
    OutOfRange = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque run configuration.
pub struct CfuConfig {
    inner: RunConfig,
}

/// Opaque result set of one experiment.
pub struct CfuResults {
    inner: ResultSet,
}

/// Finite-blocklength rate parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CfuRateParams {
    pub bandwidth_hz: f64,
    pub coherence_len: u32,
    pub pilot_len: u32,
    pub tx_duration_s: f64,
    pub block_error_prob: f64,
}

/// Per-tuple summary. Statistics without samples are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CfuTupleSummary {
    pub gu_rate_95_bps: f64,
    pub uav_rate_95_bps: f64,
    pub gu_median_power_w: f64,
    pub uav_median_power_w: f64,
    pub runs: u64,
    pub converged: u64,
    pub failed: u64,
    pub mean_iterations: f64,
    pub max_iterations: u64,
    pub runs_with_ascent_violations: u64,
}

/// One user's outcome in one run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CfuUserRecord {
    pub tuple: u64,
    pub scenario: u64,
    pub user: u64,
    /// 0 for a ground user, 1 for a UAV.
    pub is_uav: u8,
    pub rate_bps: f64,
    pub power_w: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(CfuStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidConfig(_) => CfuStatus::InvalidConfig,
            Error::InvalidArgument(_) => CfuStatus::InvalidArgument,
            Error::Numerical(_) => CfuStatus::Numerical,
            Error::Io(_) => CfuStatus::Io,
            Error::Json(_) | Error::ConfigParse(_) => CfuStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: CfuStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CfuStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            CfuStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CfuStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(CfuStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(CfuStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(CfuStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CfuStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn params(p: &CfuRateParams) -> Result<UrllcParams, Failure> {
    Ok(UrllcParams::new(
        p.bandwidth_hz,
        p.coherence_len as usize,
        p.pilot_len as usize,
        p.tx_duration_s,
        p.block_error_prob,
    )?)
}

fn nan_if_none(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Message describing the last failure on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cfu_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cfu_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a configuration holding the default parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfu_config_new(out: *mut *mut CfuConfig) -> CfuStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = Box::into_raw(Box::new(CfuConfig {
            inner: RunConfig::default(),
        }));
        Ok(())
    })
}

/// Creates a configuration from a TOML file applied on top of the defaults.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfu_config_load(
    path: *const c_char,
    out: *mut *mut CfuConfig,
) -> CfuStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let cfg = RunConfig::from_file(Path::new(text(path, "path")?))?;
        *out = Box::into_raw(Box::new(CfuConfig { inner: cfg }));
        Ok(())
    })
}

/// Sets one dotted configuration key, e.g. `"gu.count"` to `"30"`.
///
/// # Safety
/// `cfg` must come from `cfu_config_new`/`cfu_config_load`; `key` and `value`
/// must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cfu_config_set(
    cfg: *mut CfuConfig,
    key: *const c_char,
    value: *const c_char,
) -> CfuStatus {
    guard(|| {
        let cfg = deref_mut(cfg, "cfg")?;
        cfg.inner.set(text(key, "key")?, text(value, "value")?)?;
        Ok(())
    })
}

/// Checks the configuration for inconsistent settings.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn cfu_config_validate(cfg: *const CfuConfig) -> CfuStatus {
    guard(|| {
        deref(cfg, "cfg")?.inner.validate()?;
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cfu_config_free(cfg: *mut CfuConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the configured sweep. `parallel` selects the thread pool; both modes
/// give identical results.
///
/// # Safety
/// `cfg` must be a live configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfu_run(
    cfg: *const CfuConfig,
    parallel: bool,
    out: *mut *mut CfuResults,
) -> CfuStatus {
    guard(|| {
        let cfg = deref(cfg, "cfg")?;
        let out = deref_mut(out, "out")?;
        let execution = if parallel {
            Execution::Parallel
        } else {
            Execution::Serial
        };
        let rs = run_experiment_with(&cfg.inner, execution)?;
        *out = Box::into_raw(Box::new(CfuResults { inner: rs }));
        Ok(())
    })
}

/// Releases a result set. Null is ignored.
///
/// # Safety
/// `res` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cfu_results_free(res: *mut CfuResults) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Number of sweep tuples in the result set.
///
/// # Safety
/// `res` must be a live result handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfu_results_tuple_count(
    res: *const CfuResults,
    out: *mut usize,
) -> CfuStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(res, "res")?.inner.tuples.len();
        Ok(())
    })
}

/// Copies the name of tuple `index` (e.g. `cf-pzf-icba-sum-dl`) into `buf`
/// including the terminating NUL. `needed` receives the required buffer size;
/// `CFU_STATUS_BUFFER_TOO_SMALL` is returned when `buf_len` is smaller.
///
/// # Safety
/// `res` must be a live result handle, `needed` a valid pointer, and `buf`
/// writable for `buf_len` bytes (or null when `buf_len` is 0).
#[no_mangle]
pub unsafe extern "C" fn cfu_results_tuple_name(
    res: *const CfuResults,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
    needed: *mut usize,
) -> CfuStatus {
    guard(|| {
        let rs = &deref(res, "res")?.inner;
        let needed = deref_mut(needed, "needed")?;
        let Some(tuple) = rs.tuples.get(index) else {
            return fail(
                CfuStatus::OutOfRange,
                format!("tuple index {index} out of range"),
            );
        };
        let name = tuple.name();
        *needed = name.len() + 1;
        if buf_len < *needed {
            return fail(
                CfuStatus::BufferTooSmall,
                format!("name needs {} bytes", *needed),
            );
        }
        if buf.is_null() {
            return fail(CfuStatus::NullPointer, "buf is null");
        }
        ptr::copy_nonoverlapping(name.as_ptr().cast::<c_char>(), buf, name.len());
        *buf.add(name.len()) = 0;
        Ok(())
    })
}

/// Index of the tuple with the given name.
///
/// # Safety
/// `res` must be a live result handle, `name` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfu_results_tuple_index(
    res: *const CfuResults,
    name: *const c_char,
    out: *mut usize,
) -> CfuStatus {
    guard(|| {
        let rs = &deref(res, "res")?.inner;
        let name = text(name, "name")?;
        let out = deref_mut(out, "out")?;
        match rs.tuple_index(name) {
            Some(i) => {
                *out = i;
                Ok(())
            }
            None => fail(CfuStatus::OutOfRange, format!("no tuple named '{name}'")),
        }
    })
}

/// Summary statistics of tuple `index`.
///
/// # Safety
/// `res` must be a live result handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfu_results_summary(
    res: *const CfuResults,
    index: usize,
    out: *mut CfuTupleSummary,
) -> CfuStatus {
    guard(|| {
        let rs = &deref(res, "res")?.inner;
        let out = deref_mut(out, "out")?;
        if index >= rs.tuples.len() {
            return fail(
                CfuStatus::OutOfRange,
                format!("tuple index {index} out of range"),
            );
        }
        let s = rs.summary(index);
        *out = CfuTupleSummary {
            gu_rate_95_bps: nan_if_none(s.gu_rate_95_bps),
            uav_rate_95_bps: nan_if_none(s.uav_rate_95_bps),
            gu_median_power_w: nan_if_none(s.gu_median_power_w),
            uav_median_power_w: nan_if_none(s.uav_median_power_w),
            runs: s.runs as u64,
            converged: s.converged as u64,
            failed: s.failed as u64,
            mean_iterations: s.mean_iterations,
            max_iterations: s.max_iterations as u64,
            runs_with_ascent_violations: s.runs_with_ascent_violations as u64,
        };
        Ok(())
    })
}

/// Number of per-user records, ordered by (tuple, scenario, user).
///
/// # Safety
/// `res` must be a live result handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfu_results_record_count(
    res: *const CfuResults,
    out: *mut usize,
) -> CfuStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(res, "res")?.inner.records.len();
        Ok(())
    })
}

/// Per-user record `index`.
///
/// # Safety
/// `res` must be a live result handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfu_results_record(
    res: *const CfuResults,
    index: usize,
    out: *mut CfuUserRecord,
) -> CfuStatus {
    guard(|| {
        let rs = &deref(res, "res")?.inner;
        let out = deref_mut(out, "out")?;
        let Some(r) = rs.records.get(index) else {
            return fail(
                CfuStatus::OutOfRange,
                format!("record index {index} out of range"),
            );
        };
        *out = CfuUserRecord {
            tuple: r.tuple as u64,
            scenario: r.scenario as u64,
            user: r.user as u64,
            is_uav: u8::from(r.kind == UserKind::Uav),
            rate_bps: r.rate_bps,
            power_w: r.power_w,
        };
        Ok(())
    })
}

/// Writes `results.csv`, `summary.json` and the per-tuple ECDF files into `dir`,
/// creating it if needed.
///
/// # Safety
/// `res` must be a live result handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cfu_results_write(
    res: *const CfuResults,
    dir: *const c_char,
) -> CfuStatus {
    guard(|| {
        let rs = &deref(res, "res")?.inner;
        write_outputs(rs, Path::new(text(dir, "dir")?))?;
        Ok(())
    })
}

/// Fills `out` with the default rate parameters (20 MHz, τc = 200, τp = 32,
/// T = 50 µs, ε = 1e-5).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cfu_rate_params_default(out: *mut CfuRateParams) -> CfuStatus {
    guard(|| {
        let p = UrllcParams::reference();
        *deref_mut(out, "out")? = CfuRateParams {
            bandwidth_hz: p.bandwidth,
            coherence_len: p.coherence_len as u32,
            pilot_len: p.pilot_len as u32,
            tx_duration_s: p.tx_duration,
            block_error_prob: p.block_error_prob,
        };
        Ok(())
    })
}

unsafe fn rate_fn(
    params_ptr: *const CfuRateParams,
    sinr: f64,
    out: *mut f64,
    f: fn(f64, &UrllcParams) -> f64,
) -> CfuStatus {
    guard(|| {
        let p = params(deref(params_ptr, "params")?)?;
        let out = deref_mut(out, "out")?;
        if !(sinr >= 0.0) {
            return fail(
                CfuStatus::InvalidArgument,
                format!("SINR must be non-negative, got {sinr}"),
            );
        }
        *out = f(sinr, &p);
        Ok(())
    })
}

/// Finite-blocklength rate in bit/s at linear SINR `sinr`.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cfu_urllc_rate(
    params: *const CfuRateParams,
    sinr: f64,
    out: *mut f64,
) -> CfuStatus {
    rate_fn(params, sinr, out, urllc_rate)
}

/// Shannon part of the rate in bit/s.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cfu_shannon_rate(
    params: *const CfuRateParams,
    sinr: f64,
    out: *mut f64,
) -> CfuStatus {
    rate_fn(params, sinr, out, shannon_rate)
}

/// Dispersion penalty in bit/s.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cfu_dispersion(
    params: *const CfuRateParams,
    sinr: f64,
    out: *mut f64,
) -> CfuStatus {
    rate_fn(params, sinr, out, dispersion)
}
