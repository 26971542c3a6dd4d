//! C ABI over the `afdm` BER sweep.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Every fallible call returns an
//! [`AfdmStatus`] and, on failure, stores a message readable through
//! [`afdm_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use afdm::harness::{run_ber_sweep, write_points, BerPoint, ExperimentConfig};
use afdm::Error;

/// Result codes of the C API.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AfdmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The experiment description was rejected.
    InvalidConfig = 3,
    Io = 4,
    /// A matrix factorization met a vanishing pivot.
    Singular = 5,
    /// Too many frames of one detector failed.
    FailureThreshold = 6,
    OutOfRange = 7,
    /// The library panicked; the handle arguments remain valid.
    Internal = 8,
}

/// Validated experiment description.
pub struct AfdmExperiment {
    config: ExperimentConfig,
}

/// Points produced by one sweep, in detector-major order.
pub struct AfdmSweep {
    points: Vec<BerPoint>,
    detectors: Vec<CString>,
}

/// Numeric fields of one BER point.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AfdmPoint {
    pub snr_db: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mean_iters: f64,
    pub mult_count: u64,
    pub failed_frames: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> AfdmStatus {
    match e {
        Error::Io(_) => AfdmStatus::Io,
        Error::Singular { .. } => AfdmStatus::Singular,
        Error::FailureThreshold { .. } => AfdmStatus::FailureThreshold,
        _ => AfdmStatus::InvalidConfig,
    }
}

fn fail(status: AfdmStatus, msg: impl Into<String>) -> AfdmStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), AfdmStatus>) -> AfdmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AfdmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(AfdmStatus::Internal, "internal panic"),
    }
}

fn lift<T>(r: afdm::Result<T>) -> Result<T, AfdmStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

/// # Safety
/// `s` is null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, AfdmStatus> {
    if s.is_null() {
        return Err(fail(AfdmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(AfdmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), AfdmStatus> {
    if p.is_null() {
        Err(fail(AfdmStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn afdm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn afdm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

fn publish_experiment(config: afdm::Result<ExperimentConfig>, out: *mut *mut AfdmExperiment) -> Result<(), AfdmStatus> {
    let config = lift(config)?;
    // SAFETY: checked non-null by the callers.
    unsafe { *out = Box::into_raw(Box::new(AfdmExperiment { config })) };
    Ok(())
}

/// Parses a TOML experiment description.
///
/// # Safety
/// `toml` is a NUL-terminated string and `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn afdm_experiment_parse(toml: *const c_char, out: *mut *mut AfdmExperiment) -> AfdmStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = read_str(toml, "toml")?;
        publish_experiment(ExperimentConfig::from_toml_str(text), out)
    })
}

/// Loads a TOML experiment description from a file.
///
/// # Safety
/// `path` is a NUL-terminated string and `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn afdm_experiment_load(path: *const c_char, out: *mut *mut AfdmExperiment) -> AfdmStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = read_str(path, "path")?;
        publish_experiment(ExperimentConfig::load(path), out)
    })
}

/// Number of configured detectors, 0 for a null handle.
///
/// # Safety
/// `exp` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn afdm_experiment_num_detectors(exp: *const AfdmExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.config.detectors.len())
}

/// Number of SNR grid points, 0 for a null handle.
///
/// # Safety
/// `exp` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn afdm_experiment_num_snr(exp: *const AfdmExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.config.snr_db.len())
}

/// Releases an experiment; null is ignored.
///
/// # Safety
/// `exp` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn afdm_experiment_free(exp: *mut AfdmExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Runs the Monte-Carlo sweep. Results are deterministic in the seed.
///
/// # Safety
/// `exp` is a live handle and `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn afdm_sweep_run(exp: *const AfdmExperiment, out: *mut *mut AfdmSweep) -> AfdmStatus {
    guard(|| {
        non_null(exp, "experiment")?;
        non_null(out, "out")?;
        let points = lift(run_ber_sweep(&(*exp).config))?;
        let detectors = points
            .iter()
            .map(|p| CString::new(p.detector.as_str()).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(AfdmSweep { points, detectors }));
        Ok(())
    })
}

/// Number of points, 0 for a null handle.
///
/// # Safety
/// `sweep` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn afdm_sweep_len(sweep: *const AfdmSweep) -> usize {
    sweep.as_ref().map_or(0, |s| s.points.len())
}

/// Copies the numeric fields of point `index`.
///
/// # Safety
/// `sweep` is a live handle and `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn afdm_sweep_point(sweep: *const AfdmSweep, index: usize, out: *mut AfdmPoint) -> AfdmStatus {
    guard(|| {
        non_null(sweep, "sweep")?;
        non_null(out, "out")?;
        let sweep = &*sweep;
        let Some(p) = sweep.points.get(index) else {
            return Err(fail(AfdmStatus::OutOfRange, format!("point {index} out of range")));
        };
        *out = AfdmPoint {
            snr_db: p.snr_db,
            frames: p.frames,
            bits: p.bits,
            bit_errors: p.bit_errors,
            ber: p.ber,
            mean_iters: p.mean_iters,
            mult_count: p.mult_count,
            failed_frames: p.failed_frames,
        };
        Ok(())
    })
}

/// Detector id of point `index`, owned by the sweep; null if out of range.
///
/// # Safety
/// `sweep` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn afdm_sweep_detector(sweep: *const AfdmSweep, index: usize) -> *const c_char {
    sweep
        .as_ref()
        .and_then(|s| s.detectors.get(index))
        .map_or(ptr::null(), |d| d.as_ptr())
}

/// Writes the sweep as CSV to `path`.
///
/// # Safety
/// `sweep` is a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn afdm_sweep_write_csv(sweep: *const AfdmSweep, path: *const c_char) -> AfdmStatus {
    guard(|| {
        non_null(sweep, "sweep")?;
        let path = read_str(path, "path")?;
        let file = File::create(path).map_err(|e| fail(AfdmStatus::Io, format!("{path}: {e}")))?;
        let mut w = BufWriter::new(file);
        lift(write_points(&(*sweep).points, &mut w))?;
        w.flush().map_err(|e| fail(AfdmStatus::Io, format!("{path}: {e}")))
    })
}

/// Releases a sweep; null is ignored.
///
/// # Safety
/// `sweep` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn afdm_sweep_free(sweep: *mut AfdmSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}
