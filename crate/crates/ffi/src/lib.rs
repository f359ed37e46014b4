//! C ABI over the `fracdeg` solver, oracle and sweep harness.
//!
//! Every entry point returns an [`FdStatus`]. On failure the message is kept per thread and
//! can be read with [`fd_last_error`]. Handles are opaque and must be released with the
//! matching `*_free` function; passing null to a `*_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fracdeg::cli::ProblemConfig;
use fracdeg::entropy_solver::{solve_with, SolveOptions, Trajectory};
use fracdeg::error::Error;
use fracdeg::harness::{run_sweep, SweepConfig, SweepResult};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed or inconsistent configuration, including a schema mismatch.
    Config = 3,
    /// Argument outside the domain of the computation.
    Domain = 4,
    Unsupported = 5,
    /// Quadrature, optimizer, time step or stability failure.
    Numerical = 6,
    Io = 7,
    /// Index or buffer size out of range.
    OutOfRange = 8,
    Panic = 9,
}

/// A validated `problem/v1` configuration.
pub struct FdProblem {
    config: ProblemConfig,
}

/// The 17 stored samples of one solve.
pub struct FdTrajectory {
    traj: Trajectory,
}

pub struct FdSweepResult {
    result: SweepResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> FdStatus {
    match e {
        Error::Config(_) | Error::Schema { .. } | Error::Json(_) => FdStatus::Config,
        Error::Domain(_) | Error::GridMismatch(_) => FdStatus::Domain,
        Error::Unsupported(_) => FdStatus::Unsupported,
        Error::Cfl { .. } | Error::Quadrature(_) | Error::Bracket(_) | Error::Instability(_) => FdStatus::Numerical,
        Error::Io(_) | Error::Csv(_) => FdStatus::Io,
    }
}

/// Runs `f`, records any error or panic and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), (FdStatus, String)>) -> FdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FdStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside fracdeg");
            FdStatus::Panic
        }
    }
}

fn lib(e: Error) -> (FdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (FdStatus, String) {
    (FdStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, (FdStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (FdStatus::InvalidUtf8, format!("`{name}` is not UTF-8: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, (FdStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), (FdStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn fd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `G_d(α)`, the constant of the d-dimensional Lévy measure.
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn fd_levy_coefficient(d: usize, alpha: f64, out: *mut f64) -> FdStatus {
    guard(|| {
        let g = fracdeg::levy::levy_coefficient(d, alpha).map_err(lib)?;
        write_out(out, g, "out")
    })
}

/// Parses and validates a `problem/v1` JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn fd_problem_from_json(json: *const c_char, out: *mut *mut FdProblem) -> FdStatus {
    guard(|| {
        let config = ProblemConfig::from_json(text(json, "json")?).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(FdProblem { config })), "out")
    })
}

/// # Safety
/// `problem` must come from [`fd_problem_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fd_problem_free(problem: *mut FdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves the problem and keeps the 17 evenly spaced samples.
///
/// # Safety
/// `problem` must be a live handle; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn fd_solve(problem: *const FdProblem, out: *mut *mut FdTrajectory) -> FdStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        let spec = p.config.spec().map_err(lib)?;
        let opts = SolveOptions {
            store_all: false,
            padding: p.config.padding,
            ..SolveOptions::default()
        };
        let traj = solve_with(&spec, &opts).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(FdTrajectory { traj })), "out")
    })
}

/// # Safety
/// `traj` must come from [`fd_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_free(traj: *mut FdTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of stored samples and cells per sample (the padded grid).
///
/// # Safety
/// `traj` must be a live handle; the out pointers must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_shape(
    traj: *const FdTrajectory,
    samples: *mut usize,
    cells: *mut usize,
) -> FdStatus {
    guard(|| {
        let t = &handle(traj, "traj")?.traj;
        write_out(samples, t.samples().len(), "samples")?;
        write_out(cells, t.final_state().len(), "cells")
    })
}

/// Left edge and cell width of the padded grid.
///
/// # Safety
/// `traj` must be a live handle; the out pointers must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_grid(traj: *const FdTrajectory, x0: *mut f64, dx: *mut f64) -> FdStatus {
    guard(|| {
        let g = handle(traj, "traj")?.traj.final_state();
        write_out(x0, g.x0, "x0")?;
        write_out(dx, g.dx, "dx")
    })
}

/// Copies sample `index` into `values` (capacity `len`) and its time into `time`.
///
/// # Safety
/// `traj` must be a live handle, `values` valid for `len` writes and `time` for one.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_sample(
    traj: *const FdTrajectory,
    index: usize,
    time: *mut f64,
    values: *mut f64,
    len: usize,
) -> FdStatus {
    guard(|| {
        let samples = handle(traj, "traj")?.traj.samples();
        let Some((t, g)) = samples.get(index) else {
            return Err((FdStatus::OutOfRange, format!("sample {index} of {}", samples.len())));
        };
        if values.is_null() {
            return Err(null("values"));
        }
        if len < g.len() {
            return Err((FdStatus::OutOfRange, format!("buffer holds {len} values, sample has {}", g.len())));
        }
        ptr::copy_nonoverlapping(g.values.as_ptr(), values, g.len());
        write_out(time, *t, "time")
    })
}

/// Runs a `sweep-config/v1` JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn fd_sweep_run(json: *const c_char, out: *mut *mut FdSweepResult) -> FdStatus {
    guard(|| {
        let cfg = SweepConfig::from_json(text(json, "json")?).map_err(lib)?;
        let result = run_sweep(&cfg).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(FdSweepResult { result })), "out")
    })
}

/// # Safety
/// `result` must come from [`fd_sweep_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fd_sweep_free(result: *mut FdSweepResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Whether every verdict of the sweep passed.
///
/// # Safety
/// `result` must be a live handle; `passed` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fd_sweep_passed(result: *const FdSweepResult, passed: *mut bool) -> FdStatus {
    guard(|| {
        let r = &handle(result, "result")?.result;
        write_out(passed, r.passed(), "passed")
    })
}

/// The `sweep-result/v1` JSON document; release it with [`fd_string_free`].
///
/// # Safety
/// `result` must be a live handle; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn fd_sweep_to_json(result: *const FdSweepResult, out: *mut *mut c_char) -> FdStatus {
    guard(|| {
        let r = &handle(result, "result")?.result;
        let json = serde_json::to_string(r).map_err(|e| lib(e.into()))?;
        let s = CString::new(json).map_err(|e| (FdStatus::Io, e.to_string()))?;
        write_out(out, s.into_raw(), "out")
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
