//! C ABI for the valve solver.
//!
//! Every function returns a [`RiisStatus`]; on failure the message is kept
//! per thread and read with [`riis_last_error_message`]. Handles are opaque
//! and owned by the caller until passed to their `_free` function. Panics
//! never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use riis_fsi::driver::config::{parse_config, parse_config_str};
use riis_fsi::driver::waveform::{builtin_p_in, builtin_p_out};
use riis_fsi::driver::{Simulation, StepRecord};
use riis_fsi::valve::{rk4_advance, ValveState};
use riis_fsi::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiisStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Invalid configuration or unparsable input file.
    Config = 3,
    Io = 4,
    /// The linear solver failed to converge or broke down.
    Solver = 5,
    /// Geometry or valve-integral failure.
    Geometry = 6,
    /// Any other runtime failure.
    Runtime = 7,
    /// The run already reached its end time.
    Finished = 8,
    Panic = 9,
}

/// One completed step; mirrors the time-series CSV columns.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RiisStepRecord {
    pub t: f64,
    pub c: f64,
    pub cdot: f64,
    pub orifice_area: f64,
    pub flux: f64,
    pub dp_probe: f64,
    pub f_fluid: f64,
    pub f_elastic: f64,
    pub denom: f64,
    pub rhs: f64,
    pub iters: u64,
    pub res: f64,
}

impl From<StepRecord> for RiisStepRecord {
    fn from(r: StepRecord) -> Self {
        Self {
            t: r.t,
            c: r.c,
            cdot: r.cdot,
            orifice_area: r.orifice_area,
            flux: r.flux,
            dp_probe: r.dp_probe,
            f_fluid: r.f_fluid,
            f_elastic: r.f_elastic,
            denom: r.denom,
            rhs: r.rhs,
            iters: r.iters as u64,
            res: r.res,
        }
    }
}

/// Opaque simulation handle.
pub struct RiisSimulation(Simulation);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RiisStatus {
    match e.root() {
        Error::Config(_) | Error::Parse { .. } => RiisStatus::Config,
        Error::Io { .. } => RiisStatus::Io,
        Error::NonConvergence { .. } | Error::SolverBreakdown(_) => RiisStatus::Solver,
        Error::Geometry(_)
        | Error::DegenerateGradient { .. }
        | Error::OutOfBand { .. }
        | Error::DegenerateProjection { .. } => RiisStatus::Geometry,
        Error::InvalidArgument(_) => RiisStatus::InvalidArgument,
        _ => RiisStatus::Runtime,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (RiisStatus, String)>) -> RiisStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RiisStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RiisStatus::Panic
        }
    }
}

fn fail(e: Error) -> (RiisStatus, String) {
    (status_of(&e), e.to_string())
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn path_arg(s: *const c_char) -> Result<PathBuf, (RiisStatus, String)> {
    if s.is_null() {
        return Err((RiisStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(s)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| (RiisStatus::InvalidArgument, "string argument is not UTF-8".into()))
}

fn non_null<T>(p: *mut T, what: &str) -> Result<(), (RiisStatus, String)> {
    if p.is_null() {
        Err((RiisStatus::NullPointer, format!("null {what}")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn riis_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Create a simulation from a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn riis_simulation_from_file(path: *const c_char, out: *mut *mut RiisSimulation) -> RiisStatus {
    guard(|| {
        non_null(out, "output handle")?;
        let path = path_arg(path)?;
        let config = parse_config(&path).map_err(fail)?;
        let sim = Simulation::new(config).map_err(fail)?;
        *out = Box::into_raw(Box::new(RiisSimulation(sim)));
        Ok(())
    })
}

/// Create a simulation from TOML text; relative paths resolve against the
/// working directory.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn riis_simulation_from_toml(toml: *const c_char, out: *mut *mut RiisSimulation) -> RiisStatus {
    guard(|| {
        non_null(out, "output handle")?;
        let text = path_arg(toml)?;
        let text = text.to_str().unwrap_or_default();
        let config = parse_config_str(text, Path::new("<toml>")).map_err(fail)?;
        let sim = Simulation::new(config).map_err(fail)?;
        *out = Box::into_raw(Box::new(RiisSimulation(sim)));
        Ok(())
    })
}

/// Release a simulation; null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn riis_simulation_free(sim: *mut RiisSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advance one step and optionally copy its record.
///
/// # Safety
/// `sim` must be a live handle; `record` null or writable.
#[no_mangle]
pub unsafe extern "C" fn riis_simulation_step(sim: *mut RiisSimulation, record: *mut RiisStepRecord) -> RiisStatus {
    guard(|| {
        non_null(sim, "simulation handle")?;
        let sim = &mut (*sim).0;
        if sim.is_finished() {
            return Err((RiisStatus::Finished, format!("run already reached t = {}", sim.time())));
        }
        let row = sim.step().map_err(fail)?;
        if !record.is_null() {
            *record = row.into();
        }
        Ok(())
    })
}

/// Run to the end time, writing all outputs into `output_dir`.
///
/// # Safety
/// `sim` must be a live handle and `output_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn riis_simulation_run(sim: *mut RiisSimulation, output_dir: *const c_char) -> RiisStatus {
    guard(|| {
        non_null(sim, "simulation handle")?;
        let dir = path_arg(output_dir)?;
        (*sim).0.run_with_outputs(&dir).map_err(fail)
    })
}

/// Current time, opening coefficient and rate; null outputs are skipped.
///
/// # Safety
/// `sim` must be a live handle; outputs null or writable.
#[no_mangle]
pub unsafe extern "C" fn riis_simulation_state(
    sim: *const RiisSimulation,
    t: *mut f64,
    c: *mut f64,
    cdot: *mut f64,
) -> RiisStatus {
    guard(|| {
        if sim.is_null() {
            return Err((RiisStatus::NullPointer, "null simulation handle".into()));
        }
        let sim = &(*sim).0;
        let v = sim.valve_state();
        for (ptr, value) in [(t, sim.time()), (c, v.c), (cdot, v.cdot)] {
            if !ptr.is_null() {
                *ptr = value;
            }
        }
        Ok(())
    })
}

/// Builtin inlet and outlet pressures in pascal at time `t` in seconds.
///
/// # Safety
/// `p_in` and `p_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn riis_builtin_pressures(t: f64, p_in: *mut f64, p_out: *mut f64) -> RiisStatus {
    guard(|| {
        non_null(p_in, "p_in")?;
        non_null(p_out, "p_out")?;
        if !t.is_finite() {
            return Err((RiisStatus::InvalidArgument, format!("time {t} is not finite")));
        }
        *p_in = builtin_p_in(t);
        *p_out = builtin_p_out(t);
        Ok(())
    })
}

/// One RK4 step of `c'' = rhs - beta c'` with `rhs` frozen, in place.
///
/// # Safety
/// `c` and `cdot` must be valid read-write pointers.
#[no_mangle]
pub unsafe extern "C" fn riis_valve_rk4(c: *mut f64, cdot: *mut f64, rhs: f64, beta: f64, dt: f64) -> RiisStatus {
    guard(|| {
        non_null(c, "c")?;
        non_null(cdot, "cdot")?;
        let s = rk4_advance(ValveState { c: *c, cdot: *cdot, step: 0 }, rhs, beta, dt).map_err(fail)?;
        *c = s.c;
        *cdot = s.cdot;
        Ok(())
    })
}
