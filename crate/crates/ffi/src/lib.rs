//! C ABI for the ddsc synthesis toolkit.
//!
//! Plants, trajectories and synthesis results are opaque handles. Every
//! constructor has a matching `*_free`. Fallible calls return a [`DdscStatus`]
//! and write their product through an out-pointer; on failure
//! [`ddsc_last_error_message`] describes the cause. Matrices cross the boundary
//! as row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;

use ddsc::data::{simulate_collect, ExcitationSpec, Trajectory};
use ddsc::model::{builtin_system, h2_norm, hinf_norm, Gain, HinfMethod, LinearSystem};
use ddsc::sdp::SolverSettings;
use ddsc::synthesis::{synthesize, IlmiConfig, Multipliers, Norm, ProblemSpec, Structure, SynthesisResult};
use ddsc::Error;

/// Opaque plant handle.
pub struct DdscSystem(LinearSystem);

/// Opaque trajectory handle.
pub struct DdscTrajectory(Trajectory);

/// Opaque synthesis result handle.
pub struct DdscResult(SynthesisResult);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DdscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Unstable = 4,
    Solver = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DdscNorm {
    H2 = 0,
    Hinf = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DdscStructure {
    Unstructured = 0,
    /// Pattern-constrained gain by iterative linearization.
    Structured = 1,
    /// Diagonal-`P` convex restriction on the pattern.
    PdiagBaseline = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DdscMultipliers {
    PerSample = 0,
    Shared = 1,
}

/// Interior-point tolerances.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DdscSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub strict_margin: f64,
    pub max_ipm_iters: usize,
}

impl From<DdscSettings> for SolverSettings {
    fn from(s: DdscSettings) -> Self {
        SolverSettings {
            tol_feas: s.tol_feas,
            tol_gap: s.tol_gap,
            strict_margin: s.strict_margin,
            max_ipm_iters: s.max_ipm_iters,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> DdscStatus {
    match err {
        Error::Dimension { .. } | Error::NotSquare { .. } => DdscStatus::Dimension,
        Error::Unstable(_) => DdscStatus::Unstable,
        Error::Solver(_) | Error::BracketFailure(_) | Error::NoAcceptance(_) => DdscStatus::Solver,
        Error::Io(_) => DdscStatus::Io,
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) => DdscStatus::Parse,
        _ => DdscStatus::InvalidArgument,
    }
}

struct Failure(DdscStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DdscStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure or panic, and maps it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DdscStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DdscStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DdscStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DdscStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn matrix_arg(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>, Failure> {
    if rows * cols == 0 {
        return Ok(DMatrix::zeros(rows, cols));
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(DMatrix::from_row_slice(rows, cols, std::slice::from_raw_parts(p, rows * cols)))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ddsc_version() -> *const c_char {
    static VERSION: &[u8] = concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes();
    VERSION.as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ddsc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default tolerances.
#[no_mangle]
pub extern "C" fn ddsc_settings_default() -> DdscSettings {
    let s = SolverSettings::default();
    DdscSettings {
        tol_feas: s.tol_feas,
        tol_gap: s.tol_gap,
        strict_margin: s.strict_margin,
        max_ipm_iters: s.max_ipm_iters,
    }
}

/// Builtin plant by name (`h2-example`, `hinf-example`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ddsc_system_builtin(name: *const c_char, out: *mut *mut DdscSystem) -> DdscStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let sys = builtin_system(name)
            .ok_or_else(|| Failure(DdscStatus::InvalidArgument, format!("unknown builtin system `{name}`")))?;
        write_out(out, DdscSystem(sys))
    })
}

/// Plant from row-major matrices `A (nx×nx)`, `B (nx×nu)`, `C (ny×nx)`,
/// `D (ny×nu)`, `G (nx×nd)`, `H (ny×nd)`.
///
/// # Safety
/// Each matrix pointer must reference the stated number of doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsc_system_new(
    nx: usize,
    nu: usize,
    ny: usize,
    nd: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    d: *const f64,
    g: *const f64,
    h: *const f64,
    out: *mut *mut DdscSystem,
) -> DdscStatus {
    guard(|| {
        let sys = LinearSystem::new(
            matrix_arg(a, nx, nx, "A")?,
            matrix_arg(b, nx, nu, "B")?,
            matrix_arg(c, ny, nx, "C")?,
            matrix_arg(d, ny, nu, "D")?,
            matrix_arg(g, nx, nd, "G")?,
            matrix_arg(h, ny, nd, "H")?,
        )?;
        write_out(out, DdscSystem(sys))
    })
}

/// Plant from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ddsc_system_load(path: *const c_char, out: *mut *mut DdscSystem) -> DdscStatus {
    guard(|| {
        let sys = LinearSystem::load(str_arg(path, "path")?)?;
        write_out(out, DdscSystem(sys))
    })
}

/// Writes `nx, nu, ny, nd`; any out-pointer may be NULL.
///
/// # Safety
/// `sys` must be a live handle; non-NULL out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsc_system_dims(
    sys: *const DdscSystem,
    nx: *mut usize,
    nu: *mut usize,
    ny: *mut usize,
    nd: *mut usize,
) -> DdscStatus {
    guard(|| {
        let s = &ref_arg(sys, "system")?.0;
        for (p, v) in [(nx, s.nx()), (nu, s.nu()), (ny, s.ny()), (nd, s.nd())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `sys` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddsc_system_free(sys: *mut DdscSystem) {
    free_handle(sys);
}

/// Simulates `t` noisy steps with noise norm at most `eps`, zero initial state
/// and unit Gaussian inputs.
///
/// # Safety
/// `sys` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddsc_trajectory_simulate(
    sys: *const DdscSystem,
    t: usize,
    eps: f64,
    seed: u64,
    out: *mut *mut DdscTrajectory,
) -> DdscStatus {
    guard(|| {
        let s = &ref_arg(sys, "system")?.0;
        let traj = simulate_collect(s, t, eps, seed, &ExcitationSpec::default())?;
        write_out(out, DdscTrajectory(traj))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddsc_trajectory_load(path: *const c_char, out: *mut *mut DdscTrajectory) -> DdscStatus {
    guard(|| {
        let traj = Trajectory::load(str_arg(path, "path")?)?;
        write_out(out, DdscTrajectory(traj))
    })
}

/// # Safety
/// `traj` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ddsc_trajectory_save(traj: *const DdscTrajectory, path: *const c_char) -> DdscStatus {
    guard(|| Ok(ref_arg(traj, "trajectory")?.0.save(str_arg(path, "path")?)?))
}

/// Number of transitions `T`, or 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddsc_trajectory_len(traj: *const DdscTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `traj` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddsc_trajectory_free(traj: *mut DdscTrajectory) {
    free_handle(traj);
}

/// Synthesizes a gain. With `traj` NULL the problem is model-based; otherwise
/// only `C, D, G, H` of `sys` are used. `pattern` (e.g. `"110;011"`) is
/// required unless `structure` is unstructured. `settings` may be NULL for
/// defaults. A solve that ends without an optimal status still returns
/// `DDSC_STATUS_OK` with a result whose status is not optimal.
///
/// # Safety
/// Handles must be live, strings NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddsc_synthesize(
    sys: *const DdscSystem,
    traj: *const DdscTrajectory,
    norm: DdscNorm,
    structure: DdscStructure,
    pattern: *const c_char,
    multipliers: DdscMultipliers,
    settings: *const DdscSettings,
    out: *mut *mut DdscResult,
) -> DdscStatus {
    guard(|| {
        let s = ref_arg(sys, "system")?.0.clone();
        let norm = match norm {
            DdscNorm::H2 => Norm::H2,
            DdscNorm::Hinf => Norm::Hinf,
        };
        let structure = match structure {
            DdscStructure::Unstructured => Structure::Unstructured,
            DdscStructure::Structured => Structure::Structured(str_arg(pattern, "pattern")?.parse()?),
            DdscStructure::PdiagBaseline => Structure::PdiagBaseline(str_arg(pattern, "pattern")?.parse()?),
        };
        let multipliers = match multipliers {
            DdscMultipliers::PerSample => Multipliers::PerSample,
            DdscMultipliers::Shared => Multipliers::Shared,
        };
        let spec = match traj.as_ref() {
            None => ProblemSpec::model_based(s, norm, structure)?,
            Some(t) => ProblemSpec::data_driven(s, t.0.clone(), norm, structure, multipliers)?,
        };
        let settings = settings.as_ref().map_or_else(SolverSettings::default, |s| (*s).into());
        let result = synthesize(&spec, &IlmiConfig::default(), &settings)?;
        write_out(out, DdscResult(result))
    })
}

/// Performance bound, `+inf` when the solve was not optimal, NaN for NULL.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddsc_result_gamma(res: *const DdscResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.0.gamma)
}

/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddsc_result_is_optimal(res: *const DdscResult) -> bool {
    res.as_ref().is_some_and(|r| r.0.is_optimal())
}

/// Solver iterations for single solves, linearized solves for the iterative method.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddsc_result_iterations(res: *const DdscResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.iterations)
}

/// Copies the gain `K (nu×nx)` row-major into `buf`, which holds `len` doubles.
///
/// # Safety
/// `res` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ddsc_result_gain(res: *const DdscResult, buf: *mut f64, len: usize) -> DdscStatus {
    guard(|| {
        let k = ref_arg(res, "result")?.0.k.matrix();
        let (rows, cols) = k.shape();
        if len < rows * cols {
            return Err(Failure(
                DdscStatus::Dimension,
                format!("buffer holds {len} values, gain needs {}", rows * cols),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let dst = std::slice::from_raw_parts_mut(buf, rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                dst[i * cols + j] = k[(i, j)];
            }
        }
        Ok(())
    })
}

/// Result serialized as JSON; release with [`ddsc_string_free`].
///
/// # Safety
/// `res` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddsc_result_to_json(res: *const DdscResult, out: *mut *mut c_char) -> DdscStatus {
    guard(|| {
        let json = serde_json::to_string(&ref_arg(res, "result")?.0).map_err(Error::from)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CString::new(json).map_err(|e| Failure(DdscStatus::Parse, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `res` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddsc_result_free(res: *mut DdscResult) {
    free_handle(res);
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddsc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Closed-loop norm of `u = Kx` with `k` row-major `nu×nx`; H∞ by frequency sweep.
///
/// # Safety
/// `sys` must be a live handle, `k` must hold `nu·nx` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsc_closed_loop_norm(
    sys: *const DdscSystem,
    k: *const f64,
    norm: DdscNorm,
    out: *mut f64,
) -> DdscStatus {
    guard(|| {
        let s = &ref_arg(sys, "system")?.0;
        let gain = Gain::new(matrix_arg(k, s.nu(), s.nx(), "K")?)?;
        let value = match norm {
            DdscNorm::H2 => h2_norm(s, &gain)?,
            DdscNorm::Hinf => hinf_norm(s, &gain, HinfMethod::FrequencySweep)?,
        };
        if out.is_null() {
            return Err(null("out"));
        }
        *out = value;
        Ok(())
    })
}
