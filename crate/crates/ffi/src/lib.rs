//! C ABI over the bidomain solver. Every call returns a [`BidomainStatus`];
//! the message for the last failure on the calling thread is available from
//! [`bidomain_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use bidomain::certificate::{one_sided_lipschitz, Lattice};
use bidomain::config::RunConfig;
use bidomain::dynamics::ModalState;
use bidomain::periodic::{solve_periodic, PeriodicSolveReport};
use bidomain::problem::Problem;
use bidomain::run::{run, RunOptions, Subcommand};
use bidomain::BidomainError;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BidomainStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed or out-of-range configuration.
    Config = 3,
    /// Rejected grid, conductivity or model parameters.
    InvalidInput = 4,
    /// Factorization, eigen solve, integration or fixed-point failure.
    Numerical = 5,
    /// No dissipativity certificate exists for the model.
    Certificate = 6,
    Io = 7,
    /// Output buffer shorter than required; the required length is reported.
    BufferTooSmall = 8,
    /// Fixed point requested before a successful periodic solve.
    NotSolved = 9,
    Panic = 10,
}

/// Assembled problem plus the most recent periodic solution.
pub struct BidomainProblem {
    problem: Problem,
    solution: Option<PeriodicSolveReport>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let clean = message.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn status_of(err: &BidomainError) -> BidomainStatus {
    use BidomainError::*;
    match err.root() {
        Config { .. } => BidomainStatus::Config,
        InvalidGrid(_)
        | NonSymmetricTensor { .. }
        | EllipticityViolation { .. }
        | BoundaryTensorNotAxisAligned { .. }
        | DimensionMismatch { .. }
        | GridTooLarge { .. }
        | InvalidParameter { .. }
        | UnsupportedModel(_) => BidomainStatus::InvalidInput,
        CertificateInfeasible(_) => BidomainStatus::Certificate,
        Io(_) | Parse { .. } => BidomainStatus::Io,
        _ => BidomainStatus::Numerical,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (BidomainStatus, String)>) -> BidomainStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BidomainStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("panic inside bidomain");
            BidomainStatus::Panic
        }
    }
}

fn lift(err: BidomainError) -> (BidomainStatus, String) {
    (status_of(&err), err.to_string())
}

fn null() -> (BidomainStatus, String) {
    (BidomainStatus::NullPointer, "null pointer argument".into())
}

unsafe fn text<'a>(ptr: *const c_char) -> Result<&'a str, (BidomainStatus, String)> {
    if ptr.is_null() {
        return Err(null());
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| (BidomainStatus::InvalidUtf8, e.to_string()))
}

unsafe fn handle<'a>(ptr: *const BidomainProblem) -> Result<&'a BidomainProblem, (BidomainStatus, String)> {
    ptr.as_ref().ok_or_else(null)
}

/// Copies `src` into `(dst, len)`, or reports the required length.
unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), (BidomainStatus, String)> {
    if dst.is_null() {
        return Err(null());
    }
    if len < src.len() {
        return Err((
            BidomainStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} required", src.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message describing the last failed call on this thread, or an empty
/// string. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bidomain_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bidomain_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses INI configuration text and assembles the problem: operator,
/// eigenbasis, certificate, forcing and absorbing-ball radius. Relative paths
/// in the configuration resolve against `base_dir`, which may be null.
///
/// # Safety
/// `config_text` and a non-null `base_dir` must be NUL-terminated strings;
/// `out` must be a valid pointer. Release the handle with
/// [`bidomain_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn bidomain_problem_new(
    config_text: *const c_char,
    base_dir: *const c_char,
    seed: u64,
    out: *mut *mut BidomainProblem,
) -> BidomainStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = std::ptr::null_mut();
        let config_text = text(config_text)?;
        let base = if base_dir.is_null() { PathBuf::new() } else { PathBuf::from(text(base_dir)?) };
        let config = RunConfig::parse_str(config_text, &base).map_err(lift)?;
        let problem = Problem::build(config, seed).map_err(lift)?;
        *out = Box::into_raw(Box::new(BidomainProblem { problem, solution: None }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `problem` must come from [`bidomain_problem_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn bidomain_problem_free(problem: *mut BidomainProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of Galerkin modes, including the constant mode.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bidomain_problem_modes(problem: *const BidomainProblem, modes: *mut usize) -> BidomainStatus {
    guard(|| {
        let p = handle(problem)?;
        *modes.as_mut().ok_or_else(null)? = p.problem.basis.modes();
        Ok(())
    })
}

/// Number of grid nodes.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bidomain_problem_nodes(problem: *const BidomainProblem, nodes: *mut usize) -> BidomainStatus {
    guard(|| {
        let p = handle(problem)?;
        *nodes.as_mut().ok_or_else(null)? = p.problem.grid.len();
        Ok(())
    })
}

/// Writes the eigenvalues `λ_0 ≤ … ≤ λ_k` into `values`, which must hold at
/// least `bidomain_problem_modes` entries.
///
/// # Safety
/// `values` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bidomain_problem_eigenvalues(
    problem: *const BidomainProblem,
    values: *mut f64,
    len: usize,
) -> BidomainStatus {
    guard(|| copy_out(&handle(problem)?.problem.basis.eigenvalues, values, len))
}

/// Radius `R` of the absorbing ball in the energy norm.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bidomain_problem_radius(problem: *const BidomainProblem, radius: *mut f64) -> BidomainStatus {
    guard(|| {
        let p = handle(problem)?;
        *radius.as_mut().ok_or_else(null)? = p.problem.radius;
        Ok(())
    })
}

/// One-sided Lipschitz constant `λ_f` of the cubic reaction. Only defined
/// for FitzHugh–Nagumo; other models give [`BidomainStatus::InvalidInput`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn bidomain_problem_lipschitz(problem: *const BidomainProblem, lambda_f: *mut f64) -> BidomainStatus {
    guard(|| {
        let p = handle(problem)?;
        let lip = one_sided_lipschitz(&p.problem.model, &Lattice::square(2.0, 0.01)).map_err(lift)?;
        *lambda_f.as_mut().ok_or_else(null)? = lip.lambda_f;
        Ok(())
    })
}

/// Solves for the time-periodic orbit from the configured initial state.
/// `residual` and `iterations` receive the final Poincaré residual and the
/// iteration count; failure to reach the tolerance is [`BidomainStatus::Numerical`].
///
/// # Safety
/// Pointers must be valid; `problem` must not be shared with another thread.
#[no_mangle]
pub unsafe extern "C" fn bidomain_problem_solve_periodic(
    problem: *mut BidomainProblem,
    residual: *mut f64,
    iterations: *mut usize,
) -> BidomainStatus {
    guard(|| {
        let p = problem.as_mut().ok_or_else(null)?;
        let x0 = p.problem.initial_state().map_err(lift)?;
        let rep = solve_periodic(&p.problem.system(), &x0, &p.problem.periodic_options()).map_err(lift)?;
        *residual.as_mut().ok_or_else(null)? = rep.residual;
        *iterations.as_mut().ok_or_else(null)? = rep.iterations;
        let converged = rep.converged;
        p.solution = Some(rep);
        if converged {
            Ok(())
        } else {
            Err((BidomainStatus::Numerical, "periodic solve did not reach tolerance".into()))
        }
    })
}

/// Modal coefficients of the periodic orbit at `t = 0`: `alpha` for the
/// potential, `beta` for the recovery variable, each of length `modes`.
///
/// # Safety
/// `alpha` and `beta` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bidomain_problem_fixed_point(
    problem: *const BidomainProblem,
    alpha: *mut f64,
    beta: *mut f64,
    len: usize,
) -> BidomainStatus {
    guard(|| {
        let p = handle(problem)?;
        let x: &ModalState = match &p.solution {
            Some(s) => &s.fixed_point,
            None => return Err((BidomainStatus::NotSolved, "no periodic solution yet".into())),
        };
        copy_out(&x.alpha, alpha, len)?;
        copy_out(&x.beta, beta, len)
    })
}

/// Runs a CLI subcommand (`assemble`, `eigens`, `solve-periodic`, ...) on a
/// configuration file, writing artifacts under `out_dir` (null for the
/// configured directory). `passed` receives 1 when every asserted check held.
///
/// # Safety
/// Strings must be NUL-terminated; `passed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bidomain_run(
    subcommand: *const c_char,
    config_path: *const c_char,
    out_dir: *const c_char,
    seed: u64,
    passed: *mut i32,
) -> BidomainStatus {
    guard(|| {
        let sub: Subcommand = text(subcommand)?
            .parse()
            .map_err(|e: String| (BidomainStatus::Config, e))?;
        let config = bidomain::config::parse_config(Path::new(text(config_path)?)).map_err(lift)?;
        let out = if out_dir.is_null() { None } else { Some(PathBuf::from(text(out_dir)?)) };
        let opts = RunOptions { out, seed, quiet: true };
        let report = run(sub, config, &opts).map_err(lift)?;
        *passed.as_mut().ok_or_else(null)? = i32::from(report.passed());
        Ok(())
    })
}
