//! C interface to the darcy-bddc solver.
//!
//! Problems and solutions are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`DbStatus`]; the message of the last failure on the calling thread is
//! available from [`db_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use darcy_bddc::decomposition::{Decomposition, ScalingKind};
use darcy_bddc::grid_fem::{Grid, Permeability, SaddleSystem, Wells};
use darcy_bddc::solver::{Bddc, ConstraintMode, SolveConfig, SolveReport};
use darcy_bddc::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbStatus {
    Ok = 0,
    InvalidArgument = 1,
    Format = 2,
    Numerical = 3,
    /// The solve stopped at the iteration limit; the solution handle is
    /// still produced.
    NotConverged = 4,
    Io = 5,
    TooLarge = 6,
    Internal = 7,
    NullPointer = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbScaling {
    Multiplicity = 0,
    Stiffness = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DbConstraints {
    Initial = 0,
    Adaptive = 1,
    Multiscale = 2,
}

/// Solver settings. `tau` may be `INFINITY`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DbConfig {
    pub tau: f64,
    pub scaling: DbScaling,
    pub tol: f64,
    pub maxit: usize,
    pub constraints: DbConstraints,
}

/// Assembled system with its decomposition.
pub struct DbProblem {
    system: SaddleSystem,
    decomposition: Decomposition,
}

/// Result of [`db_solve`].
pub struct DbSolution {
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DbStatus {
    match e {
        Error::InvalidArgument(_) | Error::CompatibilityViolation { .. } | Error::Configuration(_) => {
            DbStatus::InvalidArgument
        }
        Error::Format(_) => DbStatus::Format,
        Error::NumericalFailure { .. } | Error::ConstraintRank { .. } | Error::Indefinite { .. } => DbStatus::Numerical,
        Error::NonConvergence(_) => DbStatus::NotConverged,
        Error::TooLarge { .. } => DbStatus::TooLarge,
        Error::Io(_) => DbStatus::Io,
        Error::InternalConsistency(_) => DbStatus::Internal,
    }
}

fn guarded(f: impl FnOnce() -> Result<DbStatus, Error>) -> DbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside darcy-bddc");
            DbStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("null pointer: ", stringify!($p)));
            return DbStatus::NullPointer;
        })+
    };
}

/// Message of the last failed call on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn db_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default settings: no adaptivity, multiplicity scaling, tolerance 1e-6.
#[no_mangle]
pub extern "C" fn db_config_default() -> DbConfig {
    let d = SolveConfig::default();
    DbConfig {
        tau: d.tau,
        scaling: DbScaling::Multiplicity,
        tol: d.tol,
        maxit: d.maxit,
        constraints: DbConstraints::Initial,
    }
}

/// Assembles a problem on a `dim`-dimensional grid (2 or 3).
///
/// `counts`, `sizes` and `splits` hold `dim` entries; `perm` holds
/// `dim * n_cells` values (kx, ky[, kz] per cell, x fastest). Wells are one
/// injector and one producer of equal `strength`.
///
/// # Safety
/// All pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_problem_new(
    dim: usize,
    counts: *const usize,
    sizes: *const f64,
    perm: *const f64,
    perm_len: usize,
    splits: *const usize,
    source_cell: usize,
    sink_cell: usize,
    strength: f64,
    out: *mut *mut DbProblem,
) -> DbStatus {
    non_null!(counts, sizes, perm, splits, out);
    guarded(|| {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {dim}")));
        }
        let counts = slice::from_raw_parts(counts, dim);
        let sizes = slice::from_raw_parts(sizes, dim);
        let splits = slice::from_raw_parts(splits, dim);
        let grid = Grid::new(dim, counts, sizes)?;
        if perm_len != dim * grid.n_cells() {
            return Err(Error::InvalidArgument(format!(
                "expected {} permeability values, got {perm_len}",
                dim * grid.n_cells()
            )));
        }
        let perm = Permeability::new(dim, slice::from_raw_parts(perm, perm_len).to_vec())?;
        let wells = Wells { source: source_cell, sink: sink_cell, strength };
        let system = SaddleSystem::assemble(&grid, &perm, wells)?;
        let decomposition = Decomposition::regular(&grid, splits)?;
        *out = Box::into_raw(Box::new(DbProblem { system, decomposition }));
        Ok(DbStatus::Ok)
    })
}

/// # Safety
/// `problem` must come from [`db_problem_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn db_problem_free(problem: *mut DbProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of flux unknowns (interior faces).
///
/// # Safety
/// `problem` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn db_problem_n_flux(problem: *const DbProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.system.n_flux())
}

/// # Safety
/// `problem` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn db_problem_n_cells(problem: *const DbProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.system.n_cells())
}

/// Solves `problem`. On `DB_STATUS_OK` and `DB_STATUS_NOT_CONVERGED` a
/// solution handle is written to `out`.
///
/// # Safety
/// `problem` and `config` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn db_solve(
    problem: *const DbProblem,
    config: *const DbConfig,
    out: *mut *mut DbSolution,
) -> DbStatus {
    non_null!(problem, config, out);
    guarded(|| {
        let p = &*problem;
        let c = &*config;
        let cfg = SolveConfig {
            tau: c.tau,
            scaling: match c.scaling {
                DbScaling::Multiplicity => ScalingKind::Multiplicity,
                DbScaling::Stiffness => ScalingKind::Stiffness,
            },
            tol: c.tol,
            maxit: c.maxit,
            constraints: match c.constraints {
                DbConstraints::Initial => ConstraintMode::Initial,
                DbConstraints::Adaptive => ConstraintMode::Adaptive,
                DbConstraints::Multiscale => ConstraintMode::Multiscale,
            },
        };
        let bddc = Bddc::setup(&p.system, &p.decomposition, &cfg)?;
        let (report, status) = match bddc.solve(None) {
            Ok(r) => (r, DbStatus::Ok),
            Err(Error::NonConvergence(r)) => {
                set_error(&format!("no convergence in {} iterations", r.iterations));
                (*r, DbStatus::NotConverged)
            }
            Err(e) => return Err(e),
        };
        *out = Box::into_raw(Box::new(DbSolution { report }));
        Ok(status)
    })
}

/// # Safety
/// `solution` must come from [`db_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn db_solution_free(solution: *mut DbSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> DbStatus {
    if dst.is_null() {
        set_error("null pointer: dst");
        return DbStatus::NullPointer;
    }
    if len != src.len() {
        set_error(&format!("buffer holds {len} values, {} required", src.len()));
        return DbStatus::InvalidArgument;
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
    DbStatus::Ok
}

/// Copies the fluxes (length [`db_problem_n_flux`]) into `dst`.
///
/// # Safety
/// `dst` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn db_solution_flux(solution: *const DbSolution, dst: *mut f64, len: usize) -> DbStatus {
    non_null!(solution);
    copy_out(&(*solution).report.u, dst, len)
}

/// Copies the pressures (length [`db_problem_n_cells`], zero mean) into `dst`.
///
/// # Safety
/// `dst` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn db_solution_pressure(solution: *const DbSolution, dst: *mut f64, len: usize) -> DbStatus {
    non_null!(solution);
    copy_out(&(*solution).report.p, dst, len)
}

/// # Safety
/// `solution` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn db_solution_iterations(solution: *const DbSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.report.iterations)
}

/// Lanczos condition number estimate.
///
/// # Safety
/// `solution` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn db_solution_kappa(solution: *const DbSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.report.kappa)
}

/// Coarse space size.
///
/// # Safety
/// `solution` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn db_solution_n_coarse(solution: *const DbSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.report.n_c)
}

/// Condition number indicator of the adaptive constraints, NaN otherwise.
///
/// # Safety
/// `solution` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn db_solution_omega_tilde(solution: *const DbSolution) -> f64 {
    solution.as_ref().and_then(|s| s.report.omega_tilde).unwrap_or(f64::NAN)
}
