//! C ABI over `spo-core`.
//!
//! Problems and solve reports are opaque heap handles released with their
//! `*_free` function. Every entry point returns an [`SpoStatus`]; on failure
//! a message is kept per thread and read back with [`spo_last_error`].
//! Panics never cross the boundary.
//!
//! Matrices are passed row-major. Non-convergence of the Newton method is not
//! an error: it is reported through [`spo_report_status`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::{DMatrix, DVector};
use spo_core::apps::{self, Instance, QuadraticInstance};
use spo_core::{cli, newton, presolve, NcpKind, NewtonOptions, OperatorKind, SolveReport, SolveStatus, SpoError};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Parse = 4,
    Numerical = 5,
    Io = 6,
    /// Caller buffer too small; the required length was written back.
    BufferTooSmall = 7,
    Panic = 99,
}

/// Outcome of a Newton solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpoSolveStatus {
    Converged = 0,
    MaxIterations = 1,
    StepBlowup = 2,
    LinearSolveFailure = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpoOperator {
    Full = 0,
    Reduced = 1,
    /// Lifts free variables to `x = x⁺ − x⁻` automatically.
    Complementary = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpoNcp {
    FischerBurmeister = 0,
    Minimum = 1,
}

/// Newton settings; fill with [`spo_options_default`] before changing fields.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpoOptions {
    pub max_iter: usize,
    pub eps: f64,
    pub delta: f64,
    /// `INFINITY` disables the step bound.
    pub step_safety: f64,
    pub ncp: SpoNcp,
    pub op: SpoOperator,
}

/// Opaque problem handle.
pub struct SpoProblem {
    instance: Instance,
    problem: spo_core::SpoProblem,
}

/// Opaque solve report handle.
pub struct SpoReport {
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &SpoError) -> SpoStatus {
    match err {
        SpoError::DimensionMismatch { .. } => SpoStatus::DimensionMismatch,
        SpoError::InvalidArgument(_) | SpoError::RequiresNonneg => SpoStatus::InvalidArgument,
        SpoError::Parse { .. } | SpoError::Json(_) => SpoStatus::Parse,
        SpoError::Io(_) => SpoStatus::Io,
        _ => SpoStatus::Numerical,
    }
}

struct Failure(SpoStatus, String);

impl From<SpoError> for Failure {
    fn from(e: SpoError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

impl From<cli::CliError> for Failure {
    fn from(e: cli::CliError) -> Self {
        match e {
            cli::CliError::Spo(inner) => inner.into(),
            cli::CliError::Usage(m) => Failure(SpoStatus::InvalidArgument, m),
            other => Failure(SpoStatus::Io, other.to_string()),
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SpoStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status and the thread's
/// last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SpoStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SpoStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SpoStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_to(src: &[f64], out: *mut f64, len: usize, needed: *mut usize) -> Result<(), Failure> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if len < src.len() {
        return Err(Failure(
            SpoStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if out.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

fn make_problem(instance: Instance) -> Result<SpoProblem, Failure> {
    let problem = apps::build_spo(&instance)?;
    Ok(SpoProblem { instance, problem })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn spo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn spo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an instance from its JSON serialization.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spo_problem_from_json(json: *const c_char, out: *mut *mut SpoProblem) -> SpoStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        write_out(out, make_problem(Instance::from_json(text)?)?)
    })
}

/// Generates a benchmark instance from `FAMILY:PARAMS`, e.g.
/// `"sensing:n=64,m=32,p=4,s=8,seed=1,rho=0.5"`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spo_problem_generate(spec: *const c_char, out: *mut *mut SpoProblem) -> SpoStatus {
    guard(|| {
        let spec = str_arg(spec, "spec")?;
        match cli::parse_problem_spec(spec)? {
            cli::ProblemSource::Generated { family, params } => {
                write_out(out, make_problem(cli::generate(family, &params, 0)?)?)
            }
            cli::ProblemSource::File(_) => Err(Failure(
                SpoStatus::InvalidArgument,
                format!("'{spec}' is not FAMILY:PARAMS"),
            )),
        }
    })
}

/// `min ½xᵀQx + cᵀx + ρ‖x‖₀  s.t.  A_eq x = b_eq, A_in x ≤ b_in` and, if
/// `nonneg` is nonzero, `x ≥ 0`. `q` is `n × n`, `a_eq` is `p × n`, `a_in` is
/// `m × n`, all row-major; pointers may be null when the length is zero.
///
/// # Safety
/// Each pointer must reference the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn spo_problem_quadratic(
    n: usize,
    q: *const f64,
    c: *const f64,
    p: usize,
    a_eq: *const f64,
    b_eq: *const f64,
    m: usize,
    a_in: *const f64,
    b_in: *const f64,
    nonneg: i32,
    rho: f64,
    out: *mut *mut SpoProblem,
) -> SpoStatus {
    guard(|| {
        let inst = QuadraticInstance {
            q: DMatrix::from_row_slice(n, n, slice_arg(q, n * n, "q")?),
            c: DVector::from_column_slice(slice_arg(c, n, "c")?),
            a_eq: DMatrix::from_row_slice(p, n, slice_arg(a_eq, p * n, "a_eq")?),
            b_eq: DVector::from_column_slice(slice_arg(b_eq, p, "b_eq")?),
            a_in: DMatrix::from_row_slice(m, n, slice_arg(a_in, m * n, "a_in")?),
            b_in: DVector::from_column_slice(slice_arg(b_in, m, "b_in")?),
            nonneg: nonneg != 0,
            rho,
            seed: None,
        };
        let mut instance = Instance::Quadratic(inst);
        instance.normalize()?;
        write_out(out, make_problem(instance)?)
    })
}

/// Releases a problem; null is ignored.
///
/// # Safety
/// `problem` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spo_problem_free(problem: *mut SpoProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Variables `n`, inequalities `m`, equalities `p`; any output may be null.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spo_problem_dims(problem: *const SpoProblem, n: *mut usize, m: *mut usize, p: *mut usize) -> SpoStatus {
    guard(|| {
        let pb = &problem.as_ref().ok_or_else(|| null("problem"))?.problem;
        for (dst, v) in [(n, pb.n()), (m, pb.m()), (p, pb.p())] {
            if !dst.is_null() {
                *dst = v;
            }
        }
        Ok(())
    })
}

/// Replaces the penalty parameter.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spo_problem_set_rho(problem: *mut SpoProblem, rho: f64) -> SpoStatus {
    guard(|| {
        let h = problem.as_mut().ok_or_else(|| null("problem"))?;
        let mut instance = h.instance.clone();
        instance.set_rho(rho);
        instance.normalize()?;
        *h = make_problem(instance)?;
        Ok(())
    })
}

/// `f(x) + ρ‖x‖₀(δ)`.
///
/// # Safety
/// `problem` must be a live handle, `x` must hold `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn spo_objective(problem: *const SpoProblem, x: *const f64, n: usize, delta: f64, out: *mut f64) -> SpoStatus {
    guard(|| {
        let pb = &problem.as_ref().ok_or_else(|| null("problem"))?.problem;
        let x = DVector::from_column_slice(slice_arg(x, n, "x")?);
        let v = spo_core::model::eval_spo_objective(pb, &x, delta)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// ℓ1-surrogate starting point into `x0_out` (capacity `len`); the required
/// length goes to `needed` when it is not null.
///
/// # Safety
/// `x0_out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spo_presolve(problem: *const SpoProblem, x0_out: *mut f64, len: usize, needed: *mut usize) -> SpoStatus {
    guard(|| {
        let pb = &problem.as_ref().ok_or_else(|| null("problem"))?.problem;
        let x0 = presolve::presolve_l1(pb)?;
        copy_to(x0.as_slice(), x0_out, len, needed)
    })
}

/// Library defaults: 100 iterations, ε = 1e−6, δ = 1e−4, step bound 100,
/// Fischer–Burmeister, full operator.
///
/// # Safety
/// `opts` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spo_options_default(opts: *mut SpoOptions) -> SpoStatus {
    guard(|| {
        let d = NewtonOptions::default();
        *opts.as_mut().ok_or_else(|| null("opts"))? = SpoOptions {
            max_iter: d.max_iter,
            eps: d.eps,
            delta: d.delta,
            step_safety: d.step_safety,
            ncp: SpoNcp::FischerBurmeister,
            op: SpoOperator::Full,
        };
        Ok(())
    })
}

fn to_options(o: &SpoOptions) -> NewtonOptions {
    NewtonOptions {
        max_iter: o.max_iter,
        eps: o.eps,
        delta: o.delta,
        step_safety: o.step_safety,
        ncp: match o.ncp {
            SpoNcp::FischerBurmeister => NcpKind::FischerBurmeister,
            SpoNcp::Minimum => NcpKind::Minimum,
        },
        kind: match o.op {
            SpoOperator::Full => OperatorKind::Full,
            SpoOperator::Reduced => OperatorKind::Reduced,
            SpoOperator::Complementary => OperatorKind::Complementary,
        },
    }
}

/// Runs the Newton method from `x0` (length `n`), or from the ℓ1 presolve
/// when `x0` is null. `opts` may be null for the defaults.
///
/// # Safety
/// `problem` must be a live handle, `x0` null or `n` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spo_solve(
    problem: *const SpoProblem,
    x0: *const f64,
    n: usize,
    opts: *const SpoOptions,
    out: *mut *mut SpoReport,
) -> SpoStatus {
    guard(|| {
        let pb = &problem.as_ref().ok_or_else(|| null("problem"))?.problem;
        let options = opts.as_ref().map_or_else(NewtonOptions::default, to_options);
        let x0 = if x0.is_null() {
            presolve::presolve_l1(pb)?
        } else {
            DVector::from_column_slice(slice::from_raw_parts(x0, n))
        };
        let report = newton::solve_auto(pb, &x0, &options)?;
        write_out(out, SpoReport { report })
    })
}

/// Releases a report; null is ignored.
///
/// # Safety
/// `report` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spo_report_free(report: *mut SpoReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spo_report_status(report: *const SpoReport, out: *mut SpoSolveStatus) -> SpoStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.report;
        *out.as_mut().ok_or_else(|| null("out"))? = match r.status {
            SolveStatus::Converged => SpoSolveStatus::Converged,
            SolveStatus::MaxIterations => SpoSolveStatus::MaxIterations,
            SolveStatus::StepBlowup => SpoSolveStatus::StepBlowup,
            SolveStatus::LinearSolveFailure => SpoSolveStatus::LinearSolveFailure,
        };
        Ok(())
    })
}

/// Iterations taken, final objective `f + ρ‖x‖₀(δ)`, support size and final
/// S-stationarity residual; any output may be null.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spo_report_summary(
    report: *const SpoReport,
    iterations: *mut usize,
    objective: *mut f64,
    l0: *mut usize,
    residual: *mut f64,
) -> SpoStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.report;
        if !iterations.is_null() {
            *iterations = r.iterations;
        }
        if !objective.is_null() {
            *objective = r.objective;
        }
        if !l0.is_null() {
            *l0 = r.l0_count;
        }
        if !residual.is_null() {
            *residual = r.final_residual();
        }
        Ok(())
    })
}

/// Final `x` into `x_out` (capacity `len`); see [`spo_presolve`] for `needed`.
///
/// # Safety
/// `x_out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spo_report_x(report: *const SpoReport, x_out: *mut f64, len: usize, needed: *mut usize) -> SpoStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.report;
        copy_to(r.final_point.x.as_slice(), x_out, len, needed)
    })
}

/// Full report as JSON; release with [`spo_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn spo_report_to_json(report: *const SpoReport, out: *mut *mut c_char) -> SpoStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.report;
        let text = serde_json::to_string(r).map_err(SpoError::from)?;
        let c = CString::new(text).map_err(|e| Failure(SpoStatus::Numerical, e.to_string()))?;
        *out.as_mut().ok_or_else(|| null("out"))? = c.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn spo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
