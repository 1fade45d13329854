//! Nonsmooth Lagrange–Newton iteration `z ← z + d`, `H d = −T(z)`.
//!
//! No line search or globalization: the method is local and relies on a good
//! starting point from [`crate::presolve`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpoError};
use crate::kkt::{self, KktLayout, OperatorKind};
use crate::linalg::{self, SingularMatrix};
use crate::model::{l0_norm, PrimalDualPoint, SolveReport, SolveStatus, SpoProblem, DEFAULT_DELTA};
use crate::ncp::NcpKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Termination tolerance on the S-stationarity residual.
    pub eps: f64,
    /// Support threshold.
    pub delta: f64,
    /// Largest accepted `‖d‖₂`; may be infinite.
    #[serde(with = "crate::serde_dense::float")]
    pub step_safety: f64,
    pub ncp: NcpKind,
    pub kind: OperatorKind,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            eps: 1e-6,
            delta: DEFAULT_DELTA,
            step_safety: 100.0,
            ncp: NcpKind::FischerBurmeister,
            kind: OperatorKind::Full,
        }
    }
}

impl NewtonOptions {
    pub fn with_kind(mut self, kind: OperatorKind) -> Self {
        self.kind = kind;
        self
    }

    /// Defaults without a step bound, as used by the benchmark drivers.
    ///
    /// At a solution `γᵢ = ρ/xᵢ` on the support, so from an ℓ1 start with
    /// small entries the first steps routinely exceed any fixed bound on runs
    /// that go on to converge.
    pub fn unbounded(kind: OperatorKind) -> Self {
        Self {
            step_safety: f64::INFINITY,
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(SpoError::InvalidArgument(msg.to_string()));
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if !(self.eps >= 0.0) || !(self.delta >= 0.0) {
            return bad("eps and delta must be nonnegative");
        }
        if !(self.step_safety > 0.0) {
            return bad("step_safety must be positive");
        }
        Ok(())
    }
}

/// `(x0, e, 0, 0, 0)`.
pub fn default_init(problem: &SpoProblem, x0: &DVector<f64>) -> Result<PrimalDualPoint> {
    SpoError::check_dim("x0", problem.n(), x0.len())?;
    let mut z = PrimalDualPoint::zeros(problem.n(), problem.m(), problem.p());
    z.x = x0.clone();
    z.y.fill(1.0);
    Ok(z)
}

/// Relative pivot threshold used for Newton steps.
///
/// Zero: only exactly singular elements stop the iteration. Near the solution
/// the element is often numerically singular in directions that do not matter
/// (a `γᵢ` column vanishes when `xᵢ ≈ yᵢ ≈ 0`); the LU step is still usable
/// there, and any relative threshold aborts most portfolio runs.
pub const NEWTON_PIVOT_TOL: f64 = 0.0;

/// Dense LU with partial pivoting and the checked threshold of [`linalg::lu_solve`].
pub fn linear_solve(
    matrix: &DMatrix<f64>,
    rhs: &DVector<f64>,
) -> std::result::Result<DVector<f64>, SingularMatrix> {
    linalg::lu_solve(matrix, rhs)
}

/// Runs the iteration from `default_init(x0)`.
pub fn solve(problem: &SpoProblem, x0: &DVector<f64>, opts: &NewtonOptions) -> Result<SolveReport> {
    let z0 = default_init(problem, x0)?;
    solve_from(problem, z0, opts)
}

/// Runs the iteration from an arbitrary primal-dual point.
///
/// Input errors (dimensions, options, operator/problem mismatch) are returned
/// as `Err`; numerical failures end up in [`SolveReport::status`].
pub fn solve_from(
    problem: &SpoProblem,
    start: PrimalDualPoint,
    opts: &NewtonOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    let layout = KktLayout::for_problem(problem, opts.kind);
    // Surfaces dimension and operator errors before iterating.
    let first = kkt::residual(problem, &start, opts.kind, opts.ncp)?;
    let rho = problem.rho();

    let mut z = kkt::pack(&start, &layout);
    let mut point = kkt::unpack(&z, &layout, rho);
    let sstat = |pt: &PrimalDualPoint| {
        kkt::s_stationarity_residual(problem, &pt.x, &pt.lambda, &pt.mu, opts.delta, opts.ncp)
    };

    let mut residual_history = vec![sstat(&point)?];
    let mut operator_residual_history = vec![first.norm()];
    let mut current = Some(first);
    let mut status = None;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if *residual_history.last().unwrap() <= opts.eps {
            status = Some(SolveStatus::Converged);
            break;
        }
        let t = match current.take() {
            Some(t) => t,
            None => match kkt::residual(problem, &point, opts.kind, opts.ncp) {
                Ok(t) => t,
                Err(_) => {
                    status = Some(SolveStatus::StepBlowup);
                    break;
                }
            },
        };
        let Ok(jac) = kkt::jacobian(problem, &point, opts.kind, opts.ncp) else {
            status = Some(SolveStatus::StepBlowup);
            break;
        };
        let d = match linalg::lu_solve_with_tol(&jac, &(-&t.vector), NEWTON_PIVOT_TOL) {
            Ok(d) => d,
            Err(_) => {
                status = Some(SolveStatus::LinearSolveFailure);
                break;
            }
        };
        if !(d.norm() <= opts.step_safety) {
            status = Some(SolveStatus::StepBlowup);
            break;
        }
        z += d;
        point = kkt::unpack(&z, &layout, rho);
        iterations += 1;

        // A non-finite oracle value at the new iterate counts as divergence.
        let (Ok(res), Ok(t)) = (
            sstat(&point),
            kkt::residual(problem, &point, opts.kind, opts.ncp),
        ) else {
            residual_history.push(f64::INFINITY);
            operator_residual_history.push(f64::INFINITY);
            status = Some(SolveStatus::StepBlowup);
            break;
        };
        residual_history.push(res);
        operator_residual_history.push(t.norm());
        current = Some(t);
    }

    let status = status.unwrap_or_else(|| {
        if *residual_history.last().unwrap() <= opts.eps {
            SolveStatus::Converged
        } else {
            SolveStatus::MaxIterations
        }
    });
    build_report(problem, point, status, iterations, residual_history, operator_residual_history, opts.delta)
}

fn build_report(
    problem: &SpoProblem,
    final_point: PrimalDualPoint,
    status: SolveStatus,
    iterations: usize,
    residual_history: Vec<f64>,
    operator_residual_history: Vec<f64>,
    delta: f64,
) -> Result<SolveReport> {
    let l0_count = l0_norm(&final_point.x, delta);
    let objective = problem
        .f(&final_point.x)
        .map(|f| f + problem.rho() * l0_count as f64)
        .unwrap_or(f64::NAN);
    Ok(SolveReport {
        status,
        iterations,
        residual_history,
        operator_residual_history,
        final_point,
        objective,
        l0_count,
        split_variables: false,
    })
}

/// Like [`solve`], but for [`OperatorKind::Complementary`] on a problem without
/// `x ≥ 0` it solves the `x = x⁺ − x⁻` lift and maps the result back.
///
/// The residual histories are those of the lifted problem; the final point,
/// objective and support count refer to the original variables.
pub fn solve_auto(
    problem: &SpoProblem,
    x0: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<SolveReport> {
    if opts.kind != OperatorKind::Complementary || problem.nonneg() {
        return solve(problem, x0, opts);
    }
    SpoError::check_dim("x0", problem.n(), x0.len())?;
    let lifted = kkt::split_variables(problem)?;
    let report = solve(&lifted, &kkt::split_point(x0), opts)?;
    let final_point = kkt::unsplit_point(problem, &report.final_point, opts.delta)?;
    let mut out = build_report(
        problem,
        final_point,
        report.status,
        report.iterations,
        report.residual_history,
        report.operator_residual_history,
        opts.delta,
    )?;
    out.split_variables = true;
    Ok(out)
}
