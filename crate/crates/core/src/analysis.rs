//! Verification instruments: constraint qualifications, second-order
//! conditions, BD-regularity, and an exhaustive support-enumeration oracle.
//!
//! Every rank decision uses the singular-value cutoff [`RANK_TOL`]`·σ_max`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apps::SeededRng;
use crate::error::{Result, SpoError};
use crate::kkt::{self, OperatorKind, SelectionOverride};
use crate::linalg::{self, RANK_TOL};
use crate::model::{
    eval_spo_objective, lagrangian_gradient, lagrangian_hessian, PrimalDualPoint, SpoProblem,
    DEFAULT_ACTIVE_TOL,
};
use crate::ncp::{BsubRow, NcpKind};

/// Outcome of a linear-independence check on a stacked gradient system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqReport {
    pub holds: bool,
    pub gradient_matrix_rank: usize,
    /// Number of stacked gradients, i.e. the rank required for independence.
    pub needed_rank: usize,
    /// `0` when there are more gradients than variables, `+∞` when there are none.
    #[serde(with = "crate::serde_dense::float")]
    pub smallest_singular_value: f64,
}

fn cq_report(rows: &[DVector<f64>], ncols: usize) -> CqReport {
    let needed = rows.len();
    if needed == 0 {
        return CqReport {
            holds: true,
            gradient_matrix_rank: 0,
            needed_rank: 0,
            smallest_singular_value: f64::INFINITY,
        };
    }
    let mat = DMatrix::from_fn(needed, ncols, |i, j| rows[i][j]);
    let (rank, smin) = linalg::rank(&mat);
    CqReport {
        holds: rank == needed,
        gradient_matrix_rank: rank,
        needed_rank: needed,
        smallest_singular_value: smin,
    }
}

fn is_zero(v: f64, delta: f64) -> bool {
    if delta == 0.0 {
        v == 0.0
    } else {
        v.abs() < delta
    }
}

fn unit(n: usize, i: usize, scale: f64) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = scale;
    e
}

/// SP-LICQ: independence of `∇gᵢ (i ∈ I_g)`, all `∇hᵢ`, and `eᵢ (i ∈ I₀(x; δ))`.
///
/// A structural `x ≥ 0` (see [`SpoProblem::nonneg`]) is handled by the
/// complementarity `φ(x, y) = 0` and adds no rows. Written into `g` instead,
/// its active gradients `−eᵢ` duplicate the `eᵢ` and SP-LICQ fails at every
/// zero component.
pub fn check_sp_licq(problem: &SpoProblem, x: &DVector<f64>, delta: f64, active_tol: f64) -> Result<CqReport> {
    let n = problem.n();
    let mut rows = Vec::new();
    if problem.m() > 0 {
        let g = problem.g(x)?;
        let jg = problem.g_jacobian(x)?;
        rows.extend((0..problem.m()).filter(|&j| g[j].abs() <= active_tol).map(|j| jg.row(j).transpose()));
    }
    if problem.p() > 0 {
        let jh = problem.h_jacobian(x)?;
        rows.extend((0..problem.p()).map(|j| jh.row(j).transpose()));
    }
    rows.extend((0..n).filter(|&i| is_zero(x[i], delta)).map(|i| unit(n, i, 1.0)));
    Ok(cq_report(&rows, n))
}

/// SP-LICQ next to standard LICQ of both smooth reformulations at `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LicqEquivalence {
    pub sp_licq: bool,
    /// LICQ for `min f + ρ/2 Σ yᵢ(yᵢ − 2)  s.t.  x ∈ X, x∘y = 0`.
    pub licq_sq: bool,
    /// LICQ for `min f + ρ(n − eᵀy)  s.t.  x ∈ X, x∘y = 0, y ≤ e`.
    pub licq_lin: bool,
}

/// Evaluates the three LICQ variants at `(point.x, point.y)`.
///
/// Only meaningful when no index has `xᵢ = yᵢ = 0`; such points are rejected
/// with [`SpoError::BiActive`].
pub fn check_licq_equivalence(problem: &SpoProblem, point: &PrimalDualPoint, delta: f64) -> Result<LicqEquivalence> {
    point.check_dims(problem)?;
    let n = problem.n();
    let (x, y) = (&point.x, &point.y);
    let bi: Vec<usize> = (0..n).filter(|&i| is_zero(x[i], delta) && is_zero(y[i], delta)).collect();
    if !bi.is_empty() {
        return Err(SpoError::BiActive(bi));
    }
    let tol = DEFAULT_ACTIVE_TOL;
    let sp = check_sp_licq(problem, x, delta, tol)?;

    // Gradients in (x, y)-space.
    let lift = |v: DVector<f64>| {
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&v);
        out
    };
    let mut rows = Vec::new();
    if problem.m() > 0 {
        let g = problem.g(x)?;
        let jg = problem.g_jacobian(x)?;
        rows.extend((0..problem.m()).filter(|&j| g[j].abs() <= tol).map(|j| lift(jg.row(j).transpose())));
    }
    if problem.p() > 0 {
        let jh = problem.h_jacobian(x)?;
        rows.extend((0..problem.p()).map(|j| lift(jh.row(j).transpose())));
    }
    for i in 0..n {
        let mut r = DVector::zeros(2 * n);
        r[i] = y[i];
        r[n + i] = x[i];
        rows.push(r);
    }
    let sq = cq_report(&rows, 2 * n);
    for i in (0..n).filter(|&i| (y[i] - 1.0).abs() <= tol) {
        rows.push(unit(2 * n, n + i, 1.0));
    }
    let lin = cq_report(&rows, 2 * n);
    Ok(LicqEquivalence {
        sp_licq: sp.holds,
        licq_sq: sq.holds,
        licq_lin: lin.holds,
    })
}

/// Rows of the critical-subspace equalities and the remaining cone inequalities.
struct CriticalRows {
    equalities: Vec<DVector<f64>>,
    /// `∇gᵢᵀd ≤ 0` for active constraints with zero multiplier.
    inequalities: Vec<DVector<f64>>,
}

fn critical_rows(problem: &SpoProblem, x: &DVector<f64>, lambda: &DVector<f64>, delta: f64) -> Result<CriticalRows> {
    let n = problem.n();
    let tol = DEFAULT_ACTIVE_TOL;
    let mut out = CriticalRows {
        equalities: Vec::new(),
        inequalities: Vec::new(),
    };
    if problem.m() > 0 {
        let g = problem.g(x)?;
        let jg = problem.g_jacobian(x)?;
        for j in (0..problem.m()).filter(|&j| g[j].abs() <= tol) {
            let row = jg.row(j).transpose();
            if lambda[j] > tol {
                out.equalities.push(row);
            } else {
                out.inequalities.push(row);
            }
        }
    }
    if problem.p() > 0 {
        let jh = problem.h_jacobian(x)?;
        out.equalities.extend((0..problem.p()).map(|j| jh.row(j).transpose()));
    }
    out.equalities.extend((0..n).filter(|&i| is_zero(x[i], delta)).map(|i| unit(n, i, 1.0)));
    Ok(out)
}

fn stack(rows: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoscReport {
    pub holds: bool,
    /// Smallest eigenvalue of the reduced Hessian `Bᵀ∇²L B`; `+∞` for a trivial subspace.
    #[serde(with = "crate::serde_dense::float")]
    pub min_eig: f64,
}

/// Strong SP-SOSC: `∇²ₓₓL^SP` positive definite on the critical subspace
/// `{d : ∇gᵢᵀd = 0 (i ∈ I_g, λᵢ > 0), ∇hᵀd = 0, dᵢ = 0 (i ∈ I₀)}`.
///
/// Positive means above `RANK_TOL·max(1, max|∇²L|)`.
pub fn check_strong_sp_sosc(
    problem: &SpoProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
    delta: f64,
) -> Result<SoscReport> {
    let n = problem.n();
    let hess = lagrangian_hessian(problem, x, lambda, mu)?;
    let rows = critical_rows(problem, x, lambda, delta)?;
    let basis = linalg::null_space(&stack(&rows.equalities, n), n);
    if basis.ncols() == 0 {
        return Ok(SoscReport {
            holds: true,
            min_eig: f64::INFINITY,
        });
    }
    let reduced = basis.transpose() * &hess * &basis;
    let min_eig = linalg::min_eigenvalue(&reduced);
    Ok(SoscReport {
        holds: min_eig > RANK_TOL * hess.amax().max(1.0),
        min_eig,
    })
}

const SOSC_SAMPLE_SEED: u64 = 0x5eed_c0de;

/// Sampled second-order necessary check: `dᵀ∇²L d ≥ −1e−10‖d‖²` for
/// `n_samples` directions `d` in the critical cone.
///
/// Each sample projects a Gaussian vector onto the null space of the cone's
/// equalities plus a random subset of its inequalities (so faces are hit too)
/// and is kept only if it satisfies the remaining inequalities.
/// The stream is seeded with a fixed constant, so the result is reproducible.
pub fn check_second_order_necessary(
    problem: &SpoProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
    delta: f64,
    n_samples: usize,
) -> Result<bool> {
    let n = problem.n();
    let hess = lagrangian_hessian(problem, x, lambda, mu)?;
    let rows = critical_rows(problem, x, lambda, delta)?;
    let eq_basis = linalg::null_space(&stack(&rows.equalities, n), n);
    if eq_basis.ncols() == 0 {
        return Ok(true);
    }
    let mut rng = SeededRng::new(SOSC_SAMPLE_SEED);
    let k = rows.inequalities.len();
    for _ in 0..n_samples {
        let tight: Vec<bool> = (0..k).map(|_| rng.uniform() < 0.5).collect();
        let basis = if tight.iter().any(|&t| t) {
            let mut all = rows.equalities.clone();
            all.extend(rows.inequalities.iter().zip(&tight).filter(|(_, &t)| t).map(|(r, _)| r.clone()));
            linalg::null_space(&stack(&all, n), n)
        } else {
            eq_basis.clone()
        };
        if basis.ncols() == 0 {
            continue;
        }
        let coeffs = DVector::from_fn(basis.ncols(), |_, _| rng.normal());
        let d = &basis * coeffs;
        let dn2 = d.norm_squared();
        if dn2 == 0.0 {
            continue;
        }
        let in_cone = rows
            .inequalities
            .iter()
            .all(|r| r.dot(&d) <= 1e-12 * d.norm() * r.norm().max(1.0));
        if in_cone && d.dot(&(&hess * &d)) < -1e-10 * dn2 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdReport {
    pub regular: bool,
    /// Smallest singular value over the enumerated elements.
    #[serde(with = "crate::serde_dense::float")]
    pub min_sigma: f64,
    pub elements_checked: usize,
    /// Degenerate NCP rows found (`φ(−gⱼ, λⱼ)` rows first, then `φ(xᵢ, yᵢ)` rows).
    pub degenerate_rows: usize,
    /// The enumeration hit the cap before covering every combination.
    pub truncated: bool,
}

/// Threshold on `min σ` for calling a point BD-regular.
pub const BD_SIGMA_TOL: f64 = 1e-10;

#[derive(Clone, Copy)]
enum DegenerateRow {
    G(usize),
    Xy(usize),
}

/// FB: the `e`-direction limit and the two axis limits. Min: both branches.
fn branch_choices(ncp: NcpKind, e_direction: BsubRow) -> Vec<BsubRow> {
    match ncp {
        NcpKind::FischerBurmeister => vec![e_direction, BsubRow::new(0.0, -1.0), BsubRow::new(-1.0, 0.0)],
        NcpKind::Minimum => vec![BsubRow::new(1.0, 0.0), BsubRow::new(0.0, 1.0)],
    }
}

/// BD-regularity of the chosen operator at `point`: every enumerated element of
/// `∂_B T` must have smallest singular value above [`BD_SIGMA_TOL`].
///
/// NCP rows with both arguments within `DEFAULT_ACTIVE_TOL` of zero are
/// branched; all other rows use the single element of the Newton solver.
/// `enumerate_cap` limits the number of assembled elements (at least one is
/// always checked).
pub fn check_bd_regularity(
    problem: &SpoProblem,
    point: &PrimalDualPoint,
    kind: OperatorKind,
    ncp: NcpKind,
    enumerate_cap: usize,
) -> Result<BdReport> {
    point.check_dims(problem)?;
    let tol = DEFAULT_ACTIVE_TOL;
    let mut rows: Vec<(DegenerateRow, Vec<BsubRow>)> = Vec::new();
    if problem.m() > 0 {
        let g = problem.g(&point.x)?;
        let jg = problem.g_jacobian(&point.x)?;
        for j in 0..problem.m() {
            if g[j].abs() <= tol && point.lambda[j].abs() <= tol {
                // e-direction limit of the constraint row, as an (a, b) pair for φ(−g, λ).
                let s: f64 = jg.row(j).sum();
                let q = s.hypot(1.0);
                let e_dir = BsubRow::new(s / q - 1.0, -1.0 / q - 1.0);
                rows.push((DegenerateRow::G(j), branch_choices(ncp, e_dir)));
            }
        }
    }
    if kind == OperatorKind::Complementary {
        let fb_origin = -std::f64::consts::FRAC_1_SQRT_2 - 1.0;
        for i in 0..problem.n() {
            if point.x[i].abs() <= tol && point.y[i].abs() <= tol {
                rows.push((DegenerateRow::Xy(i), branch_choices(ncp, BsubRow::new(fb_origin, fb_origin))));
            }
        }
    }

    let total = rows
        .iter()
        .try_fold(1usize, |acc, (_, c)| acc.checked_mul(c.len()));
    let cap = enumerate_cap.max(1);
    let count = total.map_or(cap, |t| t.min(cap));
    let truncated = total.is_none_or(|t| t > cap);

    let mut min_sigma = f64::INFINITY;
    for idx in 0..count {
        let mut ov = SelectionOverride::default();
        let mut rest = idx;
        for (row, choices) in &rows {
            let sel = choices[rest % choices.len()];
            rest /= choices.len();
            match *row {
                DegenerateRow::G(j) => ov.g.insert(j, sel),
                DegenerateRow::Xy(i) => ov.xy.insert(i, sel),
            };
        }
        let jac = kkt::jacobian_with(problem, point, kind, ncp, Some(&ov))?;
        let sigma = linalg::singular_values(&jac).last().copied().unwrap_or(f64::INFINITY);
        min_sigma = min_sigma.min(sigma);
    }
    Ok(BdReport {
        regular: min_sigma > BD_SIGMA_TOL,
        min_sigma,
        elements_checked: count,
        degenerate_rows: rows.len(),
        truncated,
    })
}

/// Largest `n` accepted by [`brute_force_oracle`].
pub const ORACLE_MAX_N: usize = 12;
/// Largest `m` accepted by [`brute_force_oracle`] (working sets are enumerated).
pub const ORACLE_MAX_M: usize = 10;
const ORACLE_RESIDUAL_TOL: f64 = 1e-9;
const ORACLE_NEIGHBOR_RADIUS: f64 = 1e-3;
const ORACLE_NEWTON_ITERS: usize = 60;
const ORACLE_RANDOM_STARTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    LocalMin,
    SStationaryOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    #[serde(with = "crate::serde_dense::vector")]
    pub x: DVector<f64>,
    #[serde(with = "crate::serde_dense::vector")]
    pub lambda: DVector<f64>,
    #[serde(with = "crate::serde_dense::vector")]
    pub mu: DVector<f64>,
    /// `f(x) + ρ‖x‖₀` with exact zeros.
    pub objective: f64,
    /// S-stationarity residual with `δ = 0`.
    pub residual: f64,
    pub classification: PointClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMin {
    #[serde(with = "crate::serde_dense::vector")]
    pub x: DVector<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportFailure {
    pub support: Vec<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Sorted by objective, then lexicographically by `x`.
    pub stationary_points: Vec<OraclePoint>,
    pub global_min: Option<GlobalMin>,
    /// Supports on which no restricted KKT point was found and at least one
    /// Newton solve broke down (as opposed to every candidate being infeasible).
    pub failures: Vec<SupportFailure>,
}

struct Candidate {
    x: DVector<f64>,
    lambda: DVector<f64>,
    mu: DVector<f64>,
}

/// Newton on the KKT system of `min f  s.t.  g_W = 0, h = 0, x_i = 0 (i ∉ S)`.
fn restricted_newton(
    problem: &SpoProblem,
    support: &[usize],
    working: &[usize],
    start: &DVector<f64>,
) -> std::result::Result<Candidate, String> {
    let (n, m, p) = (problem.n(), problem.m(), problem.p());
    let (k, w) = (support.len(), working.len());
    let dim = k + w + p;
    let mut x = DVector::zeros(n);
    for (a, &i) in support.iter().enumerate() {
        x[i] = start[a];
    }
    let mut lambda = DVector::zeros(m);
    let mut mu = DVector::zeros(p);
    let err = |e: SpoError| e.to_string();

    for _ in 0..ORACLE_NEWTON_ITERS {
        let grad = lagrangian_gradient(problem, &x, &lambda, &mu).map_err(err)?;
        let g = problem.g(&x).map_err(err)?;
        let h = problem.h(&x).map_err(err)?;
        let mut rhs = DVector::zeros(dim);
        for (a, &i) in support.iter().enumerate() {
            rhs[a] = -grad[i];
        }
        for (b, &j) in working.iter().enumerate() {
            rhs[k + b] = -g[j];
        }
        for j in 0..p {
            rhs[k + w + j] = -h[j];
        }
        if rhs.amax() <= 1e-13 {
            return Ok(Candidate { x, lambda, mu });
        }
        let hess = lagrangian_hessian(problem, &x, &lambda, &mu).map_err(err)?;
        let jg = problem.g_jacobian(&x).map_err(err)?;
        let jh = problem.h_jacobian(&x).map_err(err)?;
        let mut mat = DMatrix::zeros(dim, dim);
        for (a, &i) in support.iter().enumerate() {
            for (c, &l) in support.iter().enumerate() {
                mat[(a, c)] = hess[(i, l)];
            }
            for (b, &j) in working.iter().enumerate() {
                mat[(a, k + b)] = jg[(j, i)];
                mat[(k + b, a)] = jg[(j, i)];
            }
            for j in 0..p {
                mat[(a, k + w + j)] = jh[(j, i)];
                mat[(k + w + j, a)] = jh[(j, i)];
            }
        }
        let d = linalg::lu_solve(&mat, &rhs).map_err(|e| e.to_string())?;
        for (a, &i) in support.iter().enumerate() {
            x[i] += d[a];
        }
        for (b, &j) in working.iter().enumerate() {
            lambda[j] += d[k + b];
        }
        for j in 0..p {
            mu[j] += d[k + w + j];
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err("restricted Newton diverged".into());
        }
    }
    Err("restricted Newton did not converge".into())
}

/// Accepts a restricted KKT point as an S-stationary point of the full problem.
fn admit(problem: &SpoProblem, mut c: Candidate) -> Option<Candidate> {
    let scale = c.x.amax().max(1.0);
    c.x.apply(|v| {
        if v.abs() <= 1e-13 * scale {
            *v = 0.0;
        }
    });
    if problem.nonneg() && c.x.iter().any(|&v| v < 0.0) {
        return None;
    }
    if problem.m() > 0 {
        let g = problem.g(&c.x).ok()?;
        if g.iter().any(|&v| v > ORACLE_RESIDUAL_TOL) || c.lambda.iter().any(|&l| l < -ORACLE_RESIDUAL_TOL) {
            return None;
        }
        c.lambda.apply(|l| *l = l.max(0.0));
    }
    let res = kkt::s_stationarity_residual(problem, &c.x, &c.lambda, &c.mu, 0.0, NcpKind::FischerBurmeister).ok()?;
    (res <= ORACLE_RESIDUAL_TOL).then_some(c)
}

fn subsets(items: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0u64..1 << items.len()).map(move |mask| {
        items
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &v)| v)
            .collect()
    })
}

fn solve_support(problem: &SpoProblem, support: &[usize]) -> (Vec<Candidate>, Option<String>) {
    let (m, p, k) = (problem.m(), problem.p(), support.len());
    let mut found = Vec::new();
    let mut breakdown = None;
    if k == 0 {
        let c = Candidate {
            x: DVector::zeros(problem.n()),
            lambda: DVector::zeros(m),
            mu: DVector::zeros(p),
        };
        return (admit(problem, c).into_iter().collect(), None);
    }
    let mut rng = SeededRng::new(support.iter().fold(0xa11ce_u64, |acc, &i| acc.wrapping_mul(31).wrapping_add(i as u64 + 1)));
    let mut starts = vec![DVector::zeros(k), DVector::from_element(k, 1.0)];
    for _ in 0..ORACLE_RANDOM_STARTS {
        starts.push(DVector::from_fn(k, |_, _| rng.normal()));
    }
    let all: Vec<usize> = (0..m).collect();
    for working in subsets(&all) {
        if working.len() + p > k {
            continue;
        }
        for start in &starts {
            match restricted_newton(problem, support, &working, start) {
                Ok(c) => {
                    if let Some(c) = admit(problem, c) {
                        found.push(c);
                    }
                }
                Err(e) => breakdown = Some(e),
            }
        }
    }
    let failure = if found.is_empty() { breakdown } else { None };
    (found, failure)
}

/// Enumerates every support `S ⊆ {0, …, n−1}`, solves the restricted problem
/// `min f  s.t.  g ≤ 0, h = 0, xᵢ = 0 (i ∉ S)` by Newton on each working set of
/// inequalities from several starts, and keeps the S-stationary points.
///
/// Classification (heuristic): `local_min` when strong SP-SOSC holds; otherwise
/// `s_stationary_only` when the sampled second-order necessary check fails or
/// another stationary point within `1e−3` has a lower objective; otherwise
/// `local_min`.
pub fn brute_force_oracle(problem: &SpoProblem, delta: f64) -> Result<OracleResult> {
    let (n, m) = (problem.n(), problem.m());
    if n > ORACLE_MAX_N {
        return Err(SpoError::InvalidArgument(format!(
            "oracle enumerates 2^n supports; n = {n} exceeds {ORACLE_MAX_N}"
        )));
    }
    if m > ORACLE_MAX_M {
        return Err(SpoError::InvalidArgument(format!(
            "oracle enumerates 2^m working sets; m = {m} exceeds {ORACLE_MAX_M}"
        )));
    }
    if delta < 0.0 {
        return Err(SpoError::InvalidArgument("delta must be nonnegative".into()));
    }
    let idx: Vec<usize> = (0..n).collect();
    let supports: Vec<Vec<usize>> = subsets(&idx).collect();
    let per_support: Vec<(Vec<Candidate>, Option<String>)> =
        supports.par_iter().map(|s| solve_support(problem, s)).collect();

    let mut points: Vec<Candidate> = Vec::new();
    let mut failures = Vec::new();
    for (support, (cands, failure)) in supports.iter().zip(per_support) {
        if let Some(reason) = failure {
            failures.push(SupportFailure {
                support: support.clone(),
                reason,
            });
        }
        for c in cands {
            let scale = c.x.amax().max(1.0);
            if !points.iter().any(|q| (&q.x - &c.x).amax() <= 1e-9 * scale) {
                points.push(c);
            }
        }
    }

    let objectives: Vec<f64> = points
        .iter()
        .map(|c| eval_spo_objective(problem, &c.x, 0.0))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(points.len());
    for (a, c) in points.iter().enumerate() {
        let sosc = check_strong_sp_sosc(problem, &c.x, &c.lambda, &c.mu, 0.0)?;
        let class = if sosc.holds {
            PointClass::LocalMin
        } else if !check_second_order_necessary(problem, &c.x, &c.lambda, &c.mu, 0.0, 200)? {
            PointClass::SStationaryOnly
        } else {
            let beaten = points.iter().zip(&objectives).enumerate().any(|(b, (q, &fq))| {
                b != a && (&q.x - &c.x).amax() <= ORACLE_NEIGHBOR_RADIUS && fq < objectives[a] - 1e-12
            });
            if beaten {
                PointClass::SStationaryOnly
            } else {
                PointClass::LocalMin
            }
        };
        let residual = kkt::s_stationarity_residual(problem, &c.x, &c.lambda, &c.mu, 0.0, NcpKind::FischerBurmeister)?;
        out.push(OraclePoint {
            x: c.x.clone(),
            lambda: c.lambda.clone(),
            mu: c.mu.clone(),
            objective: objectives[a],
            residual,
            classification: class,
        });
    }
    out.sort_by(|a, b| {
        a.objective
            .total_cmp(&b.objective)
            .then_with(|| a.x.iter().zip(b.x.iter()).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal))
    });
    let global_min = out.first().map(|p| GlobalMin {
        x: p.x.clone(),
        value: p.objective,
    });
    Ok(OracleResult {
        stationary_points: out,
        global_min,
        failures,
    })
}
