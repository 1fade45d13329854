//! KKT operators of the squared-penalty reformulation, their B-subdifferential
//! Jacobians, multiplier recovery and the S-stationarity residual.
//!
//! Variables and residual rows share one block layout. For [`OperatorKind::Full`]
//! and [`OperatorKind::Complementary`]:
//!
//! ```text
//! rows      x-stationarity | y-stationarity | Φ_g | h | complementarity
//! columns   x              | y              | λ   | μ | γ
//! sizes     n              | n              | m   | p | n
//! ```
//!
//! [`OperatorKind::Reduced`] drops the `y` block and substitutes `y = e − γ∘x/ρ`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpoError};
use crate::model::{
    lagrangian_gradient, lagrangian_hessian, ConstraintMap, Objective, PrimalDualPoint,
    SpoProblem,
};
use crate::ncp::{phi, phi_bsub, phi_bsub_constraint, BsubRow, NcpKind, DEFAULT_DEGENERATE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `T`
    #[default]
    Full,
    /// `T_red`
    Reduced,
    /// `T_C`; needs `x ≥ 0` as structural constraint.
    Complementary,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 3] = [
        OperatorKind::Full,
        OperatorKind::Reduced,
        OperatorKind::Complementary,
    ];

    /// Short name used on the command line and in CSV output.
    pub fn short_name(self) -> &'static str {
        match self {
            OperatorKind::Full => "full",
            OperatorKind::Reduced => "red",
            OperatorKind::Complementary => "comp",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for OperatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "t" => Ok(OperatorKind::Full),
            "red" | "reduced" | "t_red" => Ok(OperatorKind::Reduced),
            "comp" | "complementary" | "t_c" => Ok(OperatorKind::Complementary),
            other => Err(format!(
                "unknown operator '{other}' (expected full, red or comp)"
            )),
        }
    }
}

/// Block offsets of a stacked KKT vector. Row blocks and variable blocks coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KktLayout {
    pub kind: OperatorKind,
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl KktLayout {
    pub fn new(kind: OperatorKind, n: usize, m: usize, p: usize) -> Self {
        Self { kind, n, m, p }
    }

    pub fn for_problem(problem: &SpoProblem, kind: OperatorKind) -> Self {
        Self::new(kind, problem.n(), problem.m(), problem.p())
    }

    pub fn has_y(&self) -> bool {
        self.kind != OperatorKind::Reduced
    }

    fn y_len(&self) -> usize {
        if self.has_y() {
            self.n
        } else {
            0
        }
    }

    pub fn len(&self) -> usize {
        2 * self.n + self.y_len() + self.m + self.p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `x` variables / x-stationarity rows.
    pub fn x(&self) -> Range<usize> {
        0..self.n
    }

    /// `y` variables / y-stationarity rows; `None` for the reduced operator.
    pub fn y(&self) -> Option<Range<usize>> {
        self.has_y().then(|| self.n..2 * self.n)
    }

    /// `λ` variables / `Φ_g` rows.
    pub fn lambda(&self) -> Range<usize> {
        let s = self.n + self.y_len();
        s..s + self.m
    }

    /// `μ` variables / `h` rows.
    pub fn mu(&self) -> Range<usize> {
        let s = self.lambda().end;
        s..s + self.p
    }

    /// `γ` variables / complementarity rows.
    pub fn gamma(&self) -> Range<usize> {
        let s = self.mu().end;
        s..s + self.n
    }
}

#[derive(Debug, Clone)]
pub struct KktResidual {
    pub vector: DVector<f64>,
    pub layout: KktLayout,
}

impl KktResidual {
    pub fn norm(&self) -> f64 {
        self.vector.norm()
    }

    pub fn block(&self, range: Range<usize>) -> DVector<f64> {
        self.vector.rows(range.start, range.len()).into_owned()
    }
}

/// Stacks the variables of `point` in the layout of `kind`.
pub fn pack(point: &PrimalDualPoint, layout: &KktLayout) -> DVector<f64> {
    let mut v = DVector::zeros(layout.len());
    v.rows_mut(0, layout.n).copy_from(&point.x);
    if let Some(r) = layout.y() {
        v.rows_mut(r.start, r.len()).copy_from(&point.y);
    }
    let r = layout.lambda();
    v.rows_mut(r.start, r.len()).copy_from(&point.lambda);
    let r = layout.mu();
    v.rows_mut(r.start, r.len()).copy_from(&point.mu);
    let r = layout.gamma();
    v.rows_mut(r.start, r.len()).copy_from(&point.gamma);
    v
}

/// Inverse of [`pack`]. For the reduced layout `y` is set to `e − γ∘x/ρ`.
pub fn unpack(v: &DVector<f64>, layout: &KktLayout, rho: f64) -> PrimalDualPoint {
    let get = |r: Range<usize>| v.rows(r.start, r.len()).into_owned();
    let x = get(layout.x());
    let gamma = get(layout.gamma());
    let y = match layout.y() {
        Some(r) => get(r),
        None => reduced_y(&x, &gamma, rho),
    };
    PrimalDualPoint {
        x,
        y,
        lambda: get(layout.lambda()),
        mu: get(layout.mu()),
        gamma,
        sigma: None,
    }
}

/// `y = e − γ∘x/ρ`.
pub fn reduced_y(x: &DVector<f64>, gamma: &DVector<f64>, rho: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| 1.0 - gamma[i] * x[i] / rho)
}

fn check_kind(problem: &SpoProblem, kind: OperatorKind) -> Result<()> {
    if kind == OperatorKind::Complementary && !problem.nonneg() {
        Err(SpoError::RequiresNonneg)
    } else {
        Ok(())
    }
}

fn check_point(problem: &SpoProblem, point: &PrimalDualPoint, kind: OperatorKind) -> Result<()> {
    check_kind(problem, kind)?;
    let n = problem.n();
    SpoError::check_dim("point x", n, point.x.len())?;
    if kind != OperatorKind::Reduced {
        SpoError::check_dim("point y", n, point.y.len())?;
    }
    SpoError::check_dim("point lambda", problem.m(), point.lambda.len())?;
    SpoError::check_dim("point mu", problem.p(), point.mu.len())?;
    SpoError::check_dim("point gamma", n, point.gamma.len())
}

/// `Φ_g(x, λ)` with components `φ(−g_j(x), λ_j)`.
pub fn phi_g(g: &DVector<f64>, lambda: &DVector<f64>, ncp: NcpKind) -> DVector<f64> {
    DVector::from_fn(g.len(), |j, _| phi(ncp, -g[j], lambda[j]))
}

pub fn residual(
    problem: &SpoProblem,
    point: &PrimalDualPoint,
    kind: OperatorKind,
    ncp: NcpKind,
) -> Result<KktResidual> {
    check_point(problem, point, kind)?;
    let layout = KktLayout::for_problem(problem, kind);
    let rho = problem.rho();
    let x = &point.x;
    let gamma = &point.gamma;
    let y = match kind {
        OperatorKind::Reduced => reduced_y(x, gamma, rho),
        _ => point.y.clone(),
    };

    let mut v = DVector::zeros(layout.len());
    let grad = lagrangian_gradient(problem, x, &point.lambda, &point.mu)?;
    v.rows_mut(0, layout.n)
        .copy_from(&(grad + gamma.component_mul(&y)));
    if let Some(r) = layout.y() {
        let block = DVector::from_fn(layout.n, |i, _| rho * (y[i] - 1.0) + gamma[i] * x[i]);
        v.rows_mut(r.start, r.len()).copy_from(&block);
    }
    if layout.m > 0 {
        let r = layout.lambda();
        v.rows_mut(r.start, r.len())
            .copy_from(&phi_g(&problem.g(x)?, &point.lambda, ncp));
    }
    if layout.p > 0 {
        let r = layout.mu();
        v.rows_mut(r.start, r.len()).copy_from(&problem.h(x)?);
    }
    let r = layout.gamma();
    let comp = match kind {
        OperatorKind::Complementary => DVector::from_fn(layout.n, |i, _| phi(ncp, x[i], y[i])),
        _ => x.component_mul(&y),
    };
    v.rows_mut(r.start, r.len()).copy_from(&comp);
    Ok(KktResidual { vector: v, layout })
}

/// Replacement B-subdifferential selections, used to enumerate elements at
/// degenerate rows.
///
/// A `g` entry `(d_a, d_b)` produces the row `(−d_a ∇g_j, d_b)` for `φ(−g_j, λ_j)`;
/// an `xy` entry is used for `φ(x_i, y_i)` of the complementary operator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionOverride {
    pub xy: BTreeMap<usize, BsubRow>,
    pub g: BTreeMap<usize, BsubRow>,
}

pub fn jacobian(
    problem: &SpoProblem,
    point: &PrimalDualPoint,
    kind: OperatorKind,
    ncp: NcpKind,
) -> Result<DMatrix<f64>> {
    jacobian_with(problem, point, kind, ncp, None)
}

pub fn jacobian_with(
    problem: &SpoProblem,
    point: &PrimalDualPoint,
    kind: OperatorKind,
    ncp: NcpKind,
    overrides: Option<&SelectionOverride>,
) -> Result<DMatrix<f64>> {
    check_point(problem, point, kind)?;
    let layout = KktLayout::for_problem(problem, kind);
    let (n, rho) = (layout.n, problem.rho());
    let x = &point.x;
    let gamma = &point.gamma;
    let mut jac = DMatrix::zeros(layout.len(), layout.len());

    let mut hess = lagrangian_hessian(problem, x, &point.lambda, &point.mu)?;
    let (rl, rm, rg) = (layout.lambda(), layout.mu(), layout.gamma());

    let g_jac = if layout.m > 0 {
        Some(problem.g_jacobian(x)?)
    } else {
        None
    };
    let h_jac = if layout.p > 0 {
        Some(problem.h_jacobian(x)?)
    } else {
        None
    };

    // x-stationarity rows (shared structure; the γ column differs below).
    if let Some(gj) = &g_jac {
        jac.view_mut((0, rl.start), (n, rl.len()))
            .copy_from(&gj.transpose());
    }
    if let Some(hj) = &h_jac {
        jac.view_mut((0, rm.start), (n, rm.len()))
            .copy_from(&hj.transpose());
        jac.view_mut((rm.start, 0), (rm.len(), n)).copy_from(hj);
    }

    match kind {
        OperatorKind::Full | OperatorKind::Complementary => {
            let y = &point.y;
            let ry = layout.y().expect("layout has y");
            jac.view_mut((0, 0), (n, n)).copy_from(&hess);
            for i in 0..n {
                jac[(i, ry.start + i)] = gamma[i];
                jac[(i, rg.start + i)] = y[i];
                jac[(ry.start + i, i)] = gamma[i];
                jac[(ry.start + i, ry.start + i)] = rho;
                jac[(ry.start + i, rg.start + i)] = x[i];
            }
            for i in 0..n {
                let (cx, cy) = if kind == OperatorKind::Full {
                    (y[i], x[i])
                } else {
                    let sel = overrides
                        .and_then(|o| o.xy.get(&i).copied())
                        .unwrap_or_else(|| phi_bsub(ncp, x[i], y[i], DEFAULT_DEGENERATE_TOL));
                    (sel.d_a, sel.d_b)
                };
                jac[(rg.start + i, i)] = cx;
                jac[(rg.start + i, ry.start + i)] = cy;
            }
        }
        OperatorKind::Reduced => {
            for i in 0..n {
                hess[(i, i)] -= gamma[i] * gamma[i] / rho;
            }
            jac.view_mut((0, 0), (n, n)).copy_from(&hess);
            for i in 0..n {
                let t = 1.0 - 2.0 * gamma[i] * x[i] / rho;
                jac[(i, rg.start + i)] = t;
                jac[(rg.start + i, i)] = t;
                jac[(rg.start + i, rg.start + i)] = -x[i] * x[i] / rho;
            }
        }
    }

    if let Some(gj) = &g_jac {
        let g = problem.g(x)?;
        for j in 0..layout.m {
            let grad_j = gj.row(j).transpose();
            let (row_x, d_lambda) = match overrides.and_then(|o| o.g.get(&j)) {
                Some(sel) => (&grad_j * (-sel.d_a), sel.d_b),
                None => phi_bsub_constraint(
                    ncp,
                    g[j],
                    &grad_j,
                    point.lambda[j],
                    DEFAULT_DEGENERATE_TOL,
                ),
            };
            jac.view_mut((rl.start + j, 0), (1, n))
                .copy_from(&row_x.transpose());
            jac[(rl.start + j, rl.start + j)] = d_lambda;
        }
    }
    Ok(jac)
}

/// `(y*, γ*, σ*)` completing an S-stationary `(x, λ, μ)` to a KKT point of
/// both reformulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSet {
    #[serde(with = "crate::serde_dense::vector")]
    pub y_star: DVector<f64>,
    #[serde(with = "crate::serde_dense::vector")]
    pub gamma_star: DVector<f64>,
    #[serde(with = "crate::serde_dense::vector")]
    pub sigma_star: DVector<f64>,
}

fn is_support(v: f64, delta: f64) -> bool {
    if delta == 0.0 {
        v != 0.0
    } else {
        v.abs() >= delta
    }
}

pub fn recover_multipliers(
    problem: &SpoProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
    delta: f64,
) -> Result<MultiplierSet> {
    let grad = lagrangian_gradient(problem, x, lambda, mu)?;
    let rho = problem.rho();
    let n = x.len();
    let mut set = MultiplierSet {
        y_star: DVector::zeros(n),
        gamma_star: DVector::zeros(n),
        sigma_star: DVector::zeros(n),
    };
    for i in 0..n {
        if is_support(x[i], delta) {
            set.gamma_star[i] = rho / x[i];
        } else {
            set.y_star[i] = 1.0;
            set.gamma_star[i] = -grad[i];
            set.sigma_star[i] = rho;
        }
    }
    Ok(set)
}

/// The full primal-dual point `(x, y*, λ, μ, γ*, σ*)`.
pub fn complete_point(
    problem: &SpoProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
    delta: f64,
) -> Result<PrimalDualPoint> {
    let set = recover_multipliers(problem, x, lambda, mu, delta)?;
    Ok(PrimalDualPoint {
        x: x.clone(),
        y: set.y_star,
        lambda: lambda.clone(),
        mu: mu.clone(),
        gamma: set.gamma_star,
        sigma: Some(set.sigma_star),
    })
}

/// Termination residual `‖(L_{I≠0}; Φ_g; h)‖₂`, with `max(0, −x_{I≠0})`
/// appended when the problem carries `x ≥ 0`.
pub fn s_stationarity_residual(
    problem: &SpoProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
    delta: f64,
    ncp: NcpKind,
) -> Result<f64> {
    let grad = lagrangian_gradient(problem, x, lambda, mu)?;
    let mut sq = 0.0;
    for i in 0..x.len() {
        if is_support(x[i], delta) {
            sq += grad[i] * grad[i];
            if problem.nonneg() && x[i] < 0.0 {
                sq += x[i] * x[i];
            }
        }
    }
    if problem.m() > 0 {
        sq += phi_g(&problem.g(x)?, lambda, ncp).norm_squared();
    }
    if problem.p() > 0 {
        sq += problem.h(x)?.norm_squared();
    }
    Ok(sq.sqrt())
}

/// KKT residual of the linear-penalty reformulation, stacked as
/// `[∇L + γ∘y; −ρe + γ∘x + σ; Φ_g; h; x∘y; φ(σ, e − y)]`.
pub fn residual_spolin(
    problem: &SpoProblem,
    point: &PrimalDualPoint,
    ncp: NcpKind,
) -> Result<DVector<f64>> {
    let sigma = point.sigma.as_ref().ok_or(SpoError::MissingSigma)?;
    point.check_dims(problem)?;
    let (n, m, p) = (problem.n(), problem.m(), problem.p());
    let rho = problem.rho();
    let (x, y, gamma) = (&point.x, &point.y, &point.gamma);
    let grad = lagrangian_gradient(problem, x, &point.lambda, &point.mu)?;

    let mut v = DVector::zeros(4 * n + m + p);
    v.rows_mut(0, n).copy_from(&(grad + gamma.component_mul(y)));
    for i in 0..n {
        v[n + i] = -rho + gamma[i] * x[i] + sigma[i];
    }
    if m > 0 {
        v.rows_mut(2 * n, m)
            .copy_from(&phi_g(&problem.g(x)?, &point.lambda, ncp));
    }
    if p > 0 {
        v.rows_mut(2 * n + m, p).copy_from(&problem.h(x)?);
    }
    let off = 2 * n + m + p;
    for i in 0..n {
        v[off + i] = x[i] * y[i];
        v[off + n + i] = phi(ncp, sigma[i], 1.0 - y[i]);
    }
    Ok(v)
}

/// `f̃(x⁺, x⁻) = f(x⁺ − x⁻)`.
struct SplitObjective {
    inner: Arc<dyn Objective>,
}

/// `c̃(x⁺, x⁻) = c(x⁺ − x⁻)`.
struct SplitConstraints {
    inner: Arc<dyn ConstraintMap>,
}

/// `x⁺ − x⁻` for a stacked `(x⁺, x⁻)`.
pub fn recombine(z: &DVector<f64>) -> DVector<f64> {
    let n = z.len() / 2;
    z.rows(0, n) - z.rows(n, n)
}

/// `(max(x, 0), max(−x, 0))` stacked.
pub fn split_point(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(2 * n, |k, _| {
        if k < n {
            x[k].max(0.0)
        } else {
            (-x[k - n]).max(0.0)
        }
    })
}

fn lift_matrix(h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(h);
    out.view_mut((n, n), (n, n)).copy_from(h);
    out.view_mut((0, n), (n, n)).copy_from(&(-h));
    out.view_mut((n, 0), (n, n)).copy_from(&(-h));
    out
}

fn lift_rows(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, n) = a.shape();
    let mut out = DMatrix::zeros(r, 2 * n);
    out.view_mut((0, 0), (r, n)).copy_from(a);
    out.view_mut((0, n), (r, n)).copy_from(&(-a));
    out
}

fn lift_vector(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |k, _| if k < n { v[k] } else { -v[k - n] })
}

impl Objective for SplitObjective {
    fn dim(&self) -> usize {
        2 * self.inner.dim()
    }
    fn value(&self, z: &DVector<f64>) -> f64 {
        self.inner.value(&recombine(z))
    }
    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        lift_vector(&self.inner.gradient(&recombine(z)))
    }
    fn hessian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        lift_matrix(&self.inner.hessian(&recombine(z)))
    }
    fn quadratic_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        self.inner
            .quadratic_form()
            .map(|(q, c)| (lift_matrix(&q), lift_vector(&c)))
    }
}

impl ConstraintMap for SplitConstraints {
    fn dim(&self) -> usize {
        2 * self.inner.dim()
    }
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn values(&self, z: &DVector<f64>) -> DVector<f64> {
        self.inner.values(&recombine(z))
    }
    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        lift_rows(&self.inner.jacobian(&recombine(z)))
    }
    fn hessian(&self, z: &DVector<f64>, j: usize) -> DMatrix<f64> {
        lift_matrix(&self.inner.hessian(&recombine(z), j))
    }
    fn add_weighted_hessian(&self, z: &DVector<f64>, w: &DVector<f64>, out: &mut DMatrix<f64>) {
        let n = self.inner.dim();
        let mut acc = DMatrix::zeros(n, n);
        self.inner.add_weighted_hessian(&recombine(z), w, &mut acc);
        *out += lift_matrix(&acc);
    }
    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        self.inner.affine_form().map(|(a, b)| (lift_rows(&a), b))
    }
}

/// Lifts `problem` to variables `(x⁺, x⁻) ≥ 0` with `x = x⁺ − x⁻`.
pub fn split_variables(problem: &SpoProblem) -> Result<SpoProblem> {
    if problem.nonneg() {
        return Err(SpoError::InvalidArgument(
            "problem already carries x >= 0; splitting is only for free variables".into(),
        ));
    }
    let lifted = SpoProblem::from_objective(
        Arc::new(SplitObjective {
            inner: problem.objective().clone(),
        }),
        problem.rho(),
    )?
    .with_inequality_map(Arc::new(SplitConstraints {
        inner: problem.inequalities().clone(),
    }))?
    .with_equality_map(Arc::new(SplitConstraints {
        inner: problem.equalities().clone(),
    }))?
    .with_nonneg(true)
    .with_family(problem.family())
    .mark_split(problem.n());
    Ok(lifted)
}

/// Maps a point of the lifted problem back: `x = x⁺ − x⁻`, multipliers of
/// `g` and `h` unchanged, `(y, γ, σ)` recovered on the original problem.
pub fn unsplit_point(
    original: &SpoProblem,
    lifted: &PrimalDualPoint,
    delta: f64,
) -> Result<PrimalDualPoint> {
    SpoError::check_dim("lifted point", 2 * original.n(), lifted.x.len())?;
    let x = recombine(&lifted.x);
    complete_point(original, &x, &lifted.lambda, &lifted.mu, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffineMap, QuadraticObjective};
    use approx::assert_relative_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn shifted() -> SpoProblem {
        SpoProblem::new(QuadraticObjective::distance_to(&dv(&[2.0, 3.0])), 1.0).unwrap()
    }

    fn point(x: &[f64], y: &[f64], gamma: &[f64]) -> PrimalDualPoint {
        PrimalDualPoint {
            x: dv(x),
            y: dv(y),
            lambda: dv(&[]),
            mu: dv(&[]),
            gamma: dv(gamma),
            sigma: None,
        }
    }

    #[test]
    fn layout_sizes() {
        let l = KktLayout::new(OperatorKind::Full, 3, 2, 1);
        assert_eq!(l.len(), 12);
        assert_eq!(l.gamma(), 9..12);
        let r = KktLayout::new(OperatorKind::Reduced, 3, 2, 1);
        assert_eq!(r.len(), 9);
        assert_eq!(r.lambda(), 3..5);
        assert!(r.y().is_none());
    }

    #[test]
    fn residual_examples() {
        let p = shifted();
        let ncp = NcpKind::FischerBurmeister;
        let pt = point(&[2.0, 3.0], &[0.0, 0.0], &[0.5, 1.0 / 3.0]);
        assert!(residual(&p, &pt, OperatorKind::Full, ncp).unwrap().norm() < 1e-15);
        let pt = point(&[0.0, 0.0], &[1.0, 1.0], &[2.0, 3.0]);
        assert_eq!(residual(&p, &pt, OperatorKind::Full, ncp).unwrap().norm(), 0.0);
        let pt = point(&[2.0, 3.0], &[9.0, 9.0], &[0.5, 1.0 / 3.0]);
        assert!(residual(&p, &pt, OperatorKind::Reduced, ncp).unwrap().norm() < 1e-15);
    }

    #[test]
    fn complementary_requires_nonneg() {
        let p = shifted();
        let pt = point(&[1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0]);
        assert!(matches!(
            residual(&p, &pt, OperatorKind::Complementary, NcpKind::FischerBurmeister),
            Err(SpoError::RequiresNonneg)
        ));
    }

    #[test]
    fn jacobian_blocks() {
        let p = shifted();
        let pt = point(&[0.3, -1.0], &[0.2, 0.7], &[1.5, -2.0]);
        let full = jacobian(&p, &pt, OperatorKind::Full, NcpKind::FischerBurmeister).unwrap();
        let y = 2..4;
        assert_eq!(full.view((y.start, y.start), (2, 2)).into_owned(), DMatrix::identity(2, 2));

        let red = jacobian(&p, &pt, OperatorKind::Reduced, NcpKind::FischerBurmeister).unwrap();
        assert_relative_eq!(red[(0, 0)], 1.0 - 1.5 * 1.5);
        assert_relative_eq!(red[(1, 1)], 1.0 - 4.0);
        assert_eq!(red[(0, 1)], 0.0);
    }

    #[test]
    fn recover_multiplier_examples() {
        // f = ½x₂² − 3x₂ gives ∇f(0.5, 0) = (0, −3).
        let f = QuadraticObjective::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]), dv(&[0.0, -3.0]), 0.0)
            .unwrap();
        let p = SpoProblem::new(f, 1.0).unwrap();
        let set = recover_multipliers(&p, &dv(&[0.5, 0.0]), &dv(&[]), &dv(&[]), 1e-4).unwrap();
        assert_eq!(set.y_star, dv(&[0.0, 1.0]));
        assert_eq!(set.gamma_star, dv(&[2.0, 3.0]));
        assert_eq!(set.sigma_star, dv(&[0.0, 1.0]));

        let p2 = shifted().with_rho(2.0).unwrap();
        let set = recover_multipliers(&p2, &dv(&[1.0, 1.0]), &dv(&[]), &dv(&[]), 1e-4).unwrap();
        assert_eq!(set.y_star, dv(&[0.0, 0.0]));
        assert_eq!(set.gamma_star, dv(&[2.0, 2.0]));
        assert_eq!(set.sigma_star, dv(&[0.0, 0.0]));

        let set = recover_multipliers(&shifted(), &dv(&[0.0, 0.0]), &dv(&[]), &dv(&[]), 1e-4).unwrap();
        assert_eq!(set.y_star, dv(&[1.0, 1.0]));
        assert_eq!(set.gamma_star, dv(&[2.0, 3.0]));
        assert_eq!(set.sigma_star, dv(&[1.0, 1.0]));
    }

    #[test]
    fn s_stationarity_examples() {
        let p = shifted();
        let e = dv(&[]);
        let r = |x: &[f64]| {
            s_stationarity_residual(&p, &dv(x), &e, &e, 1e-4, NcpKind::FischerBurmeister).unwrap()
        };
        assert_eq!(r(&[2.0, 3.0]), 0.0);
        assert_eq!(r(&[0.0, 0.0]), 0.0);
        assert_eq!(r(&[2.0, 0.0]), 0.0);
        assert_eq!(r(&[1.0, 0.0]), 1.0);
    }

    #[test]
    fn nonneg_violation_enters_residual() {
        let p = SpoProblem::new(QuadraticObjective::distance_to(&dv(&[-1.0])), 1.0)
            .unwrap()
            .with_nonneg(true);
        let r = s_stationarity_residual(&p, &dv(&[-1.0]), &dv(&[]), &dv(&[]), 1e-4, NcpKind::FischerBurmeister)
            .unwrap();
        assert_relative_eq!(r, 1.0);
    }

    #[test]
    fn spolin_residual_examples() {
        let p = shifted();
        let mut pt = point(&[2.0, 3.0], &[0.0, 0.0], &[0.5, 1.0 / 3.0]);
        assert!(matches!(
            residual_spolin(&p, &pt, NcpKind::Minimum),
            Err(SpoError::MissingSigma)
        ));
        pt.sigma = Some(dv(&[0.0, 0.0]));
        assert!(residual_spolin(&p, &pt, NcpKind::Minimum).unwrap().norm() < 1e-15);
        pt.sigma = Some(dv(&[0.1, 0.0]));
        let r = residual_spolin(&p, &pt, NcpKind::Minimum).unwrap();
        assert_relative_eq!(r.norm(), 0.1 * 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn split_examples() {
        let a = dv(&[1.5, -2.0, 0.0]);
        let p = SpoProblem::new(QuadraticObjective::distance_to(&a), 1.0).unwrap();
        let s = split_variables(&p).unwrap();
        assert_eq!(s.n(), 6);
        assert!(s.nonneg());
        let z = split_point(&a);
        assert_eq!(z, dv(&[1.5, 0.0, 0.0, 0.0, 2.0, 0.0]));
        assert_eq!(s.f(&z).unwrap(), 0.0);

        let x = dv(&[0.2, 0.1, -0.4]);
        let zx = split_point(&x);
        let g = p.objective().gradient(&x);
        let gs = s.objective().gradient(&zx);
        assert_eq!(gs.rows(0, 3).into_owned(), g);
        assert_eq!(gs.rows(3, 3).into_owned(), -g);
        assert!(split_variables(&s).is_err());
    }

    #[test]
    fn split_system_size() {
        let h = AffineMap::new(DMatrix::from_element(2, 4, 1.0), dv(&[0.0, 0.0])).unwrap();
        let p = SpoProblem::new(QuadraticObjective::distance_to(&dv(&[1.0; 4])), 1.0)
            .unwrap()
            .with_equalities(h)
            .unwrap();
        let s = split_variables(&p).unwrap();
        // 3 blocks of size 2n plus p equality rows
        assert_eq!(KktLayout::for_problem(&s, OperatorKind::Complementary).len(), 6 * 4 + 2);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let pt = PrimalDualPoint {
            x: dv(&[1.0, 2.0]),
            y: dv(&[3.0, 4.0]),
            lambda: dv(&[5.0]),
            mu: dv(&[6.0]),
            gamma: dv(&[7.0, 8.0]),
            sigma: None,
        };
        let l = KktLayout::new(OperatorKind::Full, 2, 1, 1);
        assert_eq!(unpack(&pack(&pt, &l), &l, 1.0), pt);
        let r = KktLayout::new(OperatorKind::Reduced, 2, 1, 1);
        let back = unpack(&pack(&pt, &r), &r, 2.0);
        assert_eq!(back.y, dv(&[1.0 - 7.0 / 2.0, 1.0 - 16.0 / 2.0]));
    }
}
