//! Problem representation, oracles and the quantities every solver shares.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpoError};
use crate::linalg::symmetrize;
use crate::serde_dense;

/// Default threshold under which a component counts as zero.
pub const DEFAULT_DELTA: f64 = 1e-4;
/// Default tolerance for calling an inequality active.
pub const DEFAULT_ACTIVE_TOL: f64 = 1e-8;

/// Smooth objective `f: Rⁿ → R` with first and second derivatives.
///
/// Implementations must be safe to evaluate from several threads at once.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// `(Q, c)` if `f(x) = ½xᵀQx + cᵀx + const`.
    fn quadratic_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        None
    }
}

/// Vector-valued constraint map `c: Rⁿ → Rᵏ` (used for both `g` and `h`).
pub trait ConstraintMap: Send + Sync {
    /// Number of variables.
    fn dim(&self) -> usize;
    /// Number of constraints.
    fn len(&self) -> usize;
    fn values(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `len × dim` Jacobian, one gradient per row.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Hessian of constraint `j`.
    fn hessian(&self, x: &DVector<f64>, j: usize) -> DMatrix<f64>;

    /// Accumulates `Σⱼ wⱼ ∇²cⱼ(x)` into `out`.
    fn add_weighted_hessian(&self, x: &DVector<f64>, w: &DVector<f64>, out: &mut DMatrix<f64>) {
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                *out += self.hessian(x, j) * wj;
            }
        }
    }

    /// `(A, b)` if `c(x) = A x − b`.
    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        None
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `f(x) = ½xᵀQx + cᵀx + offset`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    q: DMatrix<f64>,
    c: DVector<f64>,
    offset: f64,
}

impl QuadraticObjective {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>, offset: f64) -> Result<Self> {
        SpoError::check_dim("quadratic Q columns", q.nrows(), q.ncols())?;
        SpoError::check_dim("quadratic c", q.nrows(), c.len())?;
        Ok(Self {
            q: symmetrize(&q),
            c,
            offset,
        })
    }

    /// `½‖x − a‖²`.
    pub fn distance_to(a: &DVector<f64>) -> Self {
        let n = a.len();
        Self {
            q: DMatrix::identity(n, n),
            c: -a,
            offset: 0.5 * a.norm_squared(),
        }
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x) + self.offset
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.c
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.q.clone()
    }

    fn quadratic_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((self.q.clone(), self.c.clone()))
    }
}

/// `f(x) = ½‖A x − b‖²`, with `AᵀA` cached.
#[derive(Debug, Clone)]
pub struct LeastSquaresObjective {
    a: DMatrix<f64>,
    b: DVector<f64>,
    ata: DMatrix<f64>,
}

impl LeastSquaresObjective {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        SpoError::check_dim("least-squares rhs", a.nrows(), b.len())?;
        let ata = a.tr_mul(&a);
        Ok(Self { a, b, ata })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }
}

impl Objective for LeastSquaresObjective {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.a * x - &self.b).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(&(&self.a * x - &self.b))
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.ata.clone()
    }

    fn quadratic_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((self.ata.clone(), -self.a.tr_mul(&self.b)))
    }
}

type ScalarFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type IndexedMatrixFn = dyn Fn(&DVector<f64>, usize) -> DMatrix<f64> + Send + Sync;

/// Objective assembled from closures.
pub struct FnObjective {
    n: usize,
    value: Box<ScalarFn>,
    gradient: Box<VectorFn>,
    hessian: Box<MatrixFn>,
}

impl FnObjective {
    pub fn new(
        n: usize,
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        hessian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: Box::new(hessian),
        }
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.hessian)(x)
    }
}

/// `c(x) = A x − b`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl AffineMap {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        SpoError::check_dim("affine map rhs", a.nrows(), b.len())?;
        Ok(Self { a, b })
    }

    /// No constraints on `Rⁿ`.
    pub fn empty(n: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }
}

impl ConstraintMap for AffineMap {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn len(&self) -> usize {
        self.a.nrows()
    }
    fn values(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
    fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
    fn hessian(&self, _x: &DVector<f64>, _j: usize) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::zeros(n, n)
    }
    fn add_weighted_hessian(&self, _x: &DVector<f64>, _w: &DVector<f64>, _out: &mut DMatrix<f64>) {}
    fn affine_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        Some((self.a.clone(), self.b.clone()))
    }
}

/// Constraint map assembled from closures.
pub struct FnConstraints {
    n: usize,
    len: usize,
    values: Box<VectorFn>,
    jacobian: Box<MatrixFn>,
    hessian: Box<IndexedMatrixFn>,
}

impl FnConstraints {
    pub fn new(
        n: usize,
        len: usize,
        values: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        hessian: impl Fn(&DVector<f64>, usize) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            len,
            values: Box::new(values),
            jacobian: Box::new(jacobian),
            hessian: Box::new(hessian),
        }
    }
}

impl ConstraintMap for FnConstraints {
    fn dim(&self) -> usize {
        self.n
    }
    fn len(&self) -> usize {
        self.len
    }
    fn values(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.values)(x)
    }
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.jacobian)(x)
    }
    fn hessian(&self, x: &DVector<f64>, j: usize) -> DMatrix<f64> {
        (self.hessian)(x, j)
    }
}

/// Which application family a problem came from; drives presolve dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    General,
    Quadratic,
    Portfolio,
    Sensing,
    Logistic,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::General => "general",
            Family::Quadratic => "quadratic",
            Family::Portfolio => "portfolio",
            Family::Sensing => "sensing",
            Family::Logistic => "logistic",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "general" => Ok(Family::General),
            "quadratic" => Ok(Family::Quadratic),
            "portfolio" => Ok(Family::Portfolio),
            "sensing" => Ok(Family::Sensing),
            "logistic" => Ok(Family::Logistic),
            other => Err(format!("unknown family '{other}'")),
        }
    }
}

/// `min f(x) + ρ‖x‖₀  s.t.  g(x) ≤ 0, h(x) = 0` and, when `nonneg` is set, `x ≥ 0`.
///
/// The structural constraint `x ≥ 0` is not part of `g`; only the complementary
/// operator and the termination test see it.
#[derive(Clone)]
pub struct SpoProblem {
    rho: f64,
    nonneg: bool,
    family: Family,
    objective: Arc<dyn Objective>,
    ineq: Arc<dyn ConstraintMap>,
    eq: Arc<dyn ConstraintMap>,
    split_of: Option<usize>,
}

impl fmt::Debug for SpoProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpoProblem")
            .field("n", &self.n())
            .field("m", &self.m())
            .field("p", &self.p())
            .field("rho", &self.rho)
            .field("nonneg", &self.nonneg)
            .field("family", &self.family)
            .field("split_of", &self.split_of)
            .finish()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(SpoError::InvalidArgument(format!(
            "penalty rho must be positive and finite, got {rho}"
        )))
    }
}

impl SpoProblem {
    pub fn new(objective: impl Objective + 'static, rho: f64) -> Result<Self> {
        Self::from_objective(Arc::new(objective), rho)
    }

    pub fn from_objective(objective: Arc<dyn Objective>, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let n = objective.dim();
        Ok(Self {
            rho,
            nonneg: false,
            family: Family::General,
            objective,
            ineq: Arc::new(AffineMap::empty(n)),
            eq: Arc::new(AffineMap::empty(n)),
            split_of: None,
        })
    }

    pub fn with_inequalities(self, g: impl ConstraintMap + 'static) -> Result<Self> {
        self.with_inequality_map(Arc::new(g))
    }

    pub fn with_inequality_map(mut self, g: Arc<dyn ConstraintMap>) -> Result<Self> {
        SpoError::check_dim("inequality constraint variables", self.n(), g.dim())?;
        self.ineq = g;
        Ok(self)
    }

    pub fn with_equalities(self, h: impl ConstraintMap + 'static) -> Result<Self> {
        self.with_equality_map(Arc::new(h))
    }

    pub fn with_equality_map(mut self, h: Arc<dyn ConstraintMap>) -> Result<Self> {
        SpoError::check_dim("equality constraint variables", self.n(), h.dim())?;
        self.eq = h;
        Ok(self)
    }

    pub fn with_nonneg(mut self, nonneg: bool) -> Self {
        self.nonneg = nonneg;
        self
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        self.rho = rho;
        Ok(self)
    }

    pub(crate) fn mark_split(mut self, original_n: usize) -> Self {
        self.split_of = Some(original_n);
        self
    }

    pub fn n(&self) -> usize {
        self.objective.dim()
    }
    pub fn m(&self) -> usize {
        self.ineq.len()
    }
    pub fn p(&self) -> usize {
        self.eq.len()
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn nonneg(&self) -> bool {
        self.nonneg
    }
    pub fn family(&self) -> Family {
        self.family
    }
    /// Original dimension if this problem is the `x = x⁺ − x⁻` lift of another.
    pub fn split_of(&self) -> Option<usize> {
        self.split_of
    }
    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }
    pub fn inequalities(&self) -> &Arc<dyn ConstraintMap> {
        &self.ineq
    }
    pub fn equalities(&self) -> &Arc<dyn ConstraintMap> {
        &self.eq
    }

    pub(crate) fn check_x(&self, x: &DVector<f64>) -> Result<()> {
        SpoError::check_dim("x", self.n(), x.len())
    }

    pub fn f(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_x(x)?;
        finite_scalar(self.objective.value(x), "objective value")
    }

    pub fn g(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_x(x)?;
        let v = self.ineq.values(x);
        SpoError::check_dim("g(x)", self.m(), v.len())?;
        finite_vec(v, "inequality values")
    }

    pub fn h(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_x(x)?;
        let v = self.eq.values(x);
        SpoError::check_dim("h(x)", self.p(), v.len())?;
        finite_vec(v, "equality values")
    }

    pub fn g_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let j = self.ineq.jacobian(x);
        SpoError::check_dim("g'(x) rows", self.m(), j.nrows())?;
        SpoError::check_dim("g'(x) columns", self.n(), j.ncols())?;
        finite_mat(j, "inequality Jacobian")
    }

    pub fn h_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let j = self.eq.jacobian(x);
        SpoError::check_dim("h'(x) rows", self.p(), j.nrows())?;
        SpoError::check_dim("h'(x) columns", self.n(), j.ncols())?;
        finite_mat(j, "equality Jacobian")
    }
}

fn finite_scalar(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SpoError::NonFinite(what))
    }
}

fn finite_vec(v: DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(SpoError::NonFinite(what))
    }
}

fn finite_mat(m: DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(m)
    } else {
        Err(SpoError::NonFinite(what))
    }
}

/// `z = (x, y, λ, μ, γ)` and, for SPOlin checks, `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualPoint {
    #[serde(with = "serde_dense::vector")]
    pub x: DVector<f64>,
    #[serde(with = "serde_dense::vector")]
    pub y: DVector<f64>,
    #[serde(with = "serde_dense::vector")]
    pub lambda: DVector<f64>,
    #[serde(with = "serde_dense::vector")]
    pub mu: DVector<f64>,
    #[serde(with = "serde_dense::vector")]
    pub gamma: DVector<f64>,
    #[serde(
        with = "serde_dense::opt_vector",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub sigma: Option<DVector<f64>>,
}

impl PrimalDualPoint {
    pub fn zeros(n: usize, m: usize, p: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            y: DVector::zeros(n),
            lambda: DVector::zeros(m),
            mu: DVector::zeros(p),
            gamma: DVector::zeros(n),
            sigma: None,
        }
    }

    pub fn check_dims(&self, problem: &SpoProblem) -> Result<()> {
        let n = problem.n();
        SpoError::check_dim("point x", n, self.x.len())?;
        SpoError::check_dim("point y", n, self.y.len())?;
        SpoError::check_dim("point lambda", problem.m(), self.lambda.len())?;
        SpoError::check_dim("point mu", problem.p(), self.mu.len())?;
        SpoError::check_dim("point gamma", n, self.gamma.len())?;
        if let Some(s) = &self.sigma {
            SpoError::check_dim("point sigma", n, s.len())?;
        }
        Ok(())
    }
}

/// Numerical index sets at a point (0-based indices).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IndexSets {
    /// `|xᵢ| < δ`
    pub i0: Vec<usize>,
    /// `|gⱼ(x)| ≤ tol`
    pub ig: Vec<usize>,
    /// `|xᵢ| < δ` and `|yᵢ| < δ`
    pub i_xy: Vec<usize>,
    /// `|gⱼ(x)| ≤ tol` and `|λⱼ| ≤ tol`
    pub i_glambda: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    StepBlowup,
    LinearSolveFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::StepBlowup => "step_blowup",
            SolveStatus::LinearSolveFailure => "linear_solve_failure",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    /// S-stationarity residual at every iterate, starting with the initial one.
    #[serde(with = "serde_dense::floats")]
    pub residual_history: Vec<f64>,
    /// `‖T(zᵏ)‖₂` of the operator being driven, one entry per iterate.
    #[serde(with = "serde_dense::floats")]
    pub operator_residual_history: Vec<f64>,
    pub final_point: PrimalDualPoint,
    /// `f(x) + ρ‖x‖₀(δ)`
    #[serde(with = "serde_dense::float")]
    pub objective: f64,
    pub l0_count: usize,
    /// Set when the problem was solved through the `x = x⁺ − x⁻` lift.
    #[serde(default)]
    pub split_variables: bool,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::INFINITY)
    }
}

/// Number of components with `|xᵢ| ≥ δ`; `δ = 0` counts exact nonzeros.
pub fn l0_norm(x: &DVector<f64>, delta: f64) -> usize {
    if delta == 0.0 {
        x.iter().filter(|v| **v != 0.0).count()
    } else {
        x.iter().filter(|v| v.abs() >= delta).count()
    }
}

/// `F_ρ(x) = f(x) + ρ‖x‖₀(δ)`.
pub fn eval_spo_objective(problem: &SpoProblem, x: &DVector<f64>, delta: f64) -> Result<f64> {
    Ok(problem.f(x)? + problem.rho() * l0_norm(x, delta) as f64)
}

#[derive(Debug, Clone)]
pub struct LagrangianEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// `∇ₓ L^SP = ∇f + g'ᵀλ + h'ᵀμ`.
pub fn lagrangian_gradient(
    problem: &SpoProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<DVector<f64>> {
    problem.check_x(x)?;
    SpoError::check_dim("lambda", problem.m(), lambda.len())?;
    SpoError::check_dim("mu", problem.p(), mu.len())?;
    let mut grad = problem.objective.gradient(x);
    SpoError::check_dim("gradient", problem.n(), grad.len())?;
    if problem.m() > 0 {
        grad += problem.g_jacobian(x)?.tr_mul(lambda);
    }
    if problem.p() > 0 {
        grad += problem.h_jacobian(x)?.tr_mul(mu);
    }
    finite_vec(grad, "Lagrangian gradient")
}

/// `∇²ₓₓ L^SP`, symmetrized.
pub fn lagrangian_hessian(
    problem: &SpoProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    problem.check_x(x)?;
    let n = problem.n();
    let mut hess = problem.objective.hessian(x);
    SpoError::check_dim("Hessian rows", n, hess.nrows())?;
    SpoError::check_dim("Hessian columns", n, hess.ncols())?;
    if problem.m() > 0 {
        problem.ineq.add_weighted_hessian(x, lambda, &mut hess);
    }
    if problem.p() > 0 {
        problem.eq.add_weighted_hessian(x, mu, &mut hess);
    }
    finite_mat(symmetrize(&hess), "Lagrangian Hessian")
}

/// `L^SP(x, λ, μ) = f(x) + λᵀg(x) + μᵀh(x)` with gradient and Hessian in `x`.
pub fn lagrangian_sp(
    problem: &SpoProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
) -> Result<LagrangianEval> {
    let gradient = lagrangian_gradient(problem, x, lambda, mu)?;
    let mut value = problem.f(x)?;
    if problem.m() > 0 {
        value += lambda.dot(&problem.g(x)?);
    }
    if problem.p() > 0 {
        value += mu.dot(&problem.h(x)?);
    }
    let hessian = lagrangian_hessian(problem, x, lambda, mu)?;
    Ok(LagrangianEval {
        value,
        gradient,
        hessian,
    })
}

pub fn index_sets(
    problem: &SpoProblem,
    point: &PrimalDualPoint,
    delta: f64,
    active_tol: f64,
) -> Result<IndexSets> {
    if delta < 0.0 || active_tol < 0.0 {
        return Err(SpoError::InvalidArgument(
            "delta and active_tol must be nonnegative".into(),
        ));
    }
    point.check_dims(problem)?;
    let is_zero = |v: f64| if delta == 0.0 { v == 0.0 } else { v.abs() < delta };
    let i0: Vec<usize> = (0..problem.n()).filter(|&i| is_zero(point.x[i])).collect();
    let i_xy = i0.iter().copied().filter(|&i| is_zero(point.y[i])).collect();
    let g = problem.g(&point.x)?;
    let ig: Vec<usize> = (0..problem.m())
        .filter(|&j| g[j].abs() <= active_tol)
        .collect();
    let i_glambda = ig
        .iter()
        .copied()
        .filter(|&j| point.lambda[j].abs() <= active_tol)
        .collect();
    Ok(IndexSets {
        i0,
        ig,
        i_xy,
        i_glambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn shifted_quadratic() -> SpoProblem {
        SpoProblem::new(QuadraticObjective::distance_to(&dv(&[2.0, 3.0])), 1.0).unwrap()
    }

    #[test]
    fn l0_counts() {
        assert_eq!(l0_norm(&dv(&[0.0, 0.0, 0.0]), 0.0), 0);
        assert_eq!(l0_norm(&dv(&[1.0, 0.0, -2.0]), 0.0), 2);
        assert_eq!(l0_norm(&dv(&[1e-5, 1.0]), 1e-4), 1);
    }

    #[test]
    fn spo_objective_values() {
        let p = shifted_quadratic();
        assert_relative_eq!(eval_spo_objective(&p, &dv(&[2.0, 3.0]), 0.0).unwrap(), 2.0);
        assert_relative_eq!(eval_spo_objective(&p, &dv(&[0.0, 0.0]), 0.0).unwrap(), 6.5);
        assert_relative_eq!(eval_spo_objective(&p, &dv(&[2.0, 0.0]), 0.0).unwrap(), 5.5);
    }

    #[test]
    fn rejects_bad_rho_and_dims() {
        let obj = QuadraticObjective::distance_to(&dv(&[1.0]));
        assert!(SpoProblem::new(obj.clone(), 0.0).is_err());
        assert!(SpoProblem::new(obj.clone(), f64::NAN).is_err());
        let p = SpoProblem::new(obj, 1.0).unwrap();
        assert!(p.f(&dv(&[1.0, 2.0])).is_err());
        assert!(p
            .with_equalities(AffineMap::new(DMatrix::zeros(1, 2), dv(&[0.0])).unwrap())
            .is_err());
    }

    #[test]
    fn lagrangian_unconstrained_quadratic() {
        let p = SpoProblem::new(QuadraticObjective::distance_to(&dv(&[0.0, 0.0])), 1.0).unwrap();
        let l = lagrangian_sp(&p, &dv(&[1.0, 2.0]), &dv(&[]), &dv(&[])).unwrap();
        assert_relative_eq!(l.value, 2.5);
        assert_eq!(l.gradient, dv(&[1.0, 2.0]));
        assert_eq!(l.hessian, DMatrix::identity(2, 2));
    }

    #[test]
    fn lagrangian_linear_equality() {
        let zero = QuadraticObjective::new(DMatrix::zeros(2, 2), dv(&[0.0, 0.0]), 0.0).unwrap();
        let h = AffineMap::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), dv(&[1.0])).unwrap();
        let p = SpoProblem::new(zero, 1.0).unwrap().with_equalities(h).unwrap();
        let grad = lagrangian_gradient(&p, &dv(&[0.0, 0.0]), &dv(&[]), &dv(&[3.0])).unwrap();
        assert_eq!(grad, dv(&[3.0, 3.0]));
    }

    #[test]
    fn non_finite_oracle_is_an_error() {
        let obj = FnObjective::new(
            1,
            |_| f64::NAN,
            |_| DVector::zeros(1),
            |_| DMatrix::zeros(1, 1),
        );
        let p = SpoProblem::new(obj, 1.0).unwrap();
        assert!(matches!(
            eval_spo_objective(&p, &dv(&[0.0]), 0.0),
            Err(SpoError::NonFinite(_))
        ));
    }

    #[test]
    fn index_set_examples() {
        let p = shifted_quadratic();
        let mut pt = PrimalDualPoint::zeros(2, 0, 0);
        pt.x = dv(&[0.0, 1.0]);
        pt.y = dv(&[1.0, 0.0]);
        let s = index_sets(&p, &pt, 1e-4, 1e-8).unwrap();
        assert_eq!(s.i0, vec![0]);
        assert!(s.i_xy.is_empty());

        pt.y = dv(&[0.0, 0.0]);
        let s = index_sets(&p, &pt, 1e-4, 1e-8).unwrap();
        assert_eq!(s.i_xy, vec![0]);
    }

    #[test]
    fn index_sets_for_constraints() {
        // g(x) = (−0.5, 0) at x = 0
        let g = AffineMap::new(DMatrix::from_row_slice(2, 1, &[1.0, 1.0]), dv(&[0.5, 0.0])).unwrap();
        let p = SpoProblem::new(QuadraticObjective::distance_to(&dv(&[1.0])), 1.0)
            .unwrap()
            .with_inequalities(g)
            .unwrap();
        let mut pt = PrimalDualPoint::zeros(1, 2, 0);
        pt.y = dv(&[1.0]);
        let s = index_sets(&p, &pt, 1e-4, 1e-8).unwrap();
        assert_eq!(s.ig, vec![1]);
        assert_eq!(s.i_glambda, vec![1]);
    }

    #[test]
    fn point_round_trips_through_json() {
        let mut pt = PrimalDualPoint::zeros(2, 1, 0);
        pt.x = dv(&[1.5, -2.0]);
        let json = serde_json::to_string(&pt).unwrap();
        assert!(json.contains("\"x\":[1.5,-2.0]"));
        let back: PrimalDualPoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pt);
    }
}
