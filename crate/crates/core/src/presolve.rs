//! ℓ1-surrogate initialization: `min f(x) + ρ‖x‖₁` over the same feasible set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SpoError};
use crate::linalg::{lu_solve, spectral_norm_sq, symmetrize};
use crate::model::{Family, Objective, SpoProblem};

/// `sign(vᵢ)·max(|vᵢ| − t, 0)`.
pub fn soft_threshold(v: &DVector<f64>, t: f64) -> DVector<f64> {
    v.map(|vi| vi.signum() * (vi.abs() - t).max(0.0))
}

type SmoothFn<'a> = dyn Fn(&DVector<f64>) -> (f64, DVector<f64>) + Sync + 'a;

/// `min s(x) + w‖x‖₁` with `s` smooth and convex.
pub struct CompositeSpec<'a> {
    pub smooth: Box<SmoothFn<'a>>,
    /// Initial Lipschitz estimate of `∇s`; backtracking corrects it upward.
    pub lipschitz_hint: Option<f64>,
    pub l1_weight: f64,
}

impl<'a> CompositeSpec<'a> {
    pub fn from_objective(f: &'a dyn Objective, l1_weight: f64, lipschitz_hint: Option<f64>) -> Self {
        Self {
            smooth: Box::new(move |x| (f.value(x), f.gradient(x))),
            lipschitz_hint,
            l1_weight,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FistaResult {
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Accelerated proximal gradient with backtracking and objective-increase restart.
///
/// Stops when the gradient-mapping norm `L‖x⁺ − y‖` is at most `tol`.
/// Returns the best iterate seen.
pub fn fista(spec: &CompositeSpec<'_>, x_init: &DVector<f64>, max_iter: usize, tol: f64) -> FistaResult {
    let w = spec.l1_weight;
    let composite = |x: &DVector<f64>, s: f64| s + w * x.iter().map(|v| v.abs()).sum::<f64>();
    let mut lip = spec.lipschitz_hint.filter(|l| *l > 0.0 && l.is_finite()).unwrap_or(1.0);

    let mut x = x_init.clone();
    let (fx, _) = (spec.smooth)(&x);
    let mut obj = composite(&x, fx);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let (fy, gy) = (spec.smooth)(&y);
        let (x_new, f_new) = loop {
            let cand = soft_threshold(&(&y - &gy / lip), w / lip);
            let (fc, _) = (spec.smooth)(&cand);
            let diff = &cand - &y;
            let model = fy + gy.dot(&diff) + 0.5 * lip * diff.norm_squared();
            if fc <= model + 1e-12 * fy.abs().max(1.0) || lip > 1e300 {
                break (cand, fc);
            }
            lip *= 2.0;
        };
        let mapping = lip * (&x_new - &y).norm();
        let obj_new = composite(&x_new, f_new);

        if obj_new > obj && t > 1.0 {
            // Momentum made things worse: drop it and retry from x.
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        y = &x_new + (&x_new - &x) * momentum;
        t = t_next;
        if obj_new <= obj {
            x = x_new;
            obj = obj_new;
        }
        if mapping <= tol {
            converged = true;
            break;
        }
    }
    FistaResult {
        x,
        objective: obj,
        iterations,
        converged,
    }
}

/// `min ½xᵀQx + cᵀx  s.t.  A_eq x = b_eq,  A_in x ≤ b_in`, optionally `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct QpSpec {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub nonneg: bool,
}

impl QpSpec {
    pub fn unconstrained(q: DMatrix<f64>, c: DVector<f64>) -> Self {
        let n = c.len();
        Self {
            q,
            c,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
            nonneg: false,
        }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        SpoError::check_dim("QP Q rows", n, self.q.nrows())?;
        SpoError::check_dim("QP Q columns", n, self.q.ncols())?;
        SpoError::check_dim("QP A_eq columns", n, self.a_eq.ncols())?;
        SpoError::check_dim("QP b_eq", self.a_eq.nrows(), self.b_eq.len())?;
        SpoError::check_dim("QP A_in columns", n, self.a_in.ncols())?;
        SpoError::check_dim("QP b_in", self.a_in.nrows(), self.b_in.len())?;
        let asym = (&self.q - self.q.transpose()).amax();
        if asym > 1e-10 * self.q.amax().max(1.0) {
            return Err(SpoError::InvalidArgument(format!(
                "QP matrix is not symmetric (max deviation {asym:e})"
            )));
        }
        Ok(())
    }
}

/// Primal-dual solution with the sign convention
/// `Qx + c − A_eqᵀμ + A_inᵀz − λ = 0`, `z, λ ≥ 0`.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// `μ`
    pub eq_multipliers: DVector<f64>,
    /// `z`
    pub in_multipliers: DVector<f64>,
    /// `λ`; empty unless `x ≥ 0` is imposed.
    pub bound_multipliers: DVector<f64>,
    pub iterations: usize,
}

/// Largest KKT violation of `sol`, evaluated from scratch: stationarity,
/// primal feasibility, dual signs and complementarity.
pub fn qp_kkt_residual(spec: &QpSpec, sol: &QpSolution) -> f64 {
    let x = &sol.x;
    let mut stat = &spec.q * x + &spec.c - spec.a_eq.tr_mul(&sol.eq_multipliers)
        + spec.a_in.tr_mul(&sol.in_multipliers);
    if spec.nonneg {
        stat -= &sol.bound_multipliers;
    }
    let mut worst = stat.amax();
    if spec.a_eq.nrows() > 0 {
        worst = worst.max((&spec.a_eq * x - &spec.b_eq).amax());
    }
    if spec.a_in.nrows() > 0 {
        let slack = &spec.b_in - &spec.a_in * x;
        for (s, z) in slack.iter().zip(sol.in_multipliers.iter()) {
            worst = worst.max((-s).max(0.0)).max((-z).max(0.0)).max((s * z).abs());
        }
    }
    if spec.nonneg {
        for (xi, li) in x.iter().zip(sol.bound_multipliers.iter()) {
            worst = worst.max((-xi).max(0.0)).max((-li).max(0.0)).max((xi * li).abs());
        }
    }
    worst
}

const CENTERING: f64 = 0.1;
const FRACTION_TO_BOUNDARY: f64 = 0.995;

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha = 1.0_f64;
    for (vi, di) in v.iter().zip(dv.iter()) {
        if *di < 0.0 {
            alpha = alpha.min(-FRACTION_TO_BOUNDARY * vi / di);
        }
    }
    alpha
}

/// Primal-dual path following with fixed centering and an infeasible start.
pub fn qp_solve(spec: &QpSpec, max_iter: usize, tol: f64) -> Result<QpSolution> {
    spec.validate()?;
    let n = spec.n();
    let (p, m) = (spec.a_eq.nrows(), spec.a_in.nrows());
    let nb = if spec.nonneg { n } else { 0 };
    let q = symmetrize(&spec.q);

    let mut x = if spec.nonneg {
        DVector::from_element(n, 1.0 / n.max(1) as f64)
    } else {
        DVector::zeros(n)
    };
    let mut mu = DVector::zeros(p);
    let mut s = (&spec.b_in - &spec.a_in * &x).map(|v| v.max(1.0));
    let mut z = DVector::from_element(m, 1.0);
    let mut lam = DVector::from_element(nb, 1.0);

    for iter in 0..max_iter {
        let mut r_d = &q * &x + &spec.c - spec.a_eq.tr_mul(&mu) + spec.a_in.tr_mul(&z);
        if spec.nonneg {
            r_d -= &lam;
        }
        let r_eq = &spec.a_eq * &x - &spec.b_eq;
        let r_in = &spec.a_in * &x + &s - &spec.b_in;
        let pairs = m + nb;
        let gap = if pairs > 0 {
            (s.dot(&z) + if spec.nonneg { x.dot(&lam) } else { 0.0 }) / pairs as f64
        } else {
            0.0
        };
        let primal = r_eq.amax().max(r_in.amax());
        if r_d.amax().max(primal).max(gap) <= tol {
            return Ok(QpSolution {
                x,
                eq_multipliers: mu,
                in_multipliers: z,
                bound_multipliers: lam,
                iterations: iter,
            });
        }
        if !x.iter().all(|v| v.is_finite()) || x.amax() > 1e12 || gap > 1e20 {
            return Err(SpoError::Presolve(
                "interior-point iterates diverged; the QP looks infeasible or unbounded".into(),
            ));
        }

        let target = CENTERING * gap;
        let r_s = s.component_mul(&z).add_scalar(-target);
        let r_x = if spec.nonneg {
            x.component_mul(&lam).add_scalar(-target)
        } else {
            DVector::zeros(0)
        };

        // Reduced system [[K, A_eqᵀ], [A_eq, 0]] (dx, −dμ) = rhs.
        let dz_over_s = z.component_div(&s);
        let mut k = q.clone();
        if m > 0 {
            let scaled = DMatrix::from_fn(m, n, |i, j| spec.a_in[(i, j)] * dz_over_s[i]);
            k += spec.a_in.tr_mul(&scaled);
        }
        let mut rhs_x = -&r_d;
        if m > 0 {
            let w = DVector::from_fn(m, |i, _| dz_over_s[i] * r_in[i] - r_s[i] / s[i]);
            rhs_x -= spec.a_in.tr_mul(&w);
        }
        if spec.nonneg {
            for i in 0..n {
                k[(i, i)] += lam[i] / x[i];
                rhs_x[i] -= r_x[i] / x[i];
            }
        }
        let mut big = DMatrix::zeros(n + p, n + p);
        big.view_mut((0, 0), (n, n)).copy_from(&k);
        big.view_mut((0, n), (n, p)).copy_from(&spec.a_eq.transpose());
        big.view_mut((n, 0), (p, n)).copy_from(&spec.a_eq);
        let mut rhs = DVector::zeros(n + p);
        rhs.rows_mut(0, n).copy_from(&rhs_x);
        rhs.rows_mut(n, p).copy_from(&(-&r_eq));
        // Symmetric equilibration: barrier terms make the diagonal span many decades.
        let scale = DVector::from_fn(n + p, |i, _| {
            let r = big.row(i).amax();
            if r > 0.0 { 1.0 / r.sqrt() } else { 1.0 }
        });
        let scaled = DMatrix::from_fn(n + p, n + p, |i, j| scale[i] * big[(i, j)] * scale[j]);
        let sol = lu_solve(&scaled, &rhs.component_mul(&scale)).map(|v| v.component_mul(&scale)).map_err(|e| {
            SpoError::Presolve(format!("interior-point system is singular ({e}); check for redundant equalities"))
        })?;
        let dx = sol.rows(0, n).into_owned();
        let dmu = -sol.rows(n, p).into_owned();

        let (ds, dz) = if m > 0 {
            let a_dx = &spec.a_in * &dx;
            let dz = DVector::from_fn(m, |i, _| dz_over_s[i] * (a_dx[i] + r_in[i]) - r_s[i] / s[i]);
            let ds = DVector::from_fn(m, |i, _| -r_in[i] - a_dx[i]);
            (ds, dz)
        } else {
            (DVector::zeros(0), DVector::zeros(0))
        };
        let dlam = if spec.nonneg {
            DVector::from_fn(n, |i, _| (-r_x[i] - lam[i] * dx[i]) / x[i])
        } else {
            DVector::zeros(0)
        };

        let mut alpha_p = max_step(&s, &ds);
        let mut alpha_d = max_step(&z, &dz);
        if spec.nonneg {
            alpha_p = alpha_p.min(max_step(&x, &dx));
            alpha_d = alpha_d.min(max_step(&lam, &dlam));
        }
        x += dx * alpha_p;
        s += ds * alpha_p;
        mu += dmu * alpha_d;
        z += dz * alpha_d;
        lam += dlam * alpha_d;
    }

    let r_eq = (&spec.a_eq * &x - &spec.b_eq).amax();
    let r_in = (&spec.a_in * &x - &spec.b_in).map(|v| v.max(0.0)).amax();
    if r_eq.max(r_in) > tol.max(1e-8) {
        Err(SpoError::Presolve(format!(
            "no feasible point found after {max_iter} interior-point iterations (violation {:e})",
            r_eq.max(r_in)
        )))
    } else {
        Err(SpoError::Presolve(format!(
            "interior-point method did not reach tolerance {tol:e} in {max_iter} iterations"
        )))
    }
}

pub const FISTA_MAX_ITER: usize = 20_000;
pub const FISTA_TOL: f64 = 1e-9;
pub const QP_MAX_ITER: usize = 200;
pub const QP_TOL: f64 = 1e-12;

/// QP data of a problem with quadratic objective and affine constraints.
fn quadratic_data(problem: &SpoProblem) -> Option<QpSpec> {
    let (q, c) = problem.objective().quadratic_form()?;
    let (a_in, b_in) = problem.inequalities().affine_form()?;
    let (a_eq, b_eq) = problem.equalities().affine_form()?;
    Some(QpSpec {
        q,
        c,
        a_eq,
        b_eq,
        a_in,
        b_in,
        nonneg: problem.nonneg(),
    })
}

fn lipschitz_of(f: &dyn Objective) -> Option<f64> {
    f.quadratic_form()
        .map(|(q, _)| spectral_norm_sq(&q, 100).sqrt() * 1.01)
}

/// ℓ1-surrogate solution used as the Newton starting point.
///
/// - portfolio: `min ½xᵀQx` over the feasible set, since `‖x‖₁ = eᵀx = 1` there;
/// - quadratic and sensing: the ℓ1 QP over the feasible set, lifted to
///   `(x⁺, x⁻)` when `x` is free (for sensing, `½‖Ax − b‖² + ρ‖x‖₁` s.t. `Cx = d`);
/// - logistic: FISTA on the ℓ1-penalized log-likelihood.
pub fn presolve_l1(problem: &SpoProblem) -> Result<DVector<f64>> {
    let n = problem.n();
    let rho = problem.rho();
    match problem.family() {
        Family::Portfolio => {
            let spec = quadratic_data(problem)
                .ok_or_else(|| SpoError::Presolve("portfolio problem is not a linearly constrained QP".into()))?;
            Ok(qp_solve(&spec, QP_MAX_ITER, QP_TOL)?.x)
        }
        Family::Quadratic | Family::Sensing => {
            let mut spec = quadratic_data(problem)
                .ok_or_else(|| SpoError::Presolve("problem lacks quadratic/affine structure".into()))?;
            if spec.nonneg {
                spec.c.add_scalar_mut(rho);
                return Ok(qp_solve(&spec, QP_MAX_ITER, QP_TOL)?.x);
            }
            let lift = |a: &DMatrix<f64>| {
                let mut out = DMatrix::zeros(a.nrows(), 2 * n);
                out.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
                out.view_mut((0, n), (a.nrows(), n)).copy_from(&(-a));
                out
            };
            let mut q2 = DMatrix::zeros(2 * n, 2 * n);
            q2.view_mut((0, 0), (n, n)).copy_from(&spec.q);
            q2.view_mut((n, n), (n, n)).copy_from(&spec.q);
            q2.view_mut((0, n), (n, n)).copy_from(&(-&spec.q));
            q2.view_mut((n, 0), (n, n)).copy_from(&(-&spec.q));
            let c2 = DVector::from_fn(2 * n, |k, _| {
                rho + if k < n { spec.c[k] } else { -spec.c[k - n] }
            });
            let lifted = QpSpec {
                q: q2,
                c: c2,
                a_eq: lift(&spec.a_eq),
                b_eq: spec.b_eq,
                a_in: lift(&spec.a_in),
                b_in: spec.b_in,
                nonneg: true,
            };
            let z = qp_solve(&lifted, QP_MAX_ITER, QP_TOL)?.x;
            Ok(z.rows(0, n) - z.rows(n, n))
        }
        Family::Logistic => {
            let f = problem.objective().as_ref();
            let spec = CompositeSpec::from_objective(f, rho, lipschitz_of(f));
            Ok(fista(&spec, &DVector::zeros(n), FISTA_MAX_ITER, FISTA_TOL).x)
        }
        Family::General => Err(SpoError::Presolve(
            "no ℓ1 presolve for general problems; supply a starting point".into(),
        )),
    }
}
