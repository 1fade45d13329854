//! Instance builders and numerical helpers shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use spo_core::apps::{self, Instance, SeededRng};
use spo_core::kkt::{self, KktLayout};
use spo_core::model::{AffineMap, QuadraticObjective};
use spo_core::{NcpKind, OperatorKind, PrimalDualPoint, SpoProblem};

pub fn gaussian_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

pub fn gaussian_vector(rng: &mut SeededRng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.normal())
}

/// `½xᵀQx + cᵀx` with optional affine equalities and inequalities.
pub fn quadratic_problem(
    q: DMatrix<f64>,
    c: DVector<f64>,
    eq: Option<(DMatrix<f64>, DVector<f64>)>,
    ineq: Option<(DMatrix<f64>, DVector<f64>)>,
    nonneg: bool,
    rho: f64,
) -> SpoProblem {
    let mut p = SpoProblem::new(QuadraticObjective::new(q, c, 0.0).unwrap(), rho).unwrap();
    if let Some((a, b)) = ineq.filter(|(a, _)| a.nrows() > 0) {
        p = p.with_inequalities(AffineMap::new(a, b).unwrap()).unwrap();
    }
    if let Some((a, b)) = eq.filter(|(a, _)| a.nrows() > 0) {
        p = p.with_equalities(AffineMap::new(a, b).unwrap()).unwrap();
    }
    p.with_nonneg(nonneg)
}

/// A quadratic instance built around a known S-stationary point.
pub struct KktInstance {
    pub problem: SpoProblem,
    /// `(x, y*, λ, μ, γ*, σ*)`, an exact zero of every operator.
    pub point: PrimalDualPoint,
    pub support: Vec<usize>,
}

/// Picks `x` (support entries of magnitude in `[0.5, 2]`), multipliers and
/// constraints first, then solves for `c` on the support so that the point is
/// S-stationary. `Q` is positive definite, active inequalities have `λ > 0`,
/// and `p + |active| ≤ |support|`, so SP-LICQ and strong SP-SOSC hold
/// generically.
pub fn kkt_instance(seed: u64, n: usize, nonneg: bool) -> KktInstance {
    let mut rng = SeededRng::new(seed);
    let k = 1 + rng.index(n);
    let support: Vec<usize> = {
        let mut s = rng.permutation(n)[..k].to_vec();
        s.sort_unstable();
        s
    };
    let mut x = DVector::zeros(n);
    for &i in &support {
        let mag = rng.uniform_in(0.5, 2.0);
        x[i] = if nonneg || rng.uniform() < 0.5 { mag } else { -mag };
    }
    let p = rng.index(k.min(2) + 1);
    let m_active = rng.index(k - p + 1).min(2);
    let m = m_active + rng.index(2);

    let b = gaussian_matrix(&mut rng, n, n);
    let q = &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    let a_eq = gaussian_matrix(&mut rng, p, n);
    let b_eq = &a_eq * &x;
    let a_in = gaussian_matrix(&mut rng, m, n);
    let mut b_in = &a_in * &x;
    let mut lambda = DVector::zeros(m);
    for j in 0..m {
        if j < m_active {
            lambda[j] = rng.uniform_in(0.5, 2.0);
        } else {
            b_in[j] += rng.uniform_in(0.5, 2.0);
        }
    }
    let mu = gaussian_vector(&mut rng, p);
    let mut c = gaussian_vector(&mut rng, n);
    let grad_rest = &q * &x + a_eq.tr_mul(&mu) + a_in.tr_mul(&lambda);
    for &i in &support {
        c[i] = -grad_rest[i];
    }
    let rho = rng.uniform_in(0.5, 2.0);
    let problem = quadratic_problem(q, c, Some((a_eq, b_eq)), Some((a_in, b_in)), nonneg, rho);
    let point = kkt::complete_point(&problem, &x, &lambda, &mu, 0.0).unwrap();
    KktInstance { problem, point, support }
}

/// Small members of the three application families.
pub fn family_problem(family: usize, seed: u64) -> SpoProblem {
    let inst = match family % 3 {
        0 => Instance::Portfolio(apps::gen_portfolio(8, seed).unwrap()),
        1 => Instance::Sensing(apps::gen_sensing(10, 6, 2, 3, seed).unwrap()),
        _ => Instance::Logistic(apps::gen_logistic(6, 24, 2, seed).unwrap()),
    };
    apps::build_spo(&inst).unwrap()
}

/// A random point in the layout of `kind`, with `y` unconstrained.
pub fn random_point(problem: &SpoProblem, rng: &mut SeededRng) -> PrimalDualPoint {
    let (n, m, p) = (problem.n(), problem.m(), problem.p());
    PrimalDualPoint {
        x: gaussian_vector(rng, n) * 0.5,
        y: gaussian_vector(rng, n),
        lambda: gaussian_vector(rng, m),
        mu: gaussian_vector(rng, p),
        gamma: gaussian_vector(rng, n),
        sigma: None,
    }
}

/// Central finite differences of the operator residual in the packed variables.
pub fn fd_jacobian(problem: &SpoProblem, point: &PrimalDualPoint, kind: OperatorKind, ncp: NcpKind) -> DMatrix<f64> {
    let layout = KktLayout::for_problem(problem, kind);
    let z = kkt::pack(point, &layout);
    let rho = problem.rho();
    let eval = |v: &DVector<f64>| kkt::residual(problem, &kkt::unpack(v, &layout, rho), kind, ncp).unwrap().vector;
    let mut jac = DMatrix::zeros(layout.len(), layout.len());
    for k in 0..layout.len() {
        let h = 1e-6 * z[k].abs().max(1.0);
        let mut plus = z.clone();
        plus[k] += h;
        let mut minus = z.clone();
        minus[k] -= h;
        jac.set_column(k, &((eval(&plus) - eval(&minus)) / (2.0 * h)));
    }
    jac
}

/// `‖A − B‖_F / max(1, ‖A‖_F)`.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(1.0)
}

/// Least-squares S-stationarity check independent of any solver multipliers:
/// the smallest `‖(∇f + Jgₐᵀλ + Jhᵀμ)_S‖` over `(λ, μ)` with the active
/// inequalities of `x`, followed by `min λ` of that fit.
pub fn best_stationarity_fit(problem: &SpoProblem, x: &DVector<f64>, active_tol: f64) -> (f64, f64) {
    let n = problem.n();
    let support: Vec<usize> = (0..n).filter(|&i| x[i] != 0.0).collect();
    let grad = problem.objective().gradient(x);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut n_ineq = 0;
    if problem.m() > 0 {
        let g = problem.g(x).unwrap();
        let jg = problem.g_jacobian(x).unwrap();
        for j in 0..problem.m() {
            if g[j].abs() <= active_tol {
                cols.push(jg.row(j).transpose());
                n_ineq += 1;
            }
        }
    }
    if problem.p() > 0 {
        let jh = problem.h_jacobian(x).unwrap();
        cols.extend((0..problem.p()).map(|j| jh.row(j).transpose()));
    }
    let rhs = DVector::from_fn(support.len(), |r, _| -grad[support[r]]);
    if cols.is_empty() || support.is_empty() {
        return (rhs.norm(), 0.0);
    }
    let a = DMatrix::from_fn(support.len(), cols.len(), |r, c| cols[c][support[r]]);
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&rhs, 1e-12).unwrap();
    let resid = (&a * &coef - &rhs).norm();
    let min_lambda = coef.rows(0, n_ineq).iter().copied().fold(0.0f64, f64::min);
    (resid, min_lambda)
}
