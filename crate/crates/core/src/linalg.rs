//! Dense kernels shared by the solvers and the checkers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative pivot threshold below which an LU factorization is declared singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularMatrix {
    /// Row of `U` whose pivot fell under the threshold.
    pub pivot_row: usize,
    pub pivot: f64,
}

impl std::fmt::Display for SingularMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "matrix is singular: pivot {:e} at row {}",
            self.pivot, self.pivot_row
        )
    }
}

impl std::error::Error for SingularMatrix {}

/// Solves `a · x = b` by LU with partial pivoting on the row-equilibrated
/// system `D a x = D b`, `D = diag(1 / max_j |aᵢⱼ|)`.
///
/// Fails when some pivot of `U` has magnitude below `PIVOT_TOL · max|(D a)ᵢⱼ|`.
/// Equilibration keeps multiplier rows scaled like `γ ≈ ρ/|xᵢ|` from masking
/// the remaining rows in the relative test.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, SingularMatrix> {
    lu_solve_with_tol(a, b, PIVOT_TOL)
}

/// [`lu_solve`] with a caller-chosen relative pivot threshold; `0` reports
/// only exactly zero pivots (and non-finite solutions).
pub fn lu_solve_with_tol(a: &DMatrix<f64>, b: &DVector<f64>, pivot_tol: f64) -> Result<DVector<f64>, SingularMatrix> {
    use faer::linalg::solvers::Solve;

    let n = a.nrows();
    assert_eq!(n, a.ncols(), "lu_solve needs a square matrix");
    assert_eq!(n, b.len(), "lu_solve: rhs length");
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut row_scale = vec![0.0; n];
    for (i, s) in row_scale.iter_mut().enumerate() {
        let r = a.row(i).amax();
        if r == 0.0 || !r.is_finite() {
            return Err(SingularMatrix {
                pivot_row: i,
                pivot: 0.0,
            });
        }
        *s = 1.0 / r;
    }
    let scaled = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)] * row_scale[i]);
    let lu = scaled.partial_piv_lu();
    let u = lu.U();
    // Every scaled row has max-entry 1.
    for i in 0..n {
        let pivot = u[(i, i)];
        if !(pivot.abs() >= pivot_tol) || pivot == 0.0 {
            return Err(SingularMatrix {
                pivot_row: i,
                pivot,
            });
        }
    }
    let rhs = faer::Mat::<f64>::from_fn(n, 1, |i, _| b[i] * row_scale[i]);
    let sol = lu.solve(&rhs);
    let x = DVector::from_fn(n, |i, _| sol[(i, 0)]);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(SingularMatrix {
            pivot_row: n,
            pivot: f64::NAN,
        })
    }
}

/// Singular values of `a`, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Numerical rank of `a` with cutoff `RANK_TOL · σ_max`, and the smallest
/// of the `min(rows, cols)` singular values.
pub fn rank(a: &DMatrix<f64>) -> (usize, f64) {
    let s = singular_values(a);
    let Some(&smax) = s.first() else {
        return (0, f64::INFINITY);
    };
    let cut = RANK_TOL * smax;
    let r = s.iter().filter(|&&v| v > cut).count();
    let smin = *s.last().unwrap();
    // More rows than columns means the rows cannot be independent.
    let smin = if a.nrows() > a.ncols() { 0.0 } else { smin };
    (r, smin)
}

/// Orthonormal basis (as columns) of `{d ∈ Rⁿ : rows · d = 0}`.
pub fn null_space(rows: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    if rows.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let (r, _) = rank(rows);
    if r >= n {
        return DMatrix::zeros(n, 0);
    }
    // Eigenvectors of RᵀR belonging to the n − r smallest eigenvalues.
    let gram = rows.transpose() * rows;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let k = n - r;
    let mut basis = DMatrix::zeros(n, k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(idx));
    }
    basis
}

/// Smallest eigenvalue of a symmetric matrix (`+∞` for the empty matrix).
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = symmetrize(a);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest eigenvalue of `aᵀa` by power iteration, used as a Lipschitz estimate.
pub fn spectral_norm_sq(a: &DMatrix<f64>, iters: usize) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618).sin() * 0.1);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = a.tr_mul(&(a * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w / norm;
    }
    lambda
}
