//! Benchmark families: sparse portfolio selection, compressive sensing with
//! exact linear side information, and sparse logistic regression.
//!
//! Every generator is a pure function of its dimensions and seed. Random
//! numbers come from a xorshift generator seeded with `seed_from_u64`, with
//! the conversions below fixed so that instances are bit-for-bit reproducible:
//! uniform `[0, 1)` from the top 53 bits, normals by Box–Muller (both values of
//! a pair are used, cosine first), permutations by Fisher–Yates from the back.

use std::fs;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_xorshift::XorShiftRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SpoError};
use crate::model::{AffineMap, Family, Objective, QuadraticObjective, LeastSquaresObjective, SpoProblem};
use crate::serde_dense;

/// Deterministic random stream used by all generators.
pub struct SeededRng {
    inner: XorShiftRng,
    spare_normal: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: XorShiftRng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform integer in `0..bound`.
    pub fn index(&mut self, bound: usize) -> usize {
        ((self.uniform() * bound as f64) as usize).min(bound - 1)
    }

    /// Random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.index(i + 1);
            p.swap(i, j);
        }
        p
    }
}

fn default_rho() -> f64 {
    1.0
}

/// `min ½xᵀQx + ρ‖x‖₀  s.t.  eᵀx = 1, αᵀx ≥ β, x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioInstance {
    #[serde(with = "serde_dense::matrix")]
    pub q: DMatrix<f64>,
    #[serde(with = "serde_dense::vector")]
    pub alpha: DVector<f64>,
    pub beta: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `min ½‖Ax − b‖² + ρ‖x‖₀  s.t.  Cx = d`, generated around a sparse `x̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingInstance {
    #[serde(with = "serde_dense::matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "serde_dense::vector")]
    pub b: DVector<f64>,
    #[serde(with = "serde_dense::matrix")]
    pub c: DMatrix<f64>,
    #[serde(with = "serde_dense::vector")]
    pub d: DVector<f64>,
    #[serde(with = "serde_dense::vector")]
    pub xbar: DVector<f64>,
    pub s: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `min Σ log(1 + exp(−yᵢ wᵀxᵢ)) + ρ‖w‖₀`; rows of `x` are samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticInstance {
    #[serde(with = "serde_dense::matrix")]
    pub x: DMatrix<f64>,
    #[serde(with = "serde_dense::vector")]
    pub y: DVector<f64>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `min ½xᵀQx + cᵀx + ρ‖x‖₀  s.t.  A_eq x = b_eq, A_in x ≤ b_in` (and `x ≥ 0` if set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticInstance {
    #[serde(with = "serde_dense::matrix")]
    pub q: DMatrix<f64>,
    #[serde(with = "serde_dense::vector")]
    pub c: DVector<f64>,
    #[serde(with = "serde_dense::matrix", default = "empty_matrix")]
    pub a_eq: DMatrix<f64>,
    #[serde(with = "serde_dense::vector", default = "empty_vector")]
    pub b_eq: DVector<f64>,
    #[serde(with = "serde_dense::matrix", default = "empty_matrix")]
    pub a_in: DMatrix<f64>,
    #[serde(with = "serde_dense::vector", default = "empty_vector")]
    pub b_in: DVector<f64>,
    #[serde(default)]
    pub nonneg: bool,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn empty_matrix() -> DMatrix<f64> {
    DMatrix::zeros(0, 0)
}

fn empty_vector() -> DVector<f64> {
    DVector::zeros(0)
}

/// Serialized problem instance, tagged by `"kind"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Instance {
    Quadratic(QuadraticInstance),
    Portfolio(PortfolioInstance),
    Sensing(SensingInstance),
    Logistic(LogisticInstance),
}

/// A zero-row matrix read from JSON comes back `0 × 0`; give it `n` columns.
fn fix_empty(m: &mut DMatrix<f64>, n: usize) {
    if m.nrows() == 0 {
        *m = DMatrix::zeros(0, n);
    }
}

impl Instance {
    pub fn family(&self) -> Family {
        match self {
            Instance::Quadratic(_) => Family::Quadratic,
            Instance::Portfolio(_) => Family::Portfolio,
            Instance::Sensing(_) => Family::Sensing,
            Instance::Logistic(_) => Family::Logistic,
        }
    }

    pub fn rho(&self) -> f64 {
        match self {
            Instance::Quadratic(i) => i.rho,
            Instance::Portfolio(i) => i.rho,
            Instance::Sensing(i) => i.rho,
            Instance::Logistic(i) => i.rho,
        }
    }

    pub fn set_rho(&mut self, rho: f64) {
        match self {
            Instance::Quadratic(i) => i.rho = rho,
            Instance::Portfolio(i) => i.rho = rho,
            Instance::Sensing(i) => i.rho = rho,
            Instance::Logistic(i) => i.rho = rho,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Instance::Quadratic(i) => i.seed,
            Instance::Portfolio(i) => i.seed,
            Instance::Sensing(i) => i.seed,
            Instance::Logistic(i) => i.seed,
        }
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        match self {
            Instance::Quadratic(i) => i.c.len(),
            Instance::Portfolio(i) => i.alpha.len(),
            Instance::Sensing(i) => i.a.ncols().max(i.c.ncols()).max(i.xbar.len()),
            Instance::Logistic(i) => i.x.ncols(),
        }
    }

    /// Restores column counts of empty matrices and checks all shapes.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.n();
        let dim = SpoError::check_dim;
        match self {
            Instance::Quadratic(i) => {
                fix_empty(&mut i.a_eq, n);
                fix_empty(&mut i.a_in, n);
                dim("quadratic Q rows", n, i.q.nrows())?;
                dim("quadratic Q columns", n, i.q.ncols())?;
                dim("quadratic A_eq columns", n, i.a_eq.ncols())?;
                dim("quadratic b_eq", i.a_eq.nrows(), i.b_eq.len())?;
                dim("quadratic A_in columns", n, i.a_in.ncols())?;
                dim("quadratic b_in", i.a_in.nrows(), i.b_in.len())?;
            }
            Instance::Portfolio(i) => {
                dim("portfolio Q rows", n, i.q.nrows())?;
                dim("portfolio Q columns", n, i.q.ncols())?;
            }
            Instance::Sensing(i) => {
                fix_empty(&mut i.a, n);
                fix_empty(&mut i.c, n);
                dim("sensing A columns", n, i.a.ncols())?;
                dim("sensing b", i.a.nrows(), i.b.len())?;
                dim("sensing C columns", n, i.c.ncols())?;
                dim("sensing d", i.c.nrows(), i.d.len())?;
                dim("sensing xbar", n, i.xbar.len())?;
            }
            Instance::Logistic(i) => {
                dim("logistic labels", i.x.nrows(), i.y.len())?;
                if let Some(bad) = i.y.iter().find(|v| **v != 1.0 && **v != -1.0) {
                    return Err(SpoError::InvalidArgument(format!(
                        "logistic labels must be +1 or -1, found {bad}"
                    )));
                }
            }
        }
        if !(self.rho() > 0.0 && self.rho().is_finite()) {
            return Err(SpoError::InvalidArgument(format!(
                "rho must be positive and finite, got {}",
                self.rho()
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut inst: Instance = serde_json::from_str(text)?;
        inst.normalize()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// First 16 hex digits of the SHA-256 of the canonical (compact) JSON.
    pub fn instance_id(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_json()?.as_bytes());
        Ok(hex::encode(digest)[..16].to_string())
    }

    /// Named dense tables for CSV export.
    pub fn tables(&self) -> Vec<(&'static str, DMatrix<f64>)> {
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        let scalar = |s: f64| DMatrix::from_element(1, 1, s);
        match self {
            Instance::Quadratic(i) => vec![
                ("q", i.q.clone()),
                ("c", col(&i.c)),
                ("a_eq", i.a_eq.clone()),
                ("b_eq", col(&i.b_eq)),
                ("a_in", i.a_in.clone()),
                ("b_in", col(&i.b_in)),
            ],
            Instance::Portfolio(i) => vec![
                ("q", i.q.clone()),
                ("alpha", col(&i.alpha)),
                ("beta", scalar(i.beta)),
            ],
            Instance::Sensing(i) => vec![
                ("a", i.a.clone()),
                ("b", col(&i.b)),
                ("c", i.c.clone()),
                ("d", col(&i.d)),
                ("xbar", col(&i.xbar)),
            ],
            Instance::Logistic(i) => vec![("x", i.x.clone()), ("y", col(&i.y))],
        }
    }

    /// Writes one `<name>.csv` per table into `dir` (created if missing).
    pub fn export_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, m) in self.tables() {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(dir.join(format!("{name}.csv")))
                .map_err(csv_err)?;
            for r in 0..m.nrows() {
                w.write_record(m.row(r).iter().map(|v| format!("{v:e}")))
                    .map_err(csv_err)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> SpoError {
    SpoError::Io(std::io::Error::other(e))
}

/// `Q = BᵀB/n + 10⁻⁴ I` with `B` standard normal, `α ~ U[0.5, 1.5]`,
/// `β = 0.9·mean(α)` so that `x = e/n` is feasible.
pub fn gen_portfolio(n: usize, seed: u64) -> Result<PortfolioInstance> {
    if n < 2 {
        return Err(SpoError::InvalidArgument(format!(
            "portfolio needs n >= 2, got {n}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let b = DMatrix::from_fn(n, n, |_, _| rng.normal());
    let mut q = b.tr_mul(&b) / n as f64;
    for i in 0..n {
        q[(i, i)] += 1e-4;
    }
    let q = (&q + q.transpose()) * 0.5;
    let alpha = DVector::from_fn(n, |_, _| rng.uniform_in(0.5, 1.5));
    let beta = 0.9 * alpha.mean();
    Ok(PortfolioInstance {
        q,
        alpha,
        beta,
        rho: 1.0,
        seed: Some(seed),
    })
}

/// Stacked sensing matrix with i.i.d. `N(0, 1/(p+m))` entries, drawn column by
/// column; `x̄` has `s` standard-normal entries on a random support; rows are
/// split into `(A, b)` and `(C, d)` by a random permutation.
pub fn gen_sensing(n: usize, m: usize, p: usize, s: usize, seed: u64) -> Result<SensingInstance> {
    if s > n {
        return Err(SpoError::InvalidArgument(format!(
            "sparsity s = {s} exceeds n = {n}"
        )));
    }
    if p + m == 0 {
        return Err(SpoError::InvalidArgument("need p + m >= 1 measurements".into()));
    }
    let rows = p + m;
    let mut rng = SeededRng::new(seed);
    let scale = 1.0 / (rows as f64).sqrt();
    let mut sa = DMatrix::zeros(rows, n);
    for j in 0..n {
        for i in 0..rows {
            sa[(i, j)] = scale * rng.normal();
        }
    }
    let support = rng.permutation(n);
    let mut xbar = DVector::zeros(n);
    for &i in &support[..s] {
        xbar[i] = rng.normal();
    }
    let sb = &sa * &xbar;
    let order = rng.permutation(rows);
    let pick = |idx: &[usize]| {
        let mat = DMatrix::from_fn(idx.len(), n, |r, c| sa[(idx[r], c)]);
        let vec = DVector::from_fn(idx.len(), |r, _| sb[idx[r]]);
        (mat, vec)
    };
    let (a, b) = pick(&order[..m]);
    let (c, d) = pick(&order[m..]);
    Ok(SensingInstance {
        a,
        b,
        c,
        d,
        xbar,
        s,
        rho: 1.0,
        seed: Some(seed),
    })
}

/// Features `U[−1, 1]`; a true weight vector with `s` nonzero `N(0, 4)` entries;
/// labels drawn from the logistic model, so classes overlap.
pub fn gen_logistic(n: usize, m: usize, s: usize, seed: u64) -> Result<LogisticInstance> {
    if s > n {
        return Err(SpoError::InvalidArgument(format!(
            "sparsity s = {s} exceeds n = {n}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let x = DMatrix::from_fn(m, n, |_, _| rng.uniform_in(-1.0, 1.0));
    let support = rng.permutation(n);
    let mut w = DVector::zeros(n);
    for &i in &support[..s] {
        w[i] = 2.0 * rng.normal();
    }
    let t = &x * &w;
    let y = DVector::from_fn(m, |i, _| {
        if rng.uniform() < sigmoid(t[i]) {
            1.0
        } else {
            -1.0
        }
    });
    Ok(LogisticInstance {
        x,
        y,
        rho: 1.0,
        seed: Some(seed),
    })
}

/// `1 / (1 + e^{−u})` without overflow.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^u)` without overflow.
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// `f(w) = Σ log(1 + exp(−yᵢ wᵀxᵢ))`.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl LogisticObjective {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        SpoError::check_dim("logistic labels", x.nrows(), y.len())?;
        Ok(Self { x, y })
    }
}

impl Objective for LogisticObjective {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        let t = &self.x * w;
        t.iter().zip(self.y.iter()).map(|(ti, yi)| softplus(-yi * ti)).sum()
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let t = &self.x * w;
        let coef = DVector::from_fn(t.len(), |i, _| -self.y[i] * sigmoid(-self.y[i] * t[i]));
        self.x.tr_mul(&coef)
    }

    fn hessian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let t = &self.x * w;
        let weights = t.map(|ti| {
            let s = sigmoid(ti);
            s * (1.0 - s)
        });
        let scaled = DMatrix::from_fn(self.x.nrows(), self.x.ncols(), |i, j| self.x[(i, j)] * weights[i]);
        self.x.tr_mul(&scaled)
    }
}

pub fn logistic_oracles(inst: &LogisticInstance) -> Result<LogisticObjective> {
    LogisticObjective::new(inst.x.clone(), inst.y.clone())
}

fn parse_err(line: usize, message: impl Into<String>) -> SpoError {
    SpoError::Parse {
        line,
        message: message.into(),
    }
}

/// Reads `<label> <idx>:<val> ...` lines with 1-based, strictly ascending indices.
///
/// Labels `1`/`+1` map to `+1` and `0`/`−1` to `−1`. With `scale_to_unit`, each
/// column is divided by its largest magnitude.
pub fn parse_libsvm(reader: impl BufRead, scale_to_unit: bool) -> Result<LogisticInstance> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut n = 0;
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad label '{label_tok}'")))?;
        let label = if label == 1.0 {
            1.0
        } else if label == 0.0 || label == -1.0 {
            -1.0
        } else {
            return Err(parse_err(lineno, format!("label '{label_tok}' is not in {{-1, 0, 1}}")));
        };
        let mut entries = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected idx:val, got '{tok}'")))?;
            let i: usize = i
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad index '{i}'")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value '{v}'")))?;
            if i == 0 {
                return Err(parse_err(lineno, "indices are 1-based"));
            }
            if i <= last {
                return Err(parse_err(lineno, format!("index {i} does not ascend after {last}")));
            }
            last = i;
            entries.push((i - 1, v));
        }
        n = n.max(last);
        labels.push(label);
        rows.push(entries);
    }
    let mut x = DMatrix::zeros(rows.len(), n);
    for (r, entries) in rows.iter().enumerate() {
        for &(c, v) in entries {
            x[(r, c)] = v;
        }
    }
    if scale_to_unit {
        for mut col in x.column_iter_mut() {
            let m = col.amax();
            if m > 0.0 {
                col /= m;
            }
        }
    }
    Ok(LogisticInstance {
        x,
        y: DVector::from_vec(labels),
        rho: 1.0,
        seed: None,
    })
}

/// Inverse of [`parse_libsvm`] (zeros are omitted).
pub fn write_libsvm(inst: &LogisticInstance) -> String {
    let mut out = String::new();
    for r in 0..inst.x.nrows() {
        out.push_str(if inst.y[r] > 0.0 { "+1" } else { "-1" });
        for c in 0..inst.x.ncols() {
            let v = inst.x[(r, c)];
            if v != 0.0 {
                out.push_str(&format!(" {}:{}", c + 1, v));
            }
        }
        out.push('\n');
    }
    out
}

/// Problem in the form used by the solvers.
///
/// portfolio: `f = ½xᵀQx`, `h = eᵀx − 1`, `g = β − αᵀx`, `x ≥ 0`;
/// sensing: `f = ½‖Ax − b‖²`, `h = Cx − d`; logistic: unconstrained.
pub fn build_spo(instance: &Instance) -> Result<SpoProblem> {
    let mut inst = instance.clone();
    inst.normalize()?;
    let n = inst.n();
    let problem = match &inst {
        Instance::Quadratic(i) => SpoProblem::new(QuadraticObjective::new(i.q.clone(), i.c.clone(), 0.0)?, i.rho)?
            .with_equalities(AffineMap::new(i.a_eq.clone(), i.b_eq.clone())?)?
            .with_inequalities(AffineMap::new(i.a_in.clone(), i.b_in.clone())?)?
            .with_nonneg(i.nonneg),
        Instance::Portfolio(i) => {
            let f = QuadraticObjective::new(i.q.clone(), DVector::zeros(n), 0.0)?;
            let h = AffineMap::new(DMatrix::from_element(1, n, 1.0), DVector::from_element(1, 1.0))?;
            let g = AffineMap::new(-DMatrix::from_row_slice(1, n, i.alpha.as_slice()), DVector::from_element(1, -i.beta))?;
            SpoProblem::new(f, i.rho)?
                .with_equalities(h)?
                .with_inequalities(g)?
                .with_nonneg(true)
        }
        Instance::Sensing(i) => SpoProblem::new(LeastSquaresObjective::new(i.a.clone(), i.b.clone())?, i.rho)?
            .with_equalities(AffineMap::new(i.c.clone(), i.d.clone())?)?,
        Instance::Logistic(i) => {
            SpoProblem::from_objective(Arc::new(logistic_oracles(i)?), i.rho)?
        }
    };
    Ok(problem.with_family(inst.family()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;
    use approx::assert_relative_eq;

    #[test]
    fn rng_is_deterministic_and_in_range() {
        let mut a = SeededRng::new(9);
        let mut b = SeededRng::new(9);
        for _ in 0..100 {
            let u = a.uniform();
            assert!((0.0..1.0).contains(&u));
            assert_eq!(u.to_bits(), b.uniform().to_bits());
        }
        let mut p = SeededRng::new(3).permutation(20);
        p.sort();
        assert_eq!(p, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn normal_moments() {
        let mut rng = SeededRng::new(11);
        let v: Vec<f64> = (0..20000).map(|_| rng.normal()).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.03);
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn portfolio_examples() {
        let inst = gen_portfolio(10, 1).unwrap();
        assert!(min_eigenvalue(&inst.q) >= 1e-4 * (1.0 - 1e-8));
        let x = DVector::from_element(10, 0.1);
        assert!(inst.alpha.dot(&x) >= inst.beta);

        let small = gen_portfolio(2, 7).unwrap();
        assert!(small.alpha.dot(&DVector::from_element(2, 0.5)) >= small.beta);
        assert_eq!(gen_portfolio(10, 1).unwrap(), inst);
        assert!(gen_portfolio(1, 1).is_err());
    }

    #[test]
    fn sensing_shapes_and_identities() {
        let inst = gen_sensing(512, 128, 8, 32, 5).unwrap();
        assert_eq!(inst.a.shape(), (128, 512));
        assert_eq!(inst.c.shape(), (8, 512));
        assert_eq!(inst.xbar.iter().filter(|v| **v != 0.0).count(), 32);
        assert!((&inst.a * &inst.xbar - &inst.b).amax() < 1e-12);
        assert!((&inst.c * &inst.xbar - &inst.d).amax() < 1e-12);
        assert!(gen_sensing(4, 2, 1, 5, 0).is_err());
        assert!(gen_sensing(4, 0, 0, 1, 0).is_err());
    }

    #[test]
    fn sensing_column_variance() {
        let (m, p) = (96, 8);
        let inst = gen_sensing(64, m, p, 4, 2).unwrap();
        let target = 1.0 / (m + p) as f64;
        let mut stacked = DMatrix::zeros(m + p, 64);
        stacked.view_mut((0, 0), (m, 64)).copy_from(&inst.a);
        stacked.view_mut((m, 0), (p, 64)).copy_from(&inst.c);
        let var = stacked.iter().map(|v| v * v).sum::<f64>() / stacked.len() as f64;
        assert!((var / target - 1.0).abs() < 0.2, "variance {var} vs {target}");
    }

    #[test]
    fn logistic_values() {
        let inst = gen_logistic(5, 30, 2, 4).unwrap();
        let f = logistic_oracles(&inst).unwrap();
        assert_relative_eq!(f.value(&DVector::zeros(5)), 30.0 * 2f64.ln(), epsilon = 1e-12);

        let one = LogisticObjective::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0)).unwrap();
        assert!(one.value(&DVector::from_element(1, 50.0)) < 1e-20);
        assert!(one.value(&DVector::from_element(1, -800.0)).is_finite());
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let inst = gen_logistic(6, 25, 3, 8).unwrap();
        let f = logistic_oracles(&inst).unwrap();
        let w = DVector::from_fn(6, |i, _| 0.3 * (i as f64) - 0.7);
        let g = f.gradient(&w);
        let h = 1e-6;
        for i in 0..6 {
            let mut e = DVector::zeros(6);
            e[i] = h;
            let fd = (f.value(&(&w + &e)) - f.value(&(&w - &e))) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0));
        }
    }

    #[test]
    fn libsvm_examples() {
        let text = "+1 1:0.5 3:-1\n-1 2:2\n";
        let inst = parse_libsvm(text.as_bytes(), false).unwrap();
        assert_eq!(inst.x, DMatrix::from_row_slice(2, 3, &[0.5, 0.0, -1.0, 0.0, 2.0, 0.0]));
        assert_eq!(inst.y, DVector::from_vec(vec![1.0, -1.0]));

        let scaled = parse_libsvm(text.as_bytes(), true).unwrap();
        assert_eq!(scaled.x.column(1).into_owned(), DVector::from_vec(vec![0.0, 1.0]));

        match parse_libsvm("+1 2:1 1:1\n".as_bytes(), false) {
            Err(SpoError::Parse { line: 1, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_libsvm("+1 1:1\n2 1:1\n".as_bytes(), false).is_err());
        assert!(parse_libsvm("+1 1-1\n".as_bytes(), false).is_err());
    }

    #[test]
    fn libsvm_round_trip() {
        let inst = gen_logistic(7, 12, 3, 1).unwrap();
        let again = parse_libsvm(write_libsvm(&inst).as_bytes(), false).unwrap();
        assert_eq!(again.y, inst.y);
        // Trailing all-zero columns cannot be recovered from the text format.
        assert_eq!(again.x, inst.x.columns(0, again.x.ncols()).into_owned());
    }

    #[test]
    fn build_spo_mappings() {
        let s = build_spo(&Instance::Sensing(gen_sensing(64, 32, 4, 8, 1).unwrap())).unwrap();
        assert_eq!((s.n(), s.m(), s.p(), s.nonneg()), (64, 0, 4, false));
        let p = build_spo(&Instance::Portfolio(gen_portfolio(5, 1).unwrap())).unwrap();
        assert_eq!((p.m(), p.p(), p.nonneg()), (1, 1, true));
        let l = build_spo(&Instance::Logistic(gen_logistic(4, 10, 2, 1).unwrap())).unwrap();
        assert_eq!((l.m(), l.p()), (0, 0));
    }

    #[test]
    fn instance_json_round_trip_and_id() {
        let inst = Instance::Sensing(gen_sensing(6, 3, 0, 2, 4).unwrap());
        let json = inst.to_json().unwrap();
        assert!(json.starts_with("{\"kind\":\"sensing\""));
        let back = Instance::from_json(&json).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.instance_id().unwrap(), inst.instance_id().unwrap());
        assert_eq!(inst.instance_id().unwrap().len(), 16);
    }

    #[test]
    fn csv_export_writes_tables() {
        let dir = tempfile::tempdir().unwrap();
        Instance::Portfolio(gen_portfolio(3, 2).unwrap())
            .export_csv(dir.path())
            .unwrap();
        let q = std::fs::read_to_string(dir.path().join("q.csv")).unwrap();
        assert_eq!(q.lines().count(), 3);
        assert!(dir.path().join("beta.csv").exists());
    }
}
