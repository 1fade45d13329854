//! NCP functions `φ` with `φ(a, b) = 0 ⇔ a ≥ 0, b ≥ 0, ab = 0`, and fixed
//! selections from their B-subdifferentials.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Radius `√(a² + b²)` under which the Fischer–Burmeister pair is treated as `(0, 0)`.
pub const DEFAULT_DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NcpKind {
    #[default]
    FischerBurmeister,
    Minimum,
}

impl fmt::Display for NcpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NcpKind::FischerBurmeister => "fb",
            NcpKind::Minimum => "min",
        })
    }
}

impl FromStr for NcpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fb" | "fischer-burmeister" | "fischer_burmeister" => Ok(NcpKind::FischerBurmeister),
            "min" | "minimum" => Ok(NcpKind::Minimum),
            other => Err(format!("unknown NCP function '{other}' (expected fb or min)")),
        }
    }
}

/// Partial derivatives `(∂φ/∂a, ∂φ/∂b)` of one B-subdifferential element.
///
/// For Fischer–Burmeister, `(d_a + 1)² + (d_b + 1)² ≤ 1` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsubRow {
    pub d_a: f64,
    pub d_b: f64,
}

impl BsubRow {
    pub const fn new(d_a: f64, d_b: f64) -> Self {
        Self { d_a, d_b }
    }
}

pub fn phi(kind: NcpKind, a: f64, b: f64) -> f64 {
    match kind {
        NcpKind::FischerBurmeister => a.hypot(b) - a - b,
        NcpKind::Minimum => a.min(b),
    }
}

/// Limit of `∇φ_FB` along `(a, b) − t·(1, 1)` as `t ↓ 0` at the origin.
const FB_ORIGIN: f64 = -std::f64::consts::FRAC_1_SQRT_2 - 1.0;

pub fn phi_fb_bsub(a: f64, b: f64, degenerate_tol: f64) -> BsubRow {
    let r = a.hypot(b);
    if r > degenerate_tol {
        BsubRow::new(a / r - 1.0, b / r - 1.0)
    } else {
        BsubRow::new(FB_ORIGIN, FB_ORIGIN)
    }
}

/// Ties select the first argument.
pub fn phi_min_bsub(a: f64, b: f64) -> BsubRow {
    if b < a {
        BsubRow::new(0.0, 1.0)
    } else {
        BsubRow::new(1.0, 0.0)
    }
}

pub fn phi_bsub(kind: NcpKind, a: f64, b: f64, degenerate_tol: f64) -> BsubRow {
    match kind {
        NcpKind::FischerBurmeister => phi_fb_bsub(a, b, degenerate_tol),
        NcpKind::Minimum => phi_min_bsub(a, b),
    }
}

/// Row of `∂_B` of `x ↦ φ_FB(−g_j(x), λ_j)`: the `x` part and the `λ_j` entry.
///
/// At a degenerate pair the limit is taken along `(x, λ) − t·(e, e)`, where
/// `s = ∇g_jᵀe` is the first-order change of `g_j` in that direction.
pub fn phi_fb_bsub_constraint(
    g_val: f64,
    g_grad: &DVector<f64>,
    lambda_j: f64,
    degenerate_tol: f64,
) -> (DVector<f64>, f64) {
    let r = g_val.hypot(lambda_j);
    if r > degenerate_tol {
        (g_grad * (g_val / r + 1.0), lambda_j / r - 1.0)
    } else {
        let s = g_grad.sum();
        let q = s.hypot(1.0);
        (g_grad * (1.0 - s / q), -1.0 / q - 1.0)
    }
}

/// Same as [`phi_fb_bsub_constraint`] for either NCP function.
pub fn phi_bsub_constraint(
    kind: NcpKind,
    g_val: f64,
    g_grad: &DVector<f64>,
    lambda_j: f64,
    degenerate_tol: f64,
) -> (DVector<f64>, f64) {
    match kind {
        NcpKind::FischerBurmeister => {
            phi_fb_bsub_constraint(g_val, g_grad, lambda_j, degenerate_tol)
        }
        NcpKind::Minimum => {
            let row = phi_min_bsub(-g_val, lambda_j);
            (g_grad * (-row.d_a), row.d_b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn phi_examples() {
        assert_eq!(phi(NcpKind::FischerBurmeister, 0.0, 0.0), 0.0);
        assert_relative_eq!(phi(NcpKind::FischerBurmeister, 3.0, 4.0), -2.0);
        assert_eq!(phi(NcpKind::Minimum, 1.0, 0.0), 0.0);
    }

    #[test]
    fn fb_bsub_examples() {
        let o = phi_fb_bsub(0.0, 0.0, DEFAULT_DEGENERATE_TOL);
        assert_relative_eq!(o.d_a, -S - 1.0);
        assert_relative_eq!(o.d_b, -S - 1.0);
        assert_relative_eq!(o.d_a, -1.7071067811865475);

        let r = phi_fb_bsub(3.0, 4.0, DEFAULT_DEGENERATE_TOL);
        assert_relative_eq!(r.d_a, -0.4, epsilon = 1e-15);
        assert_relative_eq!(r.d_b, -0.2, epsilon = 1e-15);

        assert_eq!(phi_fb_bsub(2.5, 0.0, DEFAULT_DEGENERATE_TOL), BsubRow::new(0.0, -1.0));
    }

    #[test]
    fn fb_constraint_examples() {
        let tol = DEFAULT_DEGENERATE_TOL;
        let (row, dl) = phi_fb_bsub_constraint(-1.0, &DVector::from_vec(vec![1.0, 0.0]), 0.0, tol);
        assert_eq!(row, DVector::from_vec(vec![0.0, 0.0]));
        assert_eq!(dl, -1.0);

        let (row, dl) = phi_fb_bsub_constraint(0.0, &DVector::from_vec(vec![1.0, 1.0]), 2.0, tol);
        assert_eq!(row, DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(dl, 0.0);

        let (row, dl) = phi_fb_bsub_constraint(0.0, &DVector::from_vec(vec![1.0, 0.0]), 0.0, tol);
        assert_relative_eq!(row[0], 1.0 - S);
        assert_eq!(row[1], 0.0);
        assert_relative_eq!(dl, -S - 1.0);
    }

    #[test]
    fn min_bsub_examples() {
        assert_eq!(phi_min_bsub(0.0, 1.0), BsubRow::new(1.0, 0.0));
        assert_eq!(phi_min_bsub(2.0, 0.0), BsubRow::new(0.0, 1.0));
        assert_eq!(phi_min_bsub(1.0, 1.0), BsubRow::new(1.0, 0.0));
    }

    #[test]
    fn sign_property_on_grid() {
        for kind in [NcpKind::FischerBurmeister, NcpKind::Minimum] {
            for i in -8..=8 {
                for j in -8..=8 {
                    let (a, b) = (i as f64 * 0.25, j as f64 * 0.25);
                    let complementary = a >= 0.0 && b >= 0.0 && a * b == 0.0;
                    assert_eq!(phi(kind, a, b) == 0.0, complementary, "{kind} at ({a}, {b})");
                }
            }
        }
    }

    #[test]
    fn degenerate_selection_lies_on_circle() {
        let r = phi_fb_bsub(0.0, 0.0, DEFAULT_DEGENERATE_TOL);
        assert_relative_eq!((r.d_a + 1.0).powi(2) + (r.d_b + 1.0).powi(2), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn min_constraint_row_uses_minus_gradient() {
        let grad = DVector::from_vec(vec![2.0, -1.0]);
        // −g = 0.5 < λ = 1 selects the first argument.
        let (row, dl) = phi_bsub_constraint(NcpKind::Minimum, -0.5, &grad, 1.0, 0.0);
        assert_eq!(row, -grad);
        assert_eq!(dl, 0.0);
    }

    proptest! {
        #[test]
        fn fb_bsub_matches_finite_differences(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            prop_assume!(a.hypot(b) > 1e-3);
            let h = 1e-6;
            let fd_a = (phi(NcpKind::FischerBurmeister, a + h, b) - phi(NcpKind::FischerBurmeister, a - h, b)) / (2.0 * h);
            let fd_b = (phi(NcpKind::FischerBurmeister, a, b + h) - phi(NcpKind::FischerBurmeister, a, b - h)) / (2.0 * h);
            let r = phi_fb_bsub(a, b, DEFAULT_DEGENERATE_TOL);
            prop_assert!((r.d_a - fd_a).abs() < 1e-6);
            prop_assert!((r.d_b - fd_b).abs() < 1e-6);
        }

        #[test]
        fn fb_bsub_inside_unit_circle(a in -1e3f64..1e3, b in -1e3f64..1e3, zero in any::<bool>()) {
            let (a, b) = if zero { (0.0, 0.0) } else { (a, b) };
            let r = phi_fb_bsub(a, b, DEFAULT_DEGENERATE_TOL);
            prop_assert!((r.d_a + 1.0).powi(2) + (r.d_b + 1.0).powi(2) <= 1.0 + 1e-12);
        }

        #[test]
        fn constraint_row_matches_chain_rule(g in -2.0f64..2.0, l in -2.0f64..2.0, g0 in -1.0f64..1.0, g1 in -1.0f64..1.0) {
            prop_assume!(g.hypot(l) > 1e-3);
            let grad = DVector::from_vec(vec![g0, g1]);
            let (row, dl) = phi_fb_bsub_constraint(g, &grad, l, DEFAULT_DEGENERATE_TOL);
            let b = phi_fb_bsub(-g, l, DEFAULT_DEGENERATE_TOL);
            prop_assert!((&row + &grad * b.d_a).amax() < 1e-12);
            prop_assert!((dl - b.d_b).abs() < 1e-12);
        }
    }
}
