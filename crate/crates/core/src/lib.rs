//! Lagrange-Newton solvers for ℓ0-penalized nonlinear programs.
//!
//! The problem family handled here is
//!
//! ```text
//!     min_x  f(x) + ρ‖x‖₀   s.t.  g(x) ≤ 0,  h(x) = 0   (optionally x ≥ 0)
//! ```
//!
//! It is attacked through the smooth complementarity reformulation
//! `min f(x) + ρ/2 Σ yᵢ(yᵢ − 2)  s.t.  x ∘ y = 0`, whose KKT system is solved by
//! a nonsmooth Newton method. Three KKT operators are available (see
//! [`kkt::OperatorKind`]): the full system, a reduced one with `y` eliminated,
//! and a fully complementary variant for nonnegative variables.
//!
//! Layout:
//! - [`model`]: problem oracles, primal-dual points, index sets, the S-stationarity merit.
//! - [`ncp`]: NCP functions and B-subdifferential selections.
//! - [`kkt`]: KKT residuals and Jacobians, multiplier recovery, variable splitting.
//! - [`newton`]: the Newton driver.
//! - [`analysis`]: constraint-qualification, second-order and regularity checkers,
//!   plus a brute-force support-enumeration oracle.
//! - [`presolve`]: ℓ1-surrogate initialization (FISTA and a dense interior-point QP).
//! - [`apps`]: portfolio, compressive-sensing and logistic-regression instances.
//! - [`cli`]: the `spo` command-line tool.

pub mod analysis;
pub mod apps;
pub mod cli;
mod error;
pub mod kkt;
pub mod linalg;
pub mod model;
pub mod ncp;
pub mod newton;
pub mod presolve;
pub mod serde_dense;

pub use error::{Result, SpoError};
pub use kkt::OperatorKind;
pub use model::{IndexSets, PrimalDualPoint, SolveReport, SolveStatus, SpoProblem};
pub use ncp::NcpKind;
pub use newton::{solve, NewtonOptions};
