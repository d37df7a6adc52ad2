//! Regularized parametric implicit time integrators.
//!
//! The parameters `θ(t)` of a nonlinear approximation `u(t) = Φ(θ(t))` are
//! advanced by implicit Euler, implicit midpoint and implicit Runge-Kutta
//! steps, each solved approximately by a few regularized Gauss-Newton
//! iterations in parameter space.

// `!(a <= b)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod epscontrol;
pub mod error;
pub mod initfit;
pub mod integrate;
pub mod netparam;
pub mod quadrature;
pub mod refsol;
pub mod regsolve;
pub mod semilinear;
pub mod steppers;

pub use error::{Error, Result};
