//! Exact Runge-Kutta steps for Fourier coefficients of linear problems.
//!
//! Each mode evolves independently, so one step multiplies it by the
//! stability function: `c ↦ R(−ihk)c` for transport with `c = aₖ + ibₖ`,
//! `aₖ ↦ R(−hk²)aₖ` (same for `bₖ`) for the heat equation.

use num_complex::Complex64;

use super::ButcherTableau;
use crate::error::{Error, Result};
use crate::netparam::{FourierBasis, ParamVector};
use crate::semilinear::{OperatorKind, Problem};

/// One step of `tableau` applied to the Galerkin system in the layout
/// `[c₀, a₁, b₁, a₂, b₂, …]` of [`FourierBasis`].
pub fn galerkin_step(
    tableau: &ButcherTableau,
    coeffs: &ParamVector,
    h: f64,
    problem: &Problem,
) -> Result<ParamVector> {
    if !problem.is_linear() {
        return Err(Error::Unsupported(
            "the Galerkin oracle covers linear problems only".into(),
        ));
    }
    let k_max = FourierBasis::for_len(coeffs.len())?.k_max;
    let mut out = coeffs.clone();
    for k in 1..=k_max {
        let kf = k as f64;
        let (ia, ib) = (2 * k - 1, 2 * k);
        match problem.operator {
            OperatorKind::Zero => {}
            OperatorKind::Heat => {
                let r = tableau.stability(Complex64::new(-h * kf * kf, 0.0))?.re;
                out[ia] *= r;
                out[ib] *= r;
            }
            OperatorKind::Transport => {
                let r = tableau.stability(Complex64::new(0.0, -h * kf))?;
                let c = r * Complex64::new(coeffs[ia], coeffs[ib]);
                out[ia] = c.re;
                out[ib] = c.im;
            }
        }
    }
    Ok(out)
}
