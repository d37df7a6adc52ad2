//! Reference solutions and the discrete `L²` error.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::netparam::{FourierBasis, JetOrder, ParamVector, Parametrization};
use crate::quadrature::QuadratureRule;

/// Default number of Fourier modes of the heat reference.
pub const DEFAULT_HEAT_K_MAX: usize = 32;

/// Exact transport solution `u(t, x) = Φ(θ₀)(x + t)` at `points`.
pub fn transport_reference(
    model: &dyn Parametrization,
    theta0: &ParamVector,
    t: f64,
    points: &[f64],
) -> Result<DVector<f64>> {
    let shifted: Vec<f64> = points.iter().map(|x| x + t).collect();
    Ok(model.eval(theta0, &shifted, JetOrder::Value)?.values)
}

/// `L²` projection of node samples onto `{1, cos kx, sin kx}_{k ≤ k_max}`,
/// in the coefficient layout of [`FourierBasis`].
pub fn fourier_projection(
    rule: &QuadratureRule,
    samples: &[f64],
    k_max: usize,
) -> Result<ParamVector> {
    check_len("samples", rule.len(), samples.len())?;
    if 4 * k_max > rule.len() {
        return Err(Error::Aliasing {
            k_max,
            nodes: rule.len(),
        });
    }
    let mut c = ParamVector::zeros(2 * k_max + 1);
    for ((&x, &w), &u) in rule.nodes().iter().zip(rule.weights()).zip(samples) {
        let wu = w * u;
        c[0] += wu / (2.0 * PI);
        for k in 1..=k_max {
            let (s, co) = (k as f64 * x).sin_cos();
            c[2 * k - 1] += wu * co / PI;
            c[2 * k] += wu * s / PI;
        }
    }
    Ok(c)
}

/// Heat equation solution at time `t`: the projection of `u₀` (samples on
/// `rule`) with mode `k` damped by `e^{−k²t}`, evaluated at `points`.
pub fn heat_reference(
    rule: &QuadratureRule,
    u0: &[f64],
    t: f64,
    k_max: usize,
    points: &[f64],
) -> Result<DVector<f64>> {
    if !(t >= 0.0) {
        return Err(Error::Config(format!(
            "heat reference needs t ≥ 0, got {t}"
        )));
    }
    let mut c = fourier_projection(rule, u0, k_max)?;
    for q in 1..c.len() {
        let k = FourierBasis::wavenumber(q) as f64;
        c[q] *= (-k * k * t).exp();
    }
    Ok(FourierBasis::new(k_max)
        .eval(&c, points, JetOrder::Value)?
        .values)
}

/// `‖u − ref‖` in the quadrature norm.
pub fn l2_error(rule: &QuadratureRule, u: &[f64], reference: &[f64]) -> Result<f64> {
    check_len("reference samples", u.len(), reference.len())?;
    let diff: Vec<f64> = u.iter().zip(reference).map(|(a, b)| a - b).collect();
    rule.norm(&diff)
}
