//! Linear real Fourier parametrization `Φ(θ) = θ₀ + Σ_k (θ_{2k-1} cos kx + θ_{2k} sin kx)`.

use nalgebra::{DMatrix, DVector};

use super::{JacobianBatch, JetBatch, JetOrder, ParamVector, Parametrization};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FourierBasis {
    pub k_max: usize,
}

impl FourierBasis {
    pub fn new(k_max: usize) -> Self {
        Self { k_max }
    }

    /// Basis for a coefficient vector of the given (odd) length.
    pub fn for_len(len: usize) -> Result<Self> {
        if len.is_multiple_of(2) {
            return Err(Error::Shape {
                what: "Fourier coefficient vector (must be odd)",
                expected: len + 1,
                got: len,
            });
        }
        Ok(Self {
            k_max: (len - 1) / 2,
        })
    }

    /// Wavenumber of coefficient `q` (0 for the constant mode).
    pub fn wavenumber(q: usize) -> usize {
        q.div_ceil(2)
    }

    /// `[value, ∂ₓ, ∂ₓₓ]` of basis function `q` at `x`.
    fn basis_jet(q: usize, x: f64) -> [f64; 3] {
        if q == 0 {
            return [1.0, 0.0, 0.0];
        }
        let k = Self::wavenumber(q) as f64;
        let (s, c) = (k * x).sin_cos();
        if q % 2 == 1 {
            [c, -k * s, -k * k * c]
        } else {
            [s, k * c, -k * k * s]
        }
    }

    fn matrices(&self, points: &[f64], order: JetOrder) -> [DMatrix<f64>; 3] {
        let q = self.param_count();
        let m = points.len();
        let mut mats = [
            DMatrix::zeros(m, q),
            DMatrix::zeros(m, q),
            DMatrix::zeros(m, q),
        ];
        for (i, &x) in points.iter().enumerate() {
            for col in 0..q {
                let jet = Self::basis_jet(col, x);
                for k in 0..=order.as_usize() {
                    mats[k][(i, col)] = jet[k];
                }
            }
        }
        mats
    }
}

impl Parametrization for FourierBasis {
    fn param_count(&self) -> usize {
        2 * self.k_max + 1
    }

    fn eval(&self, theta: &ParamVector, points: &[f64], order: JetOrder) -> Result<JetBatch> {
        self.check_theta(theta)?;
        let [m0, m1, m2] = self.matrices(points, order);
        let apply = |m: &DMatrix<f64>| -> DVector<f64> { m * &**theta };
        Ok(JetBatch {
            values: apply(&m0),
            d1: (order >= JetOrder::First).then(|| apply(&m1)),
            d2: (order >= JetOrder::Second).then(|| apply(&m2)),
        })
    }

    fn jacobian(
        &self,
        theta: &ParamVector,
        points: &[f64],
        order: JetOrder,
    ) -> Result<JacobianBatch> {
        self.check_theta(theta)?;
        let [j0, j1, j2] = self.matrices(points, order);
        Ok(JacobianBatch {
            j0,
            j1: (order >= JetOrder::First).then_some(j1),
            j2: (order >= JetOrder::Second).then_some(j2),
        })
    }
}
