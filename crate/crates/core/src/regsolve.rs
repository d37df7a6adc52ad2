//! Regularized linear least squares in the quadrature inner product.
//!
//! Minimizes over the parameter velocity `x = Δθ/h`
//!
//! ```text
//! ‖B x + r‖² + w₁ε²‖x + σ‖² + w₂ε²‖x‖²
//! ```
//!
//! via the shifted normal equations
//! `(B*WB + (w₁+w₂)ε² I) x = −(B*W r + w₁ε² σ)`, `W` the quadrature weights.
//! The same kernel handles real and complex (Runge-Kutta stage) problems.

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::quadrature::QuadratureRule;

/// Weights of the two Tikhonov terms. The default `(½, 1)` penalizes both
/// the distance from the step's starting parameters and the increment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegWeights {
    pub w1: f64,
    pub w2: f64,
}

impl Default for RegWeights {
    fn default() -> Self {
        Self { w1: 0.5, w2: 1.0 }
    }
}

impl RegWeights {
    /// Plain Tikhonov regularization of `x` alone.
    pub fn increment_only() -> Self {
        Self { w1: 0.0, w2: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w1 >= 0.0 && self.w2 >= 0.0 && self.w1.is_finite() && self.w2.is_finite()) {
            return Err(Error::Config(format!(
                "regularization weights must be nonnegative, got {self:?}"
            )));
        }
        if self.w1 + self.w2 <= 0.0 {
            return Err(Error::Config(
                "at least one regularization weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegLsqSolution<T: ComplexField<RealField = f64>> {
    /// Exact minimizer.
    pub x: DVector<T>,
    /// `damping · x`, the increment actually applied.
    pub step: DVector<T>,
    /// Square root of the attained minimum, evaluated at `x`.
    pub delta: f64,
    /// `‖B x + r‖` at `x`.
    pub residual_norm: f64,
}

/// A factored regularized system, reusable for several right-hand sides
/// with the same `B` and `ε` (the Gauss-Newton iterations of one step).
#[derive(Clone, Debug)]
pub struct RegularizedSystem<T: ComplexField<RealField = f64>> {
    sqrt_w: DVector<f64>,
    bw: DMatrix<T>,
    chol: Cholesky<T, Dyn>,
    eps: f64,
    weights: RegWeights,
}

fn all_finite<T: ComplexField<RealField = f64>>(v: impl IntoIterator<Item = T>) -> bool {
    v.into_iter().all(|z| z.modulus().is_finite())
}

fn norm_sq<T: ComplexField<RealField = f64>>(v: &DVector<T>) -> f64 {
    v.iter().map(|z| z.clone().modulus_squared()).sum()
}

impl<T: ComplexField<RealField = f64>> RegularizedSystem<T> {
    pub fn new(
        rule: &QuadratureRule,
        b: &DMatrix<T>,
        eps: f64,
        weights: RegWeights,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!(
                "regularization parameter must be positive, got {eps}"
            )));
        }
        weights.validate()?;
        check_len("rows of B", rule.len(), b.nrows())?;
        if !all_finite(b.iter().cloned()) {
            return Err(Error::Numeric("non-finite entry in B".into()));
        }
        let sqrt_w = rule.sqrt_weights();
        let mut bw = b.clone();
        for (mut row, &s) in bw.row_iter_mut().zip(sqrt_w.iter()) {
            row *= T::from_real(s);
        }
        let mut gram = bw.adjoint() * &bw;
        let shift = (weights.w1 + weights.w2) * eps * eps;
        for i in 0..gram.nrows() {
            gram[(i, i)] += T::from_real(shift);
        }
        let chol = Cholesky::new(gram)
            .ok_or_else(|| Error::Numeric("shifted Gram matrix is not positive definite".into()))?;
        Ok(Self {
            sqrt_w,
            bw,
            chol,
            eps,
            weights,
        })
    }

    pub fn param_count(&self) -> usize {
        self.bw.ncols()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn solve(
        &self,
        r: &DVector<T>,
        sigma: &DVector<T>,
        damping: f64,
    ) -> Result<RegLsqSolution<T>> {
        check_len("residual samples", self.sqrt_w.len(), r.len())?;
        check_len("sigma", self.param_count(), sigma.len())?;
        if !(damping > 0.0 && damping <= 1.0) {
            return Err(Error::Config(format!(
                "damping must lie in (0, 1], got {damping}"
            )));
        }
        if !all_finite(r.iter().cloned()) || !all_finite(sigma.iter().cloned()) {
            return Err(Error::Numeric("non-finite residual or sigma".into()));
        }
        let RegWeights { w1, w2 } = self.weights;
        let eps2 = self.eps * self.eps;
        let rw = DVector::from_iterator(
            r.len(),
            r.iter()
                .zip(self.sqrt_w.iter())
                .map(|(v, &s)| v.clone() * T::from_real(s)),
        );
        let mut rhs = self.bw.ad_mul(&rw);
        rhs.axpy(T::from_real(w1 * eps2), sigma, T::one());
        rhs.neg_mut();
        let x = self.chol.solve(&rhs);
        if !all_finite(x.iter().cloned()) {
            return Err(Error::Numeric(
                "non-finite regularized least-squares solution".into(),
            ));
        }
        let residual = &self.bw * &x + &rw;
        let res2 = norm_sq(&residual);
        let delta2 = res2 + w1 * eps2 * norm_sq(&(&x + sigma)) + w2 * eps2 * norm_sq(&x);
        let step = &x * T::from_real(damping);
        Ok(RegLsqSolution {
            x,
            step,
            delta: delta2.sqrt(),
            residual_norm: res2.sqrt(),
        })
    }
}

/// One-shot form of [`RegularizedSystem::new`] followed by
/// [`RegularizedSystem::solve`].
pub fn solve_regularized<T: ComplexField<RealField = f64>>(
    rule: &QuadratureRule,
    b: &DMatrix<T>,
    r: &DVector<T>,
    sigma: &DVector<T>,
    eps: f64,
    weights: RegWeights,
    damping: f64,
) -> Result<RegLsqSolution<T>> {
    RegularizedSystem::new(rule, b, eps, weights)?.solve(r, sigma, damping)
}
