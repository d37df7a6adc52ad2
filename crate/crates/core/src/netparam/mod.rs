//! Parametrization maps `θ ↦ Φ(θ)` into functions on the periodic domain.
//!
//! Two families are provided: the periodic tanh network ([`MlpArchitecture`])
//! and a linear real Fourier basis ([`FourierBasis`]) that serves as an
//! oracle, since Gauss-Newton on a linear map is exact after one iteration.

mod checkpoint;
mod fourier;
mod mlp;

use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};

pub use checkpoint::Checkpoint;
pub use fourier::FourierBasis;
pub use mlp::MlpArchitecture;

use crate::error::{check_len, Error, Result};

/// Parameter vector `θ ∈ ℝ^Q` with the Euclidean norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(DVector<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(DVector::zeros(len))
    }

    pub fn from_vec(entries: Vec<f64>) -> Self {
        Self(DVector::from_vec(entries))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl From<DVector<f64>> for ParamVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ParamVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }
}

/// Highest spatial derivative carried along with the values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JetOrder {
    Value = 0,
    First = 1,
    Second = 2,
}

impl JetOrder {
    pub fn from_usize(order: usize) -> Result<Self> {
        match order {
            0 => Ok(Self::Value),
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            _ => Err(Error::Config(format!("jet order {order} not in 0..=2"))),
        }
    }

    pub fn as_usize(self) -> usize {
        self as usize
    }
}

/// Values and spatial derivatives of `Φ(θ)` at a batch of points.
#[derive(Clone, Debug, PartialEq)]
pub struct JetBatch {
    pub values: DVector<f64>,
    pub d1: Option<DVector<f64>>,
    pub d2: Option<DVector<f64>>,
}

impl JetBatch {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_order(&self) -> JetOrder {
        match (&self.d1, &self.d2) {
            (Some(_), Some(_)) => JetOrder::Second,
            (Some(_), None) => JetOrder::First,
            _ => JetOrder::Value,
        }
    }

    /// Component `k` of the jet (0 = values).
    pub fn component(&self, k: JetOrder) -> Option<&DVector<f64>> {
        match k {
            JetOrder::Value => Some(&self.values),
            JetOrder::First => self.d1.as_ref(),
            JetOrder::Second => self.d2.as_ref(),
        }
    }

    /// Componentwise affine combination `α·self + β·other`, truncated to the
    /// lower of the two orders.
    pub fn combine(&self, alpha: f64, other: &JetBatch, beta: f64) -> Result<JetBatch> {
        check_len("jet batch", self.len(), other.len())?;
        let lin = |a: &DVector<f64>, b: &DVector<f64>| a * alpha + b * beta;
        Ok(JetBatch {
            values: lin(&self.values, &other.values),
            d1: match (&self.d1, &other.d1) {
                (Some(a), Some(b)) => Some(lin(a, b)),
                _ => None,
            },
            d2: match (&self.d2, &other.d2) {
                (Some(a), Some(b)) => Some(lin(a, b)),
                _ => None,
            },
        })
    }
}

/// Parameter Jacobians of the jet components, one row per point.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianBatch {
    pub j0: DMatrix<f64>,
    pub j1: Option<DMatrix<f64>>,
    pub j2: Option<DMatrix<f64>>,
}

impl JacobianBatch {
    pub fn max_order(&self) -> JetOrder {
        match (&self.j1, &self.j2) {
            (Some(_), Some(_)) => JetOrder::Second,
            (Some(_), None) => JetOrder::First,
            _ => JetOrder::Value,
        }
    }

    pub fn component(&self, k: JetOrder) -> Option<&DMatrix<f64>> {
        match k {
            JetOrder::Value => Some(&self.j0),
            JetOrder::First => self.j1.as_ref(),
            JetOrder::Second => self.j2.as_ref(),
        }
    }
}

/// A differentiable map from parameters to functions on `[-π, π]`.
pub trait Parametrization: Send + Sync {
    fn param_count(&self) -> usize;

    fn eval(&self, theta: &ParamVector, points: &[f64], order: JetOrder) -> Result<JetBatch>;

    fn jacobian(
        &self,
        theta: &ParamVector,
        points: &[f64],
        order: JetOrder,
    ) -> Result<JacobianBatch>;

    fn eval_with_jacobian(
        &self,
        theta: &ParamVector,
        points: &[f64],
        order: JetOrder,
    ) -> Result<(JetBatch, JacobianBatch)> {
        Ok((
            self.eval(theta, points, order)?,
            self.jacobian(theta, points, order)?,
        ))
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        check_len("parameter vector", self.param_count(), theta.len())
    }
}

/// Either supported parametrization, as stored in checkpoints and configs.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Mlp(MlpArchitecture),
    Fourier(FourierBasis),
}

impl Parametrization for Model {
    fn param_count(&self) -> usize {
        match self {
            Model::Mlp(m) => m.param_count(),
            Model::Fourier(f) => f.param_count(),
        }
    }

    fn eval(&self, theta: &ParamVector, points: &[f64], order: JetOrder) -> Result<JetBatch> {
        match self {
            Model::Mlp(m) => m.eval(theta, points, order),
            Model::Fourier(f) => f.eval(theta, points, order),
        }
    }

    fn jacobian(
        &self,
        theta: &ParamVector,
        points: &[f64],
        order: JetOrder,
    ) -> Result<JacobianBatch> {
        match self {
            Model::Mlp(m) => m.jacobian(theta, points, order),
            Model::Fourier(f) => f.jacobian(theta, points, order),
        }
    }

    fn eval_with_jacobian(
        &self,
        theta: &ParamVector,
        points: &[f64],
        order: JetOrder,
    ) -> Result<(JetBatch, JacobianBatch)> {
        match self {
            Model::Mlp(m) => m.eval_with_jacobian(theta, points, order),
            Model::Fourier(f) => f.eval_with_jacobian(theta, points, order),
        }
    }
}
