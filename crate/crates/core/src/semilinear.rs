//! Semilinear right-hand sides `f(y) = Ay + g(y)` on the periodic domain.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::netparam::{JacobianBatch, JetBatch, JetOrder};

/// The linear part `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// `A = ∂ₓ`, i.e. `∂ₜy − ∂ₓy = 0`.
    Transport,
    /// `A = ∂ₓₓ`.
    Heat,
    /// `A = 0`; with `g = 0` this is the trivial flow, useful for debugging.
    Zero,
}

impl OperatorKind {
    /// Spatial derivative order of `A`.
    pub fn order(self) -> JetOrder {
        match self {
            OperatorKind::Transport => JetOrder::First,
            OperatorKind::Heat => JetOrder::Second,
            OperatorKind::Zero => JetOrder::Value,
        }
    }
}

/// Pointwise nonlinearity `g`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Nonlinearity {
    #[default]
    Zero,
    /// `g(v) = amplitude · sin(v)`, Lipschitz constant `|amplitude|`.
    Sine { amplitude: f64 },
}

impl Nonlinearity {
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Sine { amplitude } => amplitude * v.sin(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Sine { amplitude } => amplitude.abs(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Nonlinearity::Zero)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Problem {
    pub operator: OperatorKind,
    pub g: Nonlinearity,
}

impl Problem {
    pub fn transport() -> Self {
        Self {
            operator: OperatorKind::Transport,
            g: Nonlinearity::Zero,
        }
    }

    pub fn heat() -> Self {
        Self {
            operator: OperatorKind::Heat,
            g: Nonlinearity::Zero,
        }
    }

    pub fn zero() -> Self {
        Self {
            operator: OperatorKind::Zero,
            g: Nonlinearity::Zero,
        }
    }

    pub fn with_nonlinearity(mut self, g: Nonlinearity) -> Self {
        self.g = g;
        self
    }

    pub fn a_order(&self) -> JetOrder {
        self.operator.order()
    }

    pub fn is_linear(&self) -> bool {
        self.g.is_zero()
    }

    /// `A u` from the jet of `u`.
    pub fn apply_a(&self, jet: &JetBatch) -> Result<DVector<f64>> {
        let need = self.a_order();
        if jet.max_order() < need {
            return Err(Error::Contract(format!(
                "{} needs jets of order {}, got {}",
                self,
                need.as_usize(),
                jet.max_order().as_usize()
            )));
        }
        Ok(match self.operator {
            OperatorKind::Zero => DVector::zeros(jet.len()),
            _ => jet.component(need).unwrap().clone(),
        })
    }

    /// `f(u) = Au + g(u)` at the jet's points.
    pub fn apply_f(&self, jet: &JetBatch) -> Result<DVector<f64>> {
        let mut out = self.apply_a(jet)?;
        if !self.g.is_zero() {
            for (o, v) in out.iter_mut().zip(jet.values.iter()) {
                *o += self.g.apply(*v);
            }
        }
        Ok(out)
    }

    /// `(AΦ)′(θ)`: the Jacobian of the `A`-applied parametrization.
    pub fn apply_a_jacobian(&self, jac: &JacobianBatch) -> Result<DMatrix<f64>> {
        let need = self.a_order();
        if jac.max_order() < need {
            return Err(Error::Contract(format!(
                "{} needs Jacobians of order {}, got {}",
                self,
                need.as_usize(),
                jac.max_order().as_usize()
            )));
        }
        Ok(match self.operator {
            OperatorKind::Zero => DMatrix::zeros(jac.j0.nrows(), jac.j0.ncols()),
            _ => jac.component(need).unwrap().clone(),
        })
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.operator {
            OperatorKind::Transport => "transport",
            OperatorKind::Heat => "heat",
            OperatorKind::Zero => "zero",
        };
        f.write_str(name)
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "transport" => Ok(Self::transport()),
            "heat" => Ok(Self::heat()),
            "zero" => Ok(Self::zero()),
            other => Err(Error::Config(format!("unknown problem `{other}`"))),
        }
    }
}
