//! Parametric implicit time steppers.
//!
//! Each step approximately solves a regularized nonlinear least-squares
//! problem for the new parameters by `K` Gauss-Newton iterations; the
//! iteration matrices use the Jacobian at the step's starting parameters
//! unless [`StepOptions::refresh_jacobian`] is set.

mod galerkin;
mod irk;
mod onestage;
mod tableau;

use std::fmt;
use std::str::FromStr;

pub use galerkin::galerkin_step;
pub use irk::{grid_update_gauss, step_irk};
pub use onestage::{step_implicit_euler, step_midpoint};
pub use tableau::{ButcherTableau, SpectralTableau, StageRole};

use crate::error::{Error, Result};
use crate::netparam::{ParamVector, Parametrization};
use crate::quadrature::QuadratureRule;
use crate::regsolve::RegWeights;
use crate::semilinear::Problem;

/// Iterations stop once the defect falls below this level.
pub const DEFAULT_EARLY_EXIT: f64 = 1e-14;

/// A step is declared divergent once `δᵏ` exceeds this multiple of its
/// first defect `δ⁰`.
pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 10.0;

/// Default guard constant `c` in `hδ ≤ cε²`.
pub const DEFAULT_GUARD_CONSTANT: f64 = 10.0;

/// How the grid value `θ₁` is obtained from the final stages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GridUpdate {
    /// Last stage for stiffly accurate methods, otherwise [`GridUpdate::Fit`].
    #[default]
    Auto,
    LastStage,
    /// `θ₁ = θ₀ + Σ wᵢ(Θᵢ − θ₀)`, ignoring the nonlinearity of `Φ`.
    Linear,
    /// Regularized Gauss-Newton fit of `Φ(θ₁)` to `u₀ + Σ wᵢ(Uᵢ − u₀)`.
    Fit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    pub weights: RegWeights,
    /// Factor `λ ∈ (0, 1]` applied to every Gauss-Newton increment.
    pub damping: f64,
    /// Re-evaluate the Jacobian at every iterate. Only used by the one-stage
    /// methods and the grid fit: the stage decoupling of the Runge-Kutta
    /// iteration needs one common Jacobian.
    pub refresh_jacobian: bool,
    pub early_exit: f64,
    /// Growth of `δᵏ` over `δ⁰` that counts as divergence.
    pub divergence_factor: f64,
    /// Solve one stage per conjugate eigenvalue pair and conjugate the result.
    pub exploit_conjugate_pairs: bool,
    pub grid_update: GridUpdate,
    /// Iterations of the grid fit; `None` uses the step's `K`.
    pub grid_fit_iterations: Option<usize>,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            weights: RegWeights::default(),
            damping: 1.0,
            refresh_jacobian: false,
            early_exit: DEFAULT_EARLY_EXIT,
            divergence_factor: DEFAULT_DIVERGENCE_FACTOR,
            exploit_conjugate_pairs: true,
            grid_update: GridUpdate::Auto,
            grid_fit_iterations: None,
        }
    }
}

/// Everything a step needs besides the state: parametrization, quadrature
/// and solver options.
#[derive(Clone, Copy)]
pub struct StepContext<'a> {
    pub model: &'a dyn Parametrization,
    pub rule: &'a QuadratureRule,
    pub options: StepOptions,
}

impl<'a> StepContext<'a> {
    pub fn new(model: &'a dyn Parametrization, rule: &'a QuadratureRule) -> Self {
        Self {
            model,
            rule,
            options: StepOptions::default(),
        }
    }

    pub fn with_options(mut self, options: StepOptions) -> Self {
        self.options = options;
        self
    }
}

/// Per-iteration record of one time step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GnTrace {
    pub h: f64,
    pub eps: f64,
    /// `δᵏ` per iteration.
    pub deltas: Vec<f64>,
    /// `δᵢᵏ` per iteration and stage (empty for one-stage methods).
    pub stage_deltas: Vec<Vec<f64>>,
    /// `‖Δθᵏ‖` (for multistage methods the norm over all stages).
    pub increment_norms: Vec<f64>,
    /// `hδᵏ/ε²`.
    pub guard_ratios: Vec<f64>,
    /// Largest imaginary part discarded when mapping stage increments back.
    pub max_discarded_imag: f64,
    /// Defects of the grid fit, if one was run.
    pub fit_deltas: Vec<f64>,
}

impl GnTrace {
    fn new(h: f64, eps: f64) -> Self {
        Self {
            h,
            eps,
            ..Self::default()
        }
    }

    fn record(&mut self, delta: f64, increment_norm: f64) {
        self.deltas.push(delta);
        self.increment_norms.push(increment_norm);
        self.guard_ratios
            .push(self.h * delta / (self.eps * self.eps));
    }

    /// Whether the latest defect grew past `factor · δ⁰`.
    fn diverging(&self, factor: f64) -> bool {
        !(self.final_delta() <= factor * self.initial_delta())
    }

    pub fn iterations(&self) -> usize {
        self.deltas.len()
    }

    pub fn final_delta(&self) -> f64 {
        self.deltas.last().copied().unwrap_or(0.0)
    }

    pub fn initial_delta(&self) -> f64 {
        self.deltas.first().copied().unwrap_or(0.0)
    }

    pub fn max_guard_ratio(&self) -> f64 {
        self.guard_ratios.iter().copied().fold(0.0, f64::max)
    }

    /// Number of iterations violating `hδ ≤ cε²`.
    pub fn guard_violations(&self, c: f64) -> usize {
        self.guard_ratios.iter().filter(|&&g| g > c).count()
    }

    pub fn total_increment(&self) -> f64 {
        self.increment_norms.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub theta_next: ParamVector,
    pub trace: GnTrace,
    /// Final stage parameters `Θᵢ` (multistage methods only).
    pub stage_params: Vec<ParamVector>,
}

/// The integrators offered by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Euler,
    Midpoint,
    Gauss2,
    Radau2,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Euler,
        Method::Midpoint,
        Method::Gauss2,
        Method::Radau2,
    ];

    /// Classical order on smooth solutions.
    pub fn order(self) -> u32 {
        match self {
            Method::Euler => 1,
            Method::Midpoint => 2,
            Method::Radau2 => 3,
            Method::Gauss2 => 4,
        }
    }

    pub fn tableau(self) -> ButcherTableau {
        match self {
            Method::Euler => ButcherTableau::implicit_euler(),
            Method::Midpoint => ButcherTableau::implicit_midpoint(),
            Method::Gauss2 => ButcherTableau::gauss2(),
            Method::Radau2 => ButcherTableau::radau2(),
        }
    }

    pub fn is_multistage(self) -> bool {
        matches!(self, Method::Gauss2 | Method::Radau2)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Euler => "euler",
            Method::Midpoint => "midpoint",
            Method::Gauss2 => "gauss2",
            Method::Radau2 => "radau2",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// A method ready to step: one-stage methods need nothing precomputed, the
/// Runge-Kutta methods carry their spectral data.
#[derive(Clone, Debug)]
pub enum Stepper {
    Euler,
    Midpoint,
    Irk(Box<SpectralTableau>),
}

impl Stepper {
    pub fn new(method: Method) -> Result<Self> {
        Ok(match method {
            Method::Euler => Stepper::Euler,
            Method::Midpoint => Stepper::Midpoint,
            m => Stepper::Irk(Box::new(SpectralTableau::build(m.tableau())?)),
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        ctx: &StepContext<'_>,
        theta0: &ParamVector,
        h: f64,
        eps: f64,
        iterations: usize,
        problem: &Problem,
    ) -> Result<StepResult> {
        match self {
            Stepper::Euler => step_implicit_euler(ctx, theta0, h, eps, iterations, problem),
            Stepper::Midpoint => step_midpoint(ctx, theta0, h, eps, iterations, problem),
            Stepper::Irk(spec) => step_irk(ctx, theta0, spec, h, eps, iterations, problem),
        }
    }
}

fn validate_step(h: f64, eps: f64, iterations: usize) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!(
            "step size must be positive, got {h}"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!(
            "regularization parameter must be positive, got {eps}"
        )));
    }
    if iterations == 0 {
        return Err(Error::Config(
            "at least one Gauss-Newton iteration is required".into(),
        ));
    }
    Ok(())
}

fn divergence(context: &str, trace: &GnTrace) -> Error {
    Error::Divergence {
        context: context.to_string(),
        trace: Box::new(trace.clone()),
    }
}
