//! Initial parameters `θ₀` with `Φ(θ₀) ≈ y₀`: an Adam prefit of the
//! quadrature misfit, then a fictitious-time flow integrated by a
//! regularized explicit RK4 method.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::netparam::{JetOrder, MlpArchitecture, Model, ParamVector, Parametrization};
use crate::quadrature::QuadratureRule;
use crate::regsolve::{RegWeights, RegularizedSystem};

#[derive(Clone, Debug, PartialEq)]
pub enum TargetFunction {
    /// `e^{−4x²}`.
    Gaussian,
    /// `1 − |x|` on `|x| ≤ ½`, zero elsewhere. Jumps by ½ at `x = ±½`.
    Hat,
    /// The continuous hat `max(0, 1 − 2|x|)`, kinks at `0` and `±½`.
    ContinuousHat,
    /// Periodic piecewise-linear interpolation of samples at increasing
    /// abscissae in `[−π, π)`.
    Samples { x: Vec<f64>, y: Vec<f64> },
    /// An existing parametrized function.
    Network { model: Model, theta: ParamVector },
}

impl TargetFunction {
    pub fn name(&self) -> &'static str {
        match self {
            TargetFunction::Gaussian => "gaussian",
            TargetFunction::Hat => "hat",
            TargetFunction::ContinuousHat => "hat_c0",
            TargetFunction::Samples { .. } => "samples",
            TargetFunction::Network { .. } => "network",
        }
    }

    pub fn eval(&self, points: &[f64]) -> Result<Vec<f64>> {
        match self {
            TargetFunction::Gaussian => Ok(points.iter().map(|x| (-4.0 * x * x).exp()).collect()),
            TargetFunction::Hat => Ok(points
                .iter()
                .map(|x| if x.abs() <= 0.5 { 1.0 - x.abs() } else { 0.0 })
                .collect()),
            TargetFunction::ContinuousHat => Ok(points
                .iter()
                .map(|x| (1.0 - 2.0 * x.abs()).max(0.0))
                .collect()),
            TargetFunction::Samples { x, y } => {
                check_len("target samples", x.len(), y.len())?;
                if x.is_empty() || x.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config(
                        "sample abscissae must be nonempty and increasing".into(),
                    ));
                }
                Ok(points
                    .iter()
                    .map(|&p| interpolate_periodic(x, y, p))
                    .collect())
            }
            TargetFunction::Network { model, theta } => Ok(model
                .eval(theta, points, JetOrder::Value)?
                .values
                .as_slice()
                .to_vec()),
        }
    }
}

fn interpolate_periodic(x: &[f64], y: &[f64], p: f64) -> f64 {
    let n = x.len();
    let p = (p + PI).rem_euclid(2.0 * PI) - PI;
    // Segment [x[i], x[i+1]] with wrap-around past the last sample.
    let i = x.partition_point(|&xi| xi <= p);
    let (x0, y0, x1, y1) = match i {
        0 => (x[n - 1] - 2.0 * PI, y[n - 1], x[0], y[0]),
        i if i == n => (x[n - 1], y[n - 1], x[0] + 2.0 * PI, y[0]),
        i => (x[i - 1], y[i - 1], x[i], y[i]),
    };
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (p - x0) / (x1 - x0)
}

/// Random starting parameters: weights uniform in `±1/√fan_in`, biases
/// zero, input phases uniform in `[0, 2π)`.
pub fn init_params(arch: &MlpArchitecture, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = ParamVector::zeros(arch.param_count());
    for b in theta.iter_mut().take(arch.input_width) {
        *b = rng.random_range(0.0..2.0 * PI);
    }
    for (range, fan_in) in arch.weight_blocks() {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for q in range {
            theta[q] = rng.random_range(-bound..bound);
        }
    }
    theta
}

/// `½‖Φ(θ) − y₀‖²` in the quadrature norm.
pub fn misfit(
    model: &dyn Parametrization,
    rule: &QuadratureRule,
    theta: &ParamVector,
    target: &[f64],
) -> Result<f64> {
    check_len("target samples", rule.len(), target.len())?;
    let u = model.eval(theta, rule.nodes(), JetOrder::Value)?.values;
    let diff: Vec<f64> = u.iter().zip(target).map(|(a, b)| a - b).collect();
    Ok(0.5 * rule.norm(&diff)?.powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// The learning rate is multiplied by `decay_factor` every `decay_every` iterations.
    pub decay_every: usize,
    pub decay_factor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            learning_rate: 1e-2,
            decay_every: 1000,
            decay_factor: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub theta: ParamVector,
    /// Misfit before each iteration (prefit) or after each pass (flow).
    pub history: Vec<f64>,
    pub final_misfit: f64,
}

/// Adam on `½‖Φ(θ) − y₀‖²`; returns the last iterate.
pub fn adam_prefit(
    model: &dyn Parametrization,
    rule: &QuadratureRule,
    target: &TargetFunction,
    theta_init: &ParamVector,
    config: &AdamConfig,
) -> Result<FitOutcome> {
    if config.iterations == 0 {
        return Err(Error::Config("Adam needs at least one iteration".into()));
    }
    model.check_theta(theta_init)?;
    let y = DVector::from_vec(target.eval(rule.nodes())?);
    let w = DVector::from_column_slice(rule.weights());
    let q = model.param_count();
    let mut theta = theta_init.clone();
    let (mut m, mut v) = (DVector::<f64>::zeros(q), DVector::<f64>::zeros(q));
    let mut history = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let (jet, jac) = model.eval_with_jacobian(&theta, rule.nodes(), JetOrder::Value)?;
        let res = jet.values - &y;
        let wres = res.component_mul(&w);
        let loss = 0.5 * res.dot(&wres);
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite prefit loss at iteration {it}"
            )));
        }
        history.push(loss);
        let g = jac.j0.tr_mul(&wres);
        let t = (it + 1) as i32;
        let lr = config.learning_rate
            * config
                .decay_factor
                .powi((it / config.decay_every.max(1)) as i32);
        m = m * config.beta1 + &g * (1.0 - config.beta1);
        v = v * config.beta2 + g.component_mul(&g) * (1.0 - config.beta2);
        let bc1 = 1.0 - config.beta1.powi(t);
        let bc2 = 1.0 - config.beta2.powi(t);
        for k in 0..q {
            theta[k] -= lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + config.epsilon);
        }
    }
    let final_misfit = misfit(model, rule, &theta, y.as_slice())?;
    if !final_misfit.is_finite() {
        return Err(Error::Numeric("non-finite misfit after prefit".into()));
    }
    Ok(FitOutcome {
        theta,
        history,
        final_misfit,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub steps: usize,
    pub eps: f64,
    /// Total number of passes; each restarts from the previous result.
    pub passes: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            eps: 1e-4,
            passes: 2,
        }
    }
}

/// Integrates `θ̇ = argmin ‖Φ′(θ)θ̇ − (y₀ − Φ(θ̃₀))‖² + ε²‖θ̇‖²` over
/// `τ ∈ [0, 1]` with RK4, so that `Φ(θ(τ))` follows the straight line from
/// `Φ(θ̃₀)` to `y₀`.
pub fn fictitious_flow_fit(
    model: &dyn Parametrization,
    rule: &QuadratureRule,
    target: &TargetFunction,
    theta_start: &ParamVector,
    config: &FlowConfig,
) -> Result<FitOutcome> {
    if config.steps == 0 || config.passes == 0 {
        return Err(Error::Config(
            "the fitting flow needs at least one step and one pass".into(),
        ));
    }
    model.check_theta(theta_start)?;
    let y = DVector::from_vec(target.eval(rule.nodes())?);
    let nodes = rule.nodes();
    let dtau = 1.0 / config.steps as f64;
    let zero = DVector::zeros(model.param_count());
    let mut theta = theta_start.clone();
    let mut history = Vec::with_capacity(config.passes);
    for pass in 0..config.passes {
        let rhs = &y - model.eval(&theta, nodes, JetOrder::Value)?.values;
        let r = -rhs;
        let velocity = |th: &ParamVector| -> Result<DVector<f64>> {
            let jac = model.jacobian(th, nodes, JetOrder::Value)?;
            let sys =
                RegularizedSystem::new(rule, &jac.j0, config.eps, RegWeights::increment_only())?;
            Ok(sys.solve(&r, &zero, 1.0)?.x)
        };
        let advance = |theta: &ParamVector| -> Result<ParamVector> {
            let k1 = velocity(theta)?;
            let k2 = velocity(&(&**theta + &k1 * (0.5 * dtau)).into())?;
            let k3 = velocity(&(&**theta + &k2 * (0.5 * dtau)).into())?;
            let k4 = velocity(&(&**theta + &k3 * dtau).into())?;
            Ok((&**theta + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dtau / 6.0)).into())
        };
        for step in 0..config.steps {
            theta = advance(&theta).map_err(|e| {
                Error::Numeric(format!(
                    "fitting flow failed in pass {pass}, step {step}: {e}"
                ))
            })?;
            if !theta.is_finite() {
                return Err(Error::Numeric(format!(
                    "fitting flow diverged in pass {pass}, step {step}"
                )));
            }
        }
        history.push(misfit(model, rule, &theta, y.as_slice())?);
    }
    let final_misfit = *history.last().unwrap();
    Ok(FitOutcome {
        theta,
        history,
        final_misfit,
    })
}

#[derive(Clone, Debug)]
pub struct InitialFit {
    pub prefit: FitOutcome,
    pub flow: FitOutcome,
}

/// Prefit from [`init_params`] followed by the fitting flow.
pub fn fit_initial(
    arch: &MlpArchitecture,
    rule: &QuadratureRule,
    target: &TargetFunction,
    seed: u64,
    adam: &AdamConfig,
    flow: &FlowConfig,
) -> Result<InitialFit> {
    let theta = init_params(arch, seed);
    let prefit = adam_prefit(arch, rule, target, &theta, adam)?;
    let flow = fictitious_flow_fit(arch, rule, target, &prefit.theta, flow)?;
    Ok(InitialFit { prefit, flow })
}
