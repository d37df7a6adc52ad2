//! Parametric implicit Euler and implicit midpoint steps.
//!
//! Both share one iteration: with `c = 1` (Euler) or `c = ½` (midpoint),
//! `B = (I − c·hA)Φ′`, `rᵏ = (u₁ᵏ − u₀)/h − f(c·u₁ᵏ + (1 − c)·u₀)` and
//! `σᵏ = (θ₁ᵏ − θ₀)/h`.

use nalgebra::{DMatrix, DVector};

use super::{divergence, validate_step, GnTrace, StepContext, StepResult};
use crate::error::{Error, Result};
use crate::netparam::{JacobianBatch, ParamVector};
use crate::regsolve::RegularizedSystem;
use crate::semilinear::Problem;

pub fn step_implicit_euler(
    ctx: &StepContext<'_>,
    theta0: &ParamVector,
    h: f64,
    eps: f64,
    iterations: usize,
    problem: &Problem,
) -> Result<StepResult> {
    one_stage_step(
        ctx,
        theta0,
        h,
        eps,
        iterations,
        problem,
        1.0,
        "implicit Euler",
    )
}

pub fn step_midpoint(
    ctx: &StepContext<'_>,
    theta0: &ParamVector,
    h: f64,
    eps: f64,
    iterations: usize,
    problem: &Problem,
) -> Result<StepResult> {
    one_stage_step(
        ctx,
        theta0,
        h,
        eps,
        iterations,
        problem,
        0.5,
        "implicit midpoint",
    )
}

fn iteration_matrix(problem: &Problem, jac: &JacobianBatch, ch: f64) -> Result<DMatrix<f64>> {
    let aj = problem.apply_a_jacobian(jac)?;
    Ok(&jac.j0 - aj * ch)
}

#[allow(clippy::too_many_arguments)]
fn one_stage_step(
    ctx: &StepContext<'_>,
    theta0: &ParamVector,
    h: f64,
    eps: f64,
    iterations: usize,
    problem: &Problem,
    c: f64,
    name: &str,
) -> Result<StepResult> {
    validate_step(h, eps, iterations)?;
    let opts = &ctx.options;
    let nodes = ctx.rule.nodes();
    let order = problem.a_order();
    let (jet0, jac0) = ctx.model.eval_with_jacobian(theta0, nodes, order)?;
    let mut system = RegularizedSystem::new(
        ctx.rule,
        &iteration_matrix(problem, &jac0, c * h)?,
        eps,
        opts.weights,
    )?;

    let mut trace = GnTrace::new(h, eps);
    let mut theta = theta0.clone();
    let mut jet = jet0.clone();
    for k in 0..iterations {
        if k > 0 {
            if opts.refresh_jacobian {
                let (j, jac) = ctx.model.eval_with_jacobian(&theta, nodes, order)?;
                jet = j;
                system = RegularizedSystem::new(
                    ctx.rule,
                    &iteration_matrix(problem, &jac, c * h)?,
                    eps,
                    opts.weights,
                )?;
            } else {
                jet = ctx.model.eval(&theta, nodes, order)?;
            }
        }
        let f_arg = if c == 1.0 {
            jet.clone()
        } else {
            jet.combine(c, &jet0, 1.0 - c)?
        };
        let r: DVector<f64> = (&jet.values - &jet0.values) / h - problem.apply_f(&f_arg)?;
        let sigma: DVector<f64> = (&*theta - &**theta0) / h;
        if !r.iter().all(|v| v.is_finite()) {
            return Err(divergence(name, &trace));
        }
        let sol = match system.solve(&r, &sigma, opts.damping) {
            Ok(s) => s,
            Err(Error::Numeric(_)) => return Err(divergence(name, &trace)),
            Err(e) => return Err(e),
        };
        let increment = &sol.step * h;
        *theta += &increment;
        trace.record(sol.delta, increment.norm());
        if trace.diverging(opts.divergence_factor) {
            return Err(divergence(name, &trace));
        }
        if sol.delta < opts.early_exit {
            break;
        }
    }
    if !theta.is_finite() {
        return Err(divergence(name, &trace));
    }
    Ok(StepResult {
        theta_next: theta,
        trace,
        stage_params: Vec::new(),
    })
}
