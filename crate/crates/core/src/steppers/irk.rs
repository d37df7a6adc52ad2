//! Parametric implicit Runge-Kutta steps with decoupled stage iterations.
//!
//! With `Sᵢ = −(Uᵢ − u₀)/h + Σⱼ aᵢⱼ f(Uⱼ)` and `Σᵢ = (Θᵢ − θ₀)/h`, the
//! linearized stage system is diagonalized by `𝒜⁻¹ = TΛT⁻¹`. Stage `i` then
//! solves a complex regularized problem with `Bᵢ = λᵢΦ′(θ₀) − h(AΦ)′(θ₀)`,
//! `rᵢ = −λᵢŜᵢ` and `σᵢ = Σ̂ᵢ`, where `Ŝ = T⁻¹S`, `Σ̂ = T⁻¹Σ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{
    divergence, validate_step, GnTrace, GridUpdate, SpectralTableau, StageRole, StepContext,
    StepResult,
};
use crate::error::{Error, Result};
use crate::netparam::{JetOrder, ParamVector};
use crate::regsolve::RegularizedSystem;
use crate::semilinear::Problem;

fn to_complex(v: &DVector<f64>) -> DVector<Complex64> {
    v.map(|x| Complex64::new(x, 0.0))
}

/// `Σⱼ m[(i, j)] vⱼ` for every row `i` of `m`.
fn mix(m: &DMatrix<Complex64>, v: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    (0..m.nrows())
        .map(|i| {
            let mut acc = DVector::zeros(v[0].len());
            for (j, vj) in v.iter().enumerate() {
                acc.axpy(m[(i, j)], vj, Complex64::new(1.0, 0.0));
            }
            acc
        })
        .collect()
}

fn numeric_to_divergence(e: Error, name: &str, trace: &GnTrace) -> Error {
    match e {
        Error::Numeric(_) => divergence(name, trace),
        e => e,
    }
}

pub fn step_irk(
    ctx: &StepContext<'_>,
    theta0: &ParamVector,
    spec: &SpectralTableau,
    h: f64,
    eps: f64,
    iterations: usize,
    problem: &Problem,
) -> Result<StepResult> {
    validate_step(h, eps, iterations)?;
    ctx.model.check_theta(theta0)?;
    let name = "implicit Runge-Kutta";
    let opts = &ctx.options;
    let s = spec.stages();
    let a = &spec.tableau.a;
    let nodes = ctx.rule.nodes();
    let order = problem.a_order();

    let (jet0, jac0) = ctx.model.eval_with_jacobian(theta0, nodes, order)?;
    let j0 = jac0.j0.map(|x| Complex64::new(x, 0.0));
    let haj = problem
        .apply_a_jacobian(&jac0)?
        .map(|x| Complex64::new(h * x, 0.0));
    let solve_stage: Vec<bool> = spec
        .roles
        .iter()
        .map(|r| !(opts.exploit_conjugate_pairs && *r == StageRole::PairFollower))
        .collect();
    let mut systems = Vec::with_capacity(s);
    for (i, &solve) in solve_stage.iter().enumerate() {
        systems.push(if solve {
            let b = &j0 * spec.lambdas[i] - &haj;
            Some(RegularizedSystem::new(ctx.rule, &b, eps, opts.weights)?)
        } else {
            None
        });
    }

    let mut trace = GnTrace::new(h, eps);
    let mut stages: Vec<ParamVector> = vec![theta0.clone(); s];
    let mut jets = vec![jet0.clone(); s];
    for k in 0..iterations {
        if k > 0 {
            for i in 0..s {
                jets[i] = ctx.model.eval(&stages[i], nodes, order)?;
            }
        }
        let f: Vec<DVector<f64>> = jets
            .iter()
            .map(|j| problem.apply_f(j))
            .collect::<Result<_>>()?;
        let mut big_s = Vec::with_capacity(s);
        let mut big_sigma = Vec::with_capacity(s);
        for i in 0..s {
            let mut si = -(&jets[i].values - &jet0.values) / h;
            for j in 0..s {
                si.axpy(a[(i, j)], &f[j], 1.0);
            }
            if !si.iter().all(|v| v.is_finite()) {
                return Err(divergence(name, &trace));
            }
            big_s.push(to_complex(&si));
            big_sigma.push(to_complex(&((&*stages[i] - &**theta0) / h)));
        }
        let s_hat = mix(&spec.t_inv, &big_s);
        let sigma_hat = mix(&spec.t_inv, &big_sigma);

        let mut steps: Vec<DVector<Complex64>> = Vec::with_capacity(s);
        let mut stage_deltas = Vec::with_capacity(s);
        for i in 0..s {
            match &systems[i] {
                Some(sys) => {
                    let r = &s_hat[i] * (-spec.lambdas[i]);
                    let sol = sys
                        .solve(&r, &sigma_hat[i], opts.damping)
                        .map_err(|e| numeric_to_divergence(e, name, &trace))?;
                    stage_deltas.push(sol.delta);
                    steps.push(sol.step);
                }
                None => {
                    stage_deltas.push(stage_deltas[i - 1]);
                    steps.push(steps[i - 1].map(|z| z.conj()));
                }
            }
        }
        let delta = stage_deltas.iter().map(|d| d * d).sum::<f64>().sqrt();

        let increments = mix(&spec.t, &steps);
        let mut incr_sq = 0.0;
        for (stage, inc) in stages.iter_mut().zip(&increments) {
            let imag = inc.iter().map(|z| z.im.abs()).fold(0.0, f64::max) * h;
            trace.max_discarded_imag = trace.max_discarded_imag.max(imag);
            let real = inc.map(|z| z.re * h);
            incr_sq += real.norm_squared();
            **stage += &real;
        }
        trace.stage_deltas.push(stage_deltas);
        trace.record(delta, incr_sq.sqrt());
        if trace.diverging(opts.divergence_factor) {
            return Err(divergence(name, &trace));
        }
        if delta < opts.early_exit {
            break;
        }
    }
    if !stages.iter().all(|t| t.is_finite()) {
        return Err(divergence(name, &trace));
    }

    let update = match opts.grid_update {
        GridUpdate::Auto if spec.tableau.stiffly_accurate => GridUpdate::LastStage,
        GridUpdate::Auto => GridUpdate::Fit,
        u => u,
    };
    let theta_next = match update {
        GridUpdate::LastStage => {
            if !spec.tableau.stiffly_accurate {
                return Err(Error::Config(
                    "last-stage grid update needs a stiffly accurate method".into(),
                ));
            }
            stages[s - 1].clone()
        }
        GridUpdate::Linear => linear_update(theta0, &stages, &spec.w),
        _ => {
            let k_fit = opts.grid_fit_iterations.unwrap_or(iterations);
            let (theta, fit) = grid_update_gauss(ctx, theta0, &stages, &spec.w, h, eps, k_fit)
                .map_err(|e| match e {
                    Error::Divergence { .. } => divergence("grid fit", &trace),
                    e => e,
                })?;
            trace.fit_deltas = fit;
            theta
        }
    };
    Ok(StepResult {
        theta_next,
        trace,
        stage_params: stages,
    })
}

fn linear_update(theta0: &ParamVector, stages: &[ParamVector], w: &DVector<f64>) -> ParamVector {
    let mut out = (**theta0).clone();
    for (stage, &wi) in stages.iter().zip(w.iter()) {
        out.axpy(wi, &(&**stage - &**theta0), 1.0);
    }
    out.into()
}

/// Grid parameters for a method that is not stiffly accurate: `K_fit`
/// regularized Gauss-Newton iterations fitting `Φ(θ₁)` to
/// `ỹ₁ = u₀ + Σ wᵢ(Φ(Θᵢ) − u₀)`, started from `θ₀ + Σ wᵢ(Θᵢ − θ₀)`.
///
/// Returns the parameters and the per-iteration fit defects.
#[allow(clippy::too_many_arguments)]
pub fn grid_update_gauss(
    ctx: &StepContext<'_>,
    theta0: &ParamVector,
    stages: &[ParamVector],
    w: &DVector<f64>,
    h: f64,
    eps: f64,
    iterations: usize,
) -> Result<(ParamVector, Vec<f64>)> {
    validate_step(h, eps, iterations)?;
    if stages.len() != w.len() {
        return Err(Error::Shape {
            what: "grid weights",
            expected: stages.len(),
            got: w.len(),
        });
    }
    let opts = &ctx.options;
    let nodes = ctx.rule.nodes();
    let u0 = ctx.model.eval(theta0, nodes, JetOrder::Value)?.values;
    let mut target = u0.clone();
    for (stage, &wi) in stages.iter().zip(w.iter()) {
        let ui = ctx.model.eval(stage, nodes, JetOrder::Value)?.values;
        target.axpy(wi, &(ui - &u0), 1.0);
    }

    let mut theta = linear_update(theta0, stages, w);
    let mut deltas = Vec::with_capacity(iterations);
    let (jet, jac) = ctx
        .model
        .eval_with_jacobian(&theta, nodes, JetOrder::Value)?;
    let mut values = jet.values;
    let mut system = RegularizedSystem::new(ctx.rule, &jac.j0, eps, opts.weights)?;
    let fail = |deltas: &Vec<f64>| Error::Divergence {
        context: "grid fit".into(),
        trace: Box::new(GnTrace {
            h,
            eps,
            fit_deltas: deltas.clone(),
            ..GnTrace::default()
        }),
    };
    for k in 0..iterations {
        if k > 0 {
            if opts.refresh_jacobian {
                let (jet, jac) = ctx
                    .model
                    .eval_with_jacobian(&theta, nodes, JetOrder::Value)?;
                values = jet.values;
                system = RegularizedSystem::new(ctx.rule, &jac.j0, eps, opts.weights)?;
            } else {
                values = ctx.model.eval(&theta, nodes, JetOrder::Value)?.values;
            }
        }
        let r = (&values - &target) / h;
        let sigma = (&*theta - &**theta0) / h;
        let sol = match system.solve(&r, &sigma, opts.damping) {
            Ok(sol) => sol,
            Err(Error::Numeric(_)) => return Err(fail(&deltas)),
            Err(e) => return Err(e),
        };
        *theta += &(sol.step * h);
        deltas.push(sol.delta);
        if !(sol.delta <= opts.divergence_factor * deltas[0]) {
            return Err(fail(&deltas));
        }
        if sol.delta < opts.early_exit {
            break;
        }
    }
    if !theta.is_finite() {
        return Err(fail(&deltas));
    }
    Ok((theta, deltas))
}
