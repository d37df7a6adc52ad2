//! The experiment subcommands.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use stiffparam::initfit::fit_initial;
use stiffparam::integrate::{
    integrate, loglog_slope, EpsMode, RunConfig, Trajectory, DEFAULT_MAX_RETRIES,
};
use stiffparam::netparam::{
    Checkpoint, JetOrder, MlpArchitecture, Model, ParamVector, Parametrization,
};
use stiffparam::quadrature::QuadratureRule;
use stiffparam::refsol::{heat_reference, l2_error, transport_reference};
use stiffparam::semilinear::OperatorKind;
use stiffparam::steppers::{StepContext, Stepper};
use stiffparam::Error;

use crate::config::{EpsSetting, ExperimentConfig};
use crate::output::{num, write_csv};

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
    /// Set when a run failed to converge; maps to exit code 2.
    pub flagged: bool,
}

fn load_state(cfg: &ExperimentConfig) -> Result<(Model, ParamVector)> {
    let path = cfg
        .checkpoint
        .as_ref()
        .context("this command needs `checkpoint` in the config")?;
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok((ck.model, ck.theta))
}

fn eps_mode(cfg: &ExperimentConfig, setting: EpsSetting, h: f64) -> EpsMode {
    match setting {
        EpsSetting::Adaptive => EpsMode::Adaptive(Some(cfg.policy(h))),
        EpsSetting::Fixed(e) => EpsMode::Fixed(e),
    }
}

fn single_eps(cfg: &ExperimentConfig) -> Result<EpsSetting> {
    match cfg.eps.as_slice() {
        [e] => Ok(*e),
        _ => bail!("this command takes a single eps setting"),
    }
}

/// Exact solution at time `t` on the solver nodes.
pub fn reference(
    cfg: &ExperimentConfig,
    model: &Model,
    theta0: &ParamVector,
    rule: &QuadratureRule,
    t: f64,
) -> Result<Vec<f64>> {
    if !cfg.problem.is_linear() {
        bail!("no reference solution for problems with a nonlinearity");
    }
    let v = match cfg.problem.operator {
        OperatorKind::Transport => transport_reference(model, theta0, t, rule.nodes())?,
        OperatorKind::Heat => {
            let fine = cfg.reference_rule()?;
            let u0 = model.eval(theta0, fine.nodes(), JetOrder::Value)?.values;
            heat_reference(&fine, u0.as_slice(), t, cfg.heat_k_max, rule.nodes())?
        }
        OperatorKind::Zero => model.eval(theta0, rule.nodes(), JetOrder::Value)?.values,
    };
    Ok(v.as_slice().to_vec())
}

fn values(model: &Model, theta: &ParamVector, rule: &QuadratureRule) -> Result<Vec<f64>> {
    Ok(model
        .eval(theta, rule.nodes(), JetOrder::Value)?
        .values
        .as_slice()
        .to_vec())
}

pub fn cmd_fit(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let arch = MlpArchitecture::default();
    let rule = cfg.fit_rule()?;
    let fit = fit_initial(&arch, &rule, &cfg.target, cfg.seed, &cfg.adam, &cfg.flow)?;
    let theta = fit.flow.theta.clone();
    let model = Model::Mlp(arch);
    let ck_path = out.join(format!("{}.ckpt", cfg.name));
    std::fs::create_dir_all(out)?;
    Checkpoint::new(model.clone(), theta.clone(), Some(cfg.seed))?.save(&ck_path)?;

    let n = cfg.plot_points;
    let xs: Vec<f64> = (0..n)
        .map(|i| -PI + 2.0 * PI * i as f64 / n as f64)
        .collect();
    let phi = model.eval(&theta, &xs, JetOrder::Value)?.values;
    let y0 = cfg.target.eval(&xs)?;
    let mut max_err: f64 = 0.0;
    let rows: Vec<Vec<String>> = xs
        .iter()
        .zip(phi.iter())
        .zip(&y0)
        .map(|((x, p), y)| {
            max_err = max_err.max((p - y).abs());
            vec![num(*x), num(*p), num(*y), num(p - y)]
        })
        .collect();
    let fit_csv = write_csv(
        out,
        &format!("{}.csv", cfg.name),
        &["x", "phi", "y0", "error"],
        &rows,
    )?;

    let history: Vec<Vec<String>> = fit
        .prefit
        .history
        .iter()
        .chain(&fit.flow.history)
        .enumerate()
        .map(|(i, m)| vec![i.to_string(), num(*m)])
        .collect();
    let hist_csv = write_csv(
        out,
        &format!("{}_history.csv", cfg.name),
        &["iteration", "misfit"],
        &history,
    )?;

    let mut outcome = Outcome {
        files: vec![ck_path, fit_csv, hist_csv],
        ..Outcome::default()
    };
    outcome.summary.push(format!(
        "prefit misfit {:.3e}, flow misfit {:.3e}, max |error| {:.3e}",
        fit.prefit.final_misfit, fit.flow.final_misfit, max_err
    ));
    if fit.flow.final_misfit > fit.prefit.final_misfit {
        bail!("fitting flow increased the misfit");
    }
    Ok(outcome)
}

/// One point of a convergence study.
#[derive(Clone, Debug)]
pub struct ConvergenceRun {
    pub steps: usize,
    pub h: f64,
    pub result: std::result::Result<(f64, Trajectory), String>,
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRun>> {
    let setting = single_eps(cfg)?;
    let (model, theta0) = load_state(cfg)?;
    let rule = cfg.rule()?;
    let exact = reference(cfg, &model, &theta0, &rule, cfg.t_final)?;
    let runs = cfg
        .steps
        .par_iter()
        .map(|&n| {
            let h = cfg.t_final / n as f64;
            let ctx = StepContext::new(&model, &rule).with_options(cfg.options);
            let run = RunConfig {
                method: cfg.method,
                h,
                steps: n,
                iterations: cfg.iterations,
                eps_mode: eps_mode(cfg, setting, h),
                max_retries: DEFAULT_MAX_RETRIES,
            };
            let result = match integrate(&ctx, &cfg.problem, &theta0, &run, |_, _| Ok(())) {
                Ok(traj) => {
                    let u = values(&model, &traj.theta_final, &rule)?;
                    Ok((l2_error(&rule, &u, &exact)?, traj))
                }
                Err(e @ Error::Divergence { .. }) => Err(e.to_string()),
                Err(e) => return Err(e.into()),
            };
            Ok(ConvergenceRun {
                steps: n,
                h,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(runs)
}

pub fn cmd_convergence(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let runs = run_convergence(cfg)?;
    let mut rows = Vec::new();
    let mut guard_rows = Vec::new();
    let mut outcome = Outcome::default();
    let (mut hs, mut errs) = (Vec::new(), Vec::new());
    for r in &runs {
        match &r.result {
            Ok((err, traj)) => {
                rows.push(vec![
                    num(r.h),
                    num(*err),
                    num(traj.mean_iterations()),
                    num(traj.mean_eps()),
                    num(traj.mean_final_delta()),
                ]);
                guard_rows.push(vec![
                    num(r.h),
                    num(traj.max_guard_ratio()),
                    traj.guard_violations(cfg.guard_constant).to_string(),
                    traj.clamp_hits.to_string(),
                    traj.retries.to_string(),
                    num(traj.selection.as_ref().map_or(traj.mean_eps(), |s| s.eps)),
                ]);
                hs.push(r.h);
                errs.push(*err);
            }
            Err(msg) => {
                outcome.flagged = true;
                outcome.summary.push(format!("N = {}: {msg}", r.steps));
                let nan = num(f64::NAN);
                rows.push(vec![
                    num(r.h),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                ]);
                guard_rows.push(vec![
                    num(r.h),
                    nan.clone(),
                    "0".into(),
                    "0".into(),
                    "0".into(),
                    nan,
                ]);
            }
        }
    }
    outcome.files.push(write_csv(
        out,
        &format!("{}.csv", cfg.name),
        &[
            "h",
            "l2_error",
            "mean_iterations",
            "mean_eps",
            "mean_final_delta",
        ],
        &rows,
    )?);
    outcome.files.push(write_csv(
        out,
        &format!("{}_guard.csv", cfg.name),
        &[
            "h",
            "max_guard_ratio",
            "guard_violations",
            "eps_clamp_hits",
            "retries",
            "initial_eps",
        ],
        &guard_rows,
    )?);
    if !errs.is_empty() && errs.iter().all(|&e| e == 0.0) {
        outcome
            .summary
            .push(format!("{} {}: all errors vanish", cfg.problem, cfg.method));
    } else if hs.len() >= 2 {
        let slope = loglog_slope(&hs, &errs)?;
        outcome.summary.push(format!(
            "{} {}: fitted slope {slope:.3}",
            cfg.problem, cfg.method
        ));
        if !converges(&errs, slope) {
            outcome.flagged = true;
            outcome.summary.push(
                "errors do not decrease with the step size; run flagged as non-convergent".into(),
            );
        }
    }
    Ok(outcome)
}

/// A study passes when the fitted slope is at least ½ and the finest error
/// is below the coarsest.
pub fn converges(errs: &[f64], slope: f64) -> bool {
    slope >= 0.5 && errs.last() < errs.first()
}

pub fn cmd_defects(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let (model, theta0) = load_state(cfg)?;
    let rule = cfg.rule()?;
    let n = cfg.steps[0];
    let h = cfg.t_final / n as f64;
    let runs = cfg
        .eps
        .par_iter()
        .map(|&setting| {
            let ctx = StepContext::new(&model, &rule).with_options(cfg.options);
            let run = RunConfig {
                method: cfg.method,
                h,
                steps: n,
                iterations: cfg.iterations,
                eps_mode: eps_mode(cfg, setting, h),
                max_retries: DEFAULT_MAX_RETRIES,
            };
            integrate(&ctx, &cfg.problem, &theta0, &run, |_, _| Ok(()))
        })
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    let mut outcome = Outcome::default();
    for (setting, run) in cfg.eps.iter().zip(runs) {
        match run {
            Ok(traj) => {
                for rec in &traj.records {
                    for (k, d) in rec.trace.deltas.iter().enumerate() {
                        rows.push(vec![
                            rec.step.to_string(),
                            k.to_string(),
                            num(*d),
                            num(rec.eps),
                        ]);
                    }
                }
            }
            Err(e @ Error::Divergence { .. }) => {
                outcome.flagged = true;
                outcome.summary.push(format!("eps {setting:?}: {e}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    outcome.files.push(write_csv(
        out,
        &format!("{}.csv", cfg.name),
        &["step", "iteration", "delta", "eps"],
        &rows,
    )?);
    Ok(outcome)
}

/// Final defect of one step at `t = 0` for each `ε` of the sweep grid, NaN
/// where the step diverged or the system could not be factored.
pub fn run_eps_sweep(cfg: &ExperimentConfig) -> Result<Vec<(f64, f64)>> {
    let (model, theta0) = load_state(cfg)?;
    let rule = cfg.rule()?;
    let h = cfg.t_final / cfg.steps[0] as f64;
    let stepper = Stepper::new(cfg.method)?;
    cfg.sweep_grid()
        .par_iter()
        .map(|&eps| {
            let ctx = StepContext::new(&model, &rule).with_options(cfg.options);
            let delta = match stepper.step(&ctx, &theta0, h, eps, cfg.iterations, &cfg.problem) {
                Ok(res) => res.trace.final_delta(),
                Err(Error::Divergence { .. } | Error::Numeric(_)) => f64::NAN,
                Err(e) => return Err(e.into()),
            };
            Ok((eps, delta))
        })
        .collect()
}

pub fn cmd_eps_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let sweep = run_eps_sweep(cfg)?;
    let rows: Vec<Vec<String>> = sweep.iter().map(|(e, d)| vec![num(*e), num(*d)]).collect();
    let mut outcome = Outcome {
        flagged: sweep.iter().any(|(_, d)| d.is_nan()),
        ..Outcome::default()
    };
    outcome.files.push(write_csv(
        out,
        &format!("{}.csv", cfg.name),
        &["eps", "final_delta"],
        &rows,
    )?);
    Ok(outcome)
}

#[derive(Clone, Debug)]
pub struct LongtimeRow {
    pub t: f64,
    pub l2_error: f64,
    pub theta_deviation: f64,
    pub final_delta: f64,
    pub eps: f64,
}

pub fn run_longtime(cfg: &ExperimentConfig) -> Result<(Vec<LongtimeRow>, Trajectory)> {
    if cfg.problem.operator != OperatorKind::Transport {
        bail!("the long-time study runs the transport problem");
    }
    let setting = single_eps(cfg)?;
    let (model, theta0) = load_state(cfg)?;
    let rule = cfg.rule()?;
    let h = 2.0 * PI / cfg.steps_per_period as f64;
    let steps = cfg.periods * cfg.steps_per_period;
    let ctx = StepContext::new(&model, &rule).with_options(cfg.options);
    let run = RunConfig {
        method: cfg.method,
        h,
        steps,
        iterations: cfg.iterations,
        eps_mode: eps_mode(cfg, setting, h),
        max_retries: DEFAULT_MAX_RETRIES,
    };
    let first_eps = match setting {
        EpsSetting::Fixed(e) => e,
        EpsSetting::Adaptive => f64::NAN,
    };
    let mut rows = vec![LongtimeRow {
        t: 0.0,
        l2_error: 0.0,
        theta_deviation: 0.0,
        final_delta: 0.0,
        eps: first_eps,
    }];
    let traj = integrate(&ctx, &cfg.problem, &theta0, &run, |rec, theta| {
        let u = model.eval(theta, rule.nodes(), JetOrder::Value)?.values;
        let exact = transport_reference(&model, &theta0, rec.t, rule.nodes())?;
        rows.push(LongtimeRow {
            t: rec.t,
            l2_error: l2_error(&rule, u.as_slice(), exact.as_slice())?,
            theta_deviation: (&**theta - &*theta0).norm(),
            final_delta: rec.trace.final_delta(),
            eps: rec.eps,
        });
        Ok(())
    })?;
    Ok((rows, traj))
}

pub fn cmd_longtime(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let (rows, traj) = run_longtime(cfg)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.t),
                num(r.l2_error),
                num(r.theta_deviation),
                num(r.final_delta),
                num(r.eps),
            ]
        })
        .collect();
    let mut outcome = Outcome::default();
    outcome.files.push(write_csv(
        out,
        &format!("{}.csv", cfg.name),
        &["t", "l2_error", "theta_deviation", "final_delta", "eps"],
        &csv_rows,
    )?);
    let last = rows.last().unwrap();
    let n = rows.len() - 1;
    if n > 0 {
        let ratio = last.theta_deviation / (n as f64 * traj.mean_eps());
        outcome.summary.push(format!(
            "{n} steps: final error {:.3e}, |θ_n − θ₀|/(nε) = {ratio:.3e}",
            last.l2_error
        ));
    }
    Ok(outcome)
}

/// Applies the `--seed` flag: it replaces the configured seed.
pub fn with_seed(mut cfg: ExperimentConfig, seed: Option<u64>) -> ExperimentConfig {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}
