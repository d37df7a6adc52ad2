//! One PASS/FAIL line per acceptance criterion. Criteria 5 to 11 run the
//! shipped presets, so this target takes several minutes in release-like
//! builds.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stiffparam::integrate::{loglog_slope, pre_floor_len};
use stiffparam::netparam::{FourierBasis, JetOrder, MlpArchitecture, ParamVector, Parametrization};
use stiffparam::quadrature::QuadratureRule;
use stiffparam::semilinear::Problem;
use stiffparam::steppers::{
    galerkin_step, ButcherTableau, Method, SpectralTableau, StepContext, Stepper,
};
use stiffparam_cli::commands::{self, run_convergence, run_eps_sweep, run_longtime, Outcome};
use stiffparam_cli::config::ExperimentConfig;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

fn preset(name: &str) -> Result<ExperimentConfig> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join(name);
    ExperimentConfig::load(&path)
}

/// Slope of a convergence preset, or the failure message of a run.
fn slope_of(name: &str) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let cfg = preset(name)?;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for run in run_convergence(&cfg)? {
        match run.result {
            Ok((e, _)) => {
                hs.push(run.h);
                errs.push(e);
            }
            Err(msg) => return Err(anyhow!("{name}: N = {} failed: {msg}", run.steps)),
        }
    }
    Ok((loglog_slope(&hs, &errs)?, hs, errs))
}

fn criterion_1() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let rule = QuadratureRule::composite_gauss(-PI, PI, 20, 4)?;
    let width = 2.0 * PI / 20.0;
    for j in 0..20 {
        let a = -PI + j as f64 * width;
        let b = a + width;
        for deg in 0..=7 {
            let got: f64 = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .filter(|(x, _)| **x >= a && **x < b)
                .map(|(x, w)| w * x.powi(deg))
                .sum();
            let exact = (b.powi(deg + 1) - a.powi(deg + 1)) / (deg + 1) as f64;
            let scale = exact.abs().max(width * a.abs().max(b.abs()).powi(deg));
            worst = worst.max((got - exact).abs() / scale);
        }
    }
    let sum_err = (QuadratureRule::periodic(20, 4)?
        .weights()
        .iter()
        .sum::<f64>()
        - 2.0 * PI)
        .abs();
    verdict(
        worst <= 1e-12 && sum_err <= 1e-12,
        format!("max relative monomial error {worst:.2e}, |Σw − 2π| = {sum_err:.2e}"),
    )
}

fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |s: f64| (f(x + s) - f(x - s)) / (2.0 * s);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn criterion_2() -> Result<Verdict> {
    let arch = MlpArchitecture::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let probes = 150;
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let theta = ParamVector::from_vec(
            (0..arch.param_count())
                .map(|_| rng.random_range(-1.5..1.5))
                .collect(),
        );
        let x = rng.random_range(-3.1..3.1);
        let q = rng.random_range(0..arch.param_count());
        let jet = arch.eval(&theta, &[x], JetOrder::Second)?;
        let jac = arch.jacobian(&theta, &[x], JetOrder::Second)?;
        let mut pairs = Vec::new();
        let value = |y: f64| arch.eval(&theta, &[y], JetOrder::Value).unwrap().values[0];
        let slope = |y: f64| {
            arch.eval(&theta, &[y], JetOrder::First)
                .unwrap()
                .d1
                .unwrap()[0]
        };
        pairs.push((jet.d1.as_ref().unwrap()[0], central(value, x, 1e-3)));
        pairs.push((jet.d2.as_ref().unwrap()[0], central(slope, x, 1e-3)));
        for k in [JetOrder::Value, JetOrder::First, JetOrder::Second] {
            let component = |t: f64| {
                let mut th = theta.clone();
                th[q] = t;
                arch.eval(&th, &[x], k).unwrap().component(k).unwrap()[0]
            };
            pairs.push((
                jac.component(k).unwrap()[(0, q)],
                central(component, theta[q], 1e-3),
            ));
        }
        for (a, n) in pairs {
            worst = worst.max((a - n).abs() / a.abs().max(1e-6));
        }
    }
    verdict(
        worst <= 1e-5,
        format!("{probes} probes, max relative deviation {worst:.2e}"),
    )
}

fn criterion_3() -> Result<Verdict> {
    let rule = QuadratureRule::periodic(20, 4)?;
    let basis = FourierBasis::new(6);
    let ctx = StepContext::new(&basis, &rule);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta0 = ParamVector::from_vec(
        (0..basis.param_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    );
    let (mut worst, mut max_iter): (f64, usize) = (0.0, 0);
    for method in Method::ALL {
        let stepper = Stepper::new(method)?;
        for problem in [Problem::transport(), Problem::heat()] {
            for h in [0.1, 0.01] {
                let res = stepper.step(&ctx, &theta0, h, 1e-12, 2, &problem)?;
                let oracle = galerkin_step(&method.tableau(), &theta0, h, &problem)?;
                worst = worst.max((&*res.theta_next - &*oracle).amax());
                max_iter = max_iter.max(res.trace.iterations());
            }
        }
    }
    verdict(
        worst <= 1e-8 && max_iter <= 2,
        format!("max deviation from the Galerkin step {worst:.2e} after {max_iter} iterations"),
    )
}

fn criterion_4() -> Result<Verdict> {
    let s3 = 3f64.sqrt();
    let s2 = 2f64.sqrt();
    let gauss = SpectralTableau::build(ButcherTableau::gauss2())?;
    let radau = SpectralTableau::build(ButcherTableau::radau2())?;
    let mut worst: f64 = 0.0;
    for (spec, re, im) in [(&gauss, 3.0, s3), (&radau, 2.0, s2)] {
        worst = worst.max(
            (spec.lambdas[0].re - re)
                .abs()
                .max((spec.lambdas[0].im - im).abs()),
        );
        worst = worst.max(
            (spec.lambdas[1].re - re)
                .abs()
                .max((spec.lambdas[1].im + im).abs()),
        );
        let inv = spec
            .tableau
            .a
            .clone()
            .try_inverse()
            .ok_or_else(|| anyhow!("singular tableau"))?;
        let mut generic: Vec<_> = inv.complex_eigenvalues().iter().copied().collect();
        generic.sort_by(|a, b| b.im.total_cmp(&a.im));
        for (g, l) in generic.iter().zip(&spec.lambdas) {
            worst = worst.max((g - l).norm());
        }
        let t_norm = spec.t.clone().svd(false, false).singular_values.max();
        worst = worst.max((t_norm - 1.0).abs());
    }
    worst = worst
        .max((gauss.w[0] + s3).abs())
        .max((gauss.w[1] - s3).abs());
    let flags = radau.tableau.stiffly_accurate && !gauss.tableau.stiffly_accurate;
    verdict(
        worst <= 1e-12 && flags,
        format!(
            "max deviation {worst:.2e}, Radau stiffly accurate {}",
            radau.tableau.stiffly_accurate
        ),
    )
}

fn criterion_5() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, order) in [
        ("transport-euler-smooth.cfg", 1.0),
        ("transport-midpoint-smooth.cfg", 2.0),
        ("transport-radau2-smooth.cfg", 3.0),
    ] {
        let (slope, _, _) = slope_of(name)?;
        let ok = (slope - order).abs() <= 0.3;
        pass &= ok;
        parts.push(format!("{name} slope {slope:.3} (target {order} ± 0.3)"));
    }
    let (_, hs, errs) = slope_of("transport-gauss2-smooth.cfg")?;
    let len = pre_floor_len(&errs);
    let slope = loglog_slope(&hs[..len], &errs[..len])?;
    let floor = errs.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = slope >= 3.5 && floor < 1e-4;
    pass &= ok;
    parts.push(format!(
        "gauss2 pre-floor slope {slope:.3} over {len} points (≥ 3.5), floor {floor:.2e} (< 1e-4)"
    ));
    verdict(pass, parts.join("; "))
}

fn criterion_6() -> Result<Verdict> {
    let (mid, _, _) = slope_of("transport-midpoint-hat.cfg")?;
    let (eul, _, _) = slope_of("transport-euler-hat.cfg")?;
    verdict(
        mid <= 1.5 && (eul - 1.0).abs() <= 0.3,
        format!("midpoint slope {mid:.3} (≤ 1.5), euler slope {eul:.3} (1 ± 0.3)"),
    )
}

fn criterion_7() -> Result<Verdict> {
    let cfg = preset("heat-midpoint-smooth.cfg")?;
    let settings_ok = cfg.options.refresh_jacobian && cfg.iterations == 50 && cfg.heat_k_max == 32;
    let (eul, _, _) = slope_of("heat-euler-smooth.cfg")?;
    let (mid, _, _) = slope_of("heat-midpoint-smooth.cfg")?;
    verdict(
        settings_ok && (eul - 1.0).abs() <= 0.3 && (mid - 2.0).abs() <= 0.4,
        format!("euler slope {eul:.3} (1 ± 0.3), midpoint slope {mid:.3} (2 ± 0.4)"),
    )
}

fn criterion_8() -> Result<Verdict> {
    let cfg = preset("eps-sweep.cfg")?;
    let mut sweep = run_eps_sweep(&cfg)?;
    sweep.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top: Vec<(f64, f64)> = sweep
        .iter()
        .copied()
        .filter(|(e, _)| (1e-2..=1.0).contains(e))
        .take(3)
        .collect();
    if top.len() < 3 {
        return verdict(false, "fewer than three swept ε in [1e-2, 1]");
    }
    let ratios: Vec<f64> = top.iter().map(|(e, d)| d / e).collect();
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    verdict(
        lo > 0.0 && spread.is_finite() && spread < 3.0,
        format!(
            "δ/ε over ε = {:.3e}..{:.3e} spans a factor {spread:.3}",
            top[2].0, top[0].0
        ),
    )
}

fn criterion_9() -> Result<Verdict> {
    let cfg = preset("defects-gauss2.cfg")?;
    let dir = tempfile::tempdir()?;
    let out = commands::cmd_defects(&cfg, dir.path())?;
    let text = fs::read_to_string(&out.files[0])?;
    let mut per_step: Vec<Vec<f64>> = Vec::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let step: usize = cols[0].parse()?;
        let delta: f64 = cols[2].parse()?;
        if per_step.len() <= step {
            per_step.resize(step + 1, Vec::new());
        }
        per_step[step].push(delta);
    }
    per_step.retain(|d| !d.is_empty());
    let mut ratios: Vec<f64> = per_step.iter().map(|d| d[d.len() - 1] / d[0]).collect();
    let monotone = per_step.iter().all(|d| d[d.len() - 1] <= d[0]);
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    let median = if n % 2 == 1 {
        ratios[n / 2]
    } else {
        0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
    };
    verdict(
        n == 20 && monotone && median <= 0.5,
        format!(
            "{n} steps, δ^K ≤ δ⁰ in every step: {monotone}, median δ^K/δ⁰ = {median:.3} (≤ 0.5)"
        ),
    )
}

fn criterion_10() -> Result<Verdict> {
    let cfg = preset("longtime.cfg")?;
    let (rows, traj) = run_longtime(&cfg)?;
    let per = cfg.steps_per_period;
    if rows.len() != cfg.periods * per + 1 {
        return verdict(
            false,
            format!(
                "expected {} rows, got {}",
                cfg.periods * per + 1,
                rows.len()
            ),
        );
    }
    let one_period = rows[per].l2_error;
    let worst = rows.iter().map(|r| r.l2_error).fold(0.0, f64::max);
    let n = rows.len() - 1;
    let drift = rows[n].theta_deviation / (n as f64 * traj.mean_eps());
    println!("  criterion 10 drift: |θ_n − θ₀|/(nε) = {drift:.4e} after {n} steps");
    verdict(
        worst <= 10.0 * one_period && drift.is_finite(),
        format!(
            "max error {worst:.3e}, error after one period {one_period:.3e}, ratio {:.3}",
            worst / one_period
        ),
    )
}

type CommandFn = fn(&ExperimentConfig, &Path) -> Result<Outcome>;

fn outputs(cmd: CommandFn, cfg: &ExperimentConfig) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    let dir = tempfile::tempdir()?;
    let out = cmd(cfg, dir.path())?;
    out.files
        .iter()
        .map(|f| Ok((f.strip_prefix(dir.path())?.to_path_buf(), fs::read(f)?)))
        .collect()
}

fn criterion_11() -> Result<Verdict> {
    let jobs: [(&str, CommandFn); 5] = [
        ("transport-midpoint-smooth.cfg", commands::cmd_convergence),
        ("defects-gauss2.cfg", commands::cmd_defects),
        ("eps-sweep.cfg", commands::cmd_eps_sweep),
        ("longtime.cfg", commands::cmd_longtime),
        ("fit-gaussian.cfg", commands::cmd_fit),
    ];
    let mut files = 0;
    for (name, cmd) in jobs {
        let cfg = preset(name)?;
        let a = outputs(cmd, &cfg)?;
        let b = outputs(cmd, &cfg)?;
        if a != b {
            return verdict(false, format!("{name}: outputs differ between runs"));
        }
        files += a.len();
    }
    verdict(
        true,
        format!("{files} output files byte-identical across two runs of five presets"),
    )
}

fn main() -> ExitCode {
    let criteria: [fn() -> Result<Verdict>; 11] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
    ];
    let mut failed = 0;
    for (i, criterion) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match criterion() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} criterion {}: {detail} [{secs:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
        if !pass {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
