//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Relative paths resolve against the config file's
//! directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use stiffparam::epscontrol::EpsPolicy;
use stiffparam::initfit::{AdamConfig, FlowConfig, TargetFunction};
use stiffparam::quadrature::QuadratureRule;
use stiffparam::refsol::DEFAULT_HEAT_K_MAX;
use stiffparam::semilinear::{Nonlinearity, Problem};
use stiffparam::steppers::{GridUpdate, Method, StepOptions, DEFAULT_GUARD_CONSTANT};

const KNOWN_KEYS: &[&str] = &[
    "name",
    "problem",
    "sine_amplitude",
    "method",
    "t_final",
    "steps",
    "eps",
    "delta_tol",
    "iterations",
    "damping",
    "divergence_factor",
    "refresh_jacobian",
    "exploit_pairs",
    "grid_update",
    "grid_fit_iterations",
    "subintervals",
    "nodes_per",
    "fit_subintervals",
    "checkpoint",
    "seed",
    "target",
    "adam_iterations",
    "adam_lr",
    "adam_decay_every",
    "flow_steps",
    "flow_eps",
    "flow_passes",
    "plot_points",
    "heat_k_max",
    "reference_subintervals",
    "periods",
    "steps_per_period",
    "sweep_eps_max",
    "sweep_eps_min",
    "sweep_count",
    "guard_constant",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsSetting {
    Adaptive,
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: Problem,
    pub method: Method,
    pub t_final: f64,
    pub steps: Vec<usize>,
    /// One entry for most commands; several for `defects`.
    pub eps: Vec<EpsSetting>,
    /// Overrides `h^order` when set.
    pub delta_tol: Option<f64>,
    pub iterations: usize,
    pub options: StepOptions,
    pub subintervals: usize,
    pub nodes_per: usize,
    /// Subintervals of the rule used by `fit`; defaults to `subintervals`.
    pub fit_subintervals: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
    pub target: TargetFunction,
    pub adam: AdamConfig,
    pub flow: FlowConfig,
    pub plot_points: usize,
    pub heat_k_max: usize,
    pub reference_subintervals: usize,
    pub periods: usize,
    pub steps_per_period: usize,
    pub sweep_eps_max: f64,
    pub sweep_eps_min: f64,
    pub sweep_count: usize,
    pub guard_constant: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            problem: Problem::transport(),
            method: Method::Euler,
            t_final: 1.0,
            steps: vec![10, 20, 40, 80, 160],
            eps: vec![EpsSetting::Adaptive],
            delta_tol: None,
            iterations: 20,
            options: StepOptions::default(),
            subintervals: 20,
            nodes_per: 4,
            fit_subintervals: None,
            checkpoint: None,
            seed: 0,
            target: TargetFunction::Gaussian,
            adam: AdamConfig::default(),
            flow: FlowConfig::default(),
            plot_points: 1000,
            heat_k_max: DEFAULT_HEAT_K_MAX,
            reference_subintervals: 256,
            periods: 10,
            steps_per_period: 100,
            sweep_eps_max: 1.0,
            sweep_eps_min: 1e-8,
            sweep_count: 25,
            guard_constant: DEFAULT_GUARD_CONSTANT,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value `{value}` for `{key}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("invalid boolean `{value}` for `{key}`"),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn parse_eps(value: &str) -> Result<EpsSetting> {
    if value == "adaptive" {
        return Ok(EpsSetting::Adaptive);
    }
    let e: f64 = parse_value("eps", value)?;
    if !(e > 0.0 && e.is_finite()) {
        bail!("eps must be positive, got {e}");
    }
    Ok(EpsSetting::Fixed(e))
}

/// Parses `key = value` lines into a map, rejecting unknown and repeated keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if !KNOWN_KEYS.contains(&k) {
            bail!("line {}: unknown key `{k}`", i + 1);
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            bail!("line {}: key `{k}` given twice", i + 1);
        }
    }
    Ok(map)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg =
            Self::from_text(&text, base).with_context(|| format!("in {}", path.display()))?;
        if !text.lines().any(|l| l.trim_start().starts_with("name")) {
            if let Some(stem) = path.file_stem() {
                cfg.name = stem.to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn from_text(text: &str, base: &Path) -> Result<Self> {
        let map = parse_pairs(text)?;
        let mut c = Self::default();
        let mut amplitude = None;
        for (k, v) in &map {
            let v = v.as_str();
            match k.as_str() {
                "name" => c.name = v.to_string(),
                "problem" => c.problem = parse_value(k, v)?,
                "sine_amplitude" => amplitude = Some(parse_value::<f64>(k, v)?),
                "method" => c.method = parse_value(k, v)?,
                "t_final" => c.t_final = parse_value(k, v)?,
                "steps" => c.steps = parse_list(k, v)?,
                "eps" => {
                    c.eps = v
                        .split(',')
                        .map(|s| parse_eps(s.trim()))
                        .collect::<Result<_>>()?
                }
                "delta_tol" => {
                    c.delta_tol = (v != "auto").then(|| parse_value(k, v)).transpose()?
                }
                "iterations" => c.iterations = parse_value(k, v)?,
                "damping" => c.options.damping = parse_value(k, v)?,
                "divergence_factor" => c.options.divergence_factor = parse_value(k, v)?,
                "refresh_jacobian" => c.options.refresh_jacobian = parse_bool(k, v)?,
                "exploit_pairs" => c.options.exploit_conjugate_pairs = parse_bool(k, v)?,
                "grid_update" => {
                    c.options.grid_update = match v {
                        "auto" => GridUpdate::Auto,
                        "last_stage" => GridUpdate::LastStage,
                        "linear" => GridUpdate::Linear,
                        "fit" => GridUpdate::Fit,
                        _ => bail!("unknown grid_update `{v}`"),
                    }
                }
                "grid_fit_iterations" => c.options.grid_fit_iterations = Some(parse_value(k, v)?),
                "subintervals" => c.subintervals = parse_value(k, v)?,
                "nodes_per" => c.nodes_per = parse_value(k, v)?,
                "fit_subintervals" => c.fit_subintervals = Some(parse_value(k, v)?),
                "checkpoint" => c.checkpoint = Some(base.join(v)),
                "seed" => c.seed = parse_value(k, v)?,
                "target" => {
                    c.target = match v {
                        "gaussian" => TargetFunction::Gaussian,
                        "hat" => TargetFunction::Hat,
                        "hat_c0" => TargetFunction::ContinuousHat,
                        _ => bail!("unknown target `{v}` (expected gaussian, hat or hat_c0)"),
                    }
                }
                "adam_iterations" => c.adam.iterations = parse_value(k, v)?,
                "adam_lr" => c.adam.learning_rate = parse_value(k, v)?,
                "adam_decay_every" => c.adam.decay_every = parse_value(k, v)?,
                "flow_steps" => c.flow.steps = parse_value(k, v)?,
                "flow_eps" => c.flow.eps = parse_value(k, v)?,
                "flow_passes" => c.flow.passes = parse_value(k, v)?,
                "plot_points" => c.plot_points = parse_value(k, v)?,
                "heat_k_max" => c.heat_k_max = parse_value(k, v)?,
                "reference_subintervals" => c.reference_subintervals = parse_value(k, v)?,
                "periods" => c.periods = parse_value(k, v)?,
                "steps_per_period" => c.steps_per_period = parse_value(k, v)?,
                "sweep_eps_max" => c.sweep_eps_max = parse_value(k, v)?,
                "sweep_eps_min" => c.sweep_eps_min = parse_value(k, v)?,
                "sweep_count" => c.sweep_count = parse_value(k, v)?,
                "guard_constant" => c.guard_constant = parse_value(k, v)?,
                _ => unreachable!("key list and match arms disagree"),
            }
        }
        if let Some(a) = amplitude {
            c.problem = c
                .problem
                .with_nonlinearity(Nonlinearity::Sine { amplitude: a });
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() || self.steps.contains(&0) {
            bail!("step counts must be positive and nonempty");
        }
        if self.eps.is_empty() {
            bail!("eps must be `adaptive` or a list of positive values");
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            bail!("t_final must be nonnegative");
        }
        if self.iterations == 0 {
            bail!("iterations must be positive");
        }
        if !(self.options.damping > 0.0 && self.options.damping <= 1.0) {
            bail!("damping must lie in (0, 1]");
        }
        if self.steps_per_period == 0 || self.sweep_count == 0 || self.plot_points == 0 {
            bail!("steps_per_period, sweep_count and plot_points must be positive");
        }
        if !(self.sweep_eps_min > 0.0 && self.sweep_eps_min <= self.sweep_eps_max) {
            bail!("sweep range must satisfy 0 < sweep_eps_min ≤ sweep_eps_max");
        }
        Ok(())
    }

    pub fn rule(&self) -> Result<QuadratureRule> {
        Ok(QuadratureRule::periodic(self.subintervals, self.nodes_per)?)
    }

    pub fn fit_rule(&self) -> Result<QuadratureRule> {
        Ok(QuadratureRule::periodic(
            self.fit_subintervals.unwrap_or(self.subintervals),
            self.nodes_per,
        )?)
    }

    pub fn reference_rule(&self) -> Result<QuadratureRule> {
        Ok(QuadratureRule::periodic(
            self.reference_subintervals,
            self.nodes_per,
        )?)
    }

    /// The ε policy for step size `h`.
    pub fn policy(&self, h: f64) -> EpsPolicy {
        let mut p = EpsPolicy::for_step(h, self.method.order());
        if let Some(t) = self.delta_tol {
            p.delta_tol = t;
        }
        p
    }

    /// Geometric grid from `sweep_eps_max` down to `sweep_eps_min`.
    pub fn sweep_grid(&self) -> Vec<f64> {
        let n = self.sweep_count;
        if n == 1 {
            return vec![self.sweep_eps_max];
        }
        let (lo, hi) = (self.sweep_eps_min.ln(), self.sweep_eps_max.ln());
        (0..n)
            .map(|i| (hi + (lo - hi) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}
