//! Fixed-step time integration with the regularization policy, plus the
//! slope fitting used by convergence studies.

use crate::epscontrol::{select_initial_eps, update_eps, EpsPolicy, EpsSelection};
use crate::error::{Error, Result};
use crate::netparam::ParamVector;
use crate::semilinear::Problem;
use crate::steppers::{GnTrace, Method, StepContext, Stepper};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsMode {
    /// Initial search and per-step adaptation. `None` uses
    /// [`EpsPolicy::for_step`] with the method's order.
    Adaptive(Option<EpsPolicy>),
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub h: f64,
    pub steps: usize,
    /// Gauss-Newton iterations per step.
    pub iterations: usize,
    pub eps_mode: EpsMode,
    /// With adaptive `ε`, a divergent step is repeated with doubled `ε` up
    /// to this many times.
    pub max_retries: usize,
}

/// Default for [`RunConfig::max_retries`].
pub const DEFAULT_MAX_RETRIES: usize = 10;

impl RunConfig {
    pub fn policy(&self) -> Option<EpsPolicy> {
        match self.eps_mode {
            EpsMode::Adaptive(Some(p)) => Some(p),
            EpsMode::Adaptive(None) => Some(EpsPolicy::for_step(self.h, self.method.order())),
            EpsMode::Fixed(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    /// 1-based index of the completed step.
    pub step: usize,
    pub t: f64,
    /// `ε` used for this step.
    pub eps: f64,
    pub trace: GnTrace,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub theta_final: ParamVector,
    pub records: Vec<StepRecord>,
    pub selection: Option<EpsSelection>,
    /// Steps whose `ε` update hit a hard clamp.
    pub clamp_hits: usize,
    /// Divergent step attempts that were repeated with a larger `ε`.
    pub retries: usize,
}

impl Trajectory {
    pub fn mean_iterations(&self) -> f64 {
        mean(self.records.iter().map(|r| r.trace.iterations() as f64))
    }

    pub fn mean_eps(&self) -> f64 {
        mean(self.records.iter().map(|r| r.eps))
    }

    pub fn mean_final_delta(&self) -> f64 {
        mean(self.records.iter().map(|r| r.trace.final_delta()))
    }

    pub fn max_guard_ratio(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.trace.max_guard_ratio())
            .fold(0.0, f64::max)
    }

    pub fn guard_violations(&self, c: f64) -> usize {
        self.records
            .iter()
            .map(|r| r.trace.guard_violations(c))
            .sum()
    }

    /// `Σ_{j,k} ‖Δθ_j^k‖`, which bounds `‖θ_n − θ₀‖`.
    pub fn total_increment(&self) -> f64 {
        self.records.iter().map(|r| r.trace.total_increment()).sum()
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs `cfg.steps` steps from `theta0` at `t = 0`, calling `observer`
/// after each step with its record and the new parameters.
pub fn integrate(
    ctx: &StepContext<'_>,
    problem: &Problem,
    theta0: &ParamVector,
    cfg: &RunConfig,
    mut observer: impl FnMut(&StepRecord, &ParamVector) -> Result<()>,
) -> Result<Trajectory> {
    let stepper = Stepper::new(cfg.method)?;
    let policy = cfg.policy();
    let (mut eps, selection) = match (cfg.eps_mode, policy) {
        (EpsMode::Fixed(e), _) => (e, None),
        (_, Some(p)) => {
            let sel = select_initial_eps(
                |e| {
                    Ok(stepper
                        .step(ctx, theta0, cfg.h, e, cfg.iterations, problem)?
                        .trace
                        .final_delta())
                },
                &p,
            )?;
            (sel.eps, Some(sel))
        }
        _ => unreachable!(),
    };
    let mut theta = theta0.clone();
    let mut records = Vec::with_capacity(cfg.steps);
    let mut clamp_hits = 0;
    let mut retries = 0;
    for n in 1..=cfg.steps {
        let mut attempt = 0;
        let res = loop {
            match stepper.step(ctx, &theta, cfg.h, eps, cfg.iterations, problem) {
                Ok(res) => break res,
                Err(Error::Divergence { .. }) if policy.is_some() && attempt < cfg.max_retries => {
                    attempt += 1;
                    retries += 1;
                    let u = update_eps(eps, f64::INFINITY, policy.as_ref().unwrap());
                    clamp_hits += usize::from(u.clamped);
                    eps = u.eps;
                }
                Err(Error::Divergence { context, trace }) => {
                    return Err(Error::Divergence {
                        context: format!("{context} at step {n}"),
                        trace,
                    })
                }
                Err(e) => return Err(e),
            }
        };
        theta = res.theta_next;
        let record = StepRecord {
            step: n,
            t: n as f64 * cfg.h,
            eps,
            trace: res.trace,
        };
        observer(&record, &theta)?;
        if let Some(p) = &policy {
            let u = update_eps(eps, record.trace.final_delta(), p);
            clamp_hits += usize::from(u.clamped);
            eps = u.eps;
        }
        records.push(record);
    }
    Ok(Trajectory {
        theta_final: theta,
        records,
        selection,
        clamp_hits,
        retries,
    })
}

/// Least-squares slope of `log e` against `log h`.
pub fn loglog_slope(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(Error::Config(
            "slope fit needs at least two matching points".into(),
        ));
    }
    if h.iter().chain(err).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Numeric(
            "slope fit needs positive finite data".into(),
        ));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("slope fit needs distinct step sizes".into()));
    }
    Ok(sxy / sxx)
}

/// Length of the leading run of errors (ordered by decreasing `h`) before
/// the error floor: the run ends once an error fails to at least halve.
/// Always at least 2 when two points are given.
pub fn pre_floor_len(err: &[f64]) -> usize {
    let mut len = err.len().min(1);
    for w in err.windows(2) {
        if w[1] > 0.5 * w[0] {
            break;
        }
        len += 1;
    }
    len.max(err.len().min(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netparam::{FourierBasis, MlpArchitecture};
    use crate::quadrature::QuadratureRule;
    use crate::steppers::{galerkin_step, StepContext};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_theta(len: usize, seed: u64, scale: f64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ParamVector::from_vec(
            (0..len)
                .map(|_| scale * rng.random_range(-1.0..1.0))
                .collect(),
        )
    }

    #[test]
    fn slope_of_power_law() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((loglog_slope(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&h[..1], &e[..1]).is_err());
        assert!(loglog_slope(&[0.1, 0.1], &[1.0, 2.0]).is_err());
        assert!(loglog_slope(&[0.1, 0.05], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn pre_floor_trimming() {
        assert_eq!(pre_floor_len(&[1.0, 0.1, 0.01, 0.009, 0.0095]), 3);
        assert_eq!(pre_floor_len(&[1.0, 0.1, 0.01]), 3);
        assert_eq!(pre_floor_len(&[1.0, 0.9]), 2);
        assert_eq!(pre_floor_len(&[1.0]), 1);
    }

    #[test]
    fn fixed_eps_fourier_run_matches_oracle() {
        let rule = QuadratureRule::periodic(20, 4).unwrap();
        let basis = FourierBasis::new(5);
        let ctx = StepContext::new(&basis, &rule);
        let theta0 = random_theta(11, 1, 1.0);
        let p = Problem::heat();
        for method in Method::ALL {
            let cfg = RunConfig {
                method,
                h: 0.05,
                steps: 4,
                iterations: 2,
                eps_mode: EpsMode::Fixed(1e-12),
                max_retries: 0,
            };
            let mut seen = 0;
            let traj = integrate(&ctx, &p, &theta0, &cfg, |r, _| {
                seen += 1;
                assert_eq!(r.step, seen);
                Ok(())
            })
            .unwrap();
            let mut oracle = theta0.clone();
            for _ in 0..4 {
                oracle = galerkin_step(&method.tableau(), &oracle, 0.05, &p).unwrap();
            }
            assert!((&*traj.theta_final - &*oracle).amax() < 1e-8, "{method}");
            assert_eq!(traj.records.len(), 4);
            assert!((traj.records[3].t - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn adaptive_run_reports_selection_and_bounds_deviation() {
        let rule = QuadratureRule::periodic(10, 4).unwrap();
        let arch = MlpArchitecture::default();
        let ctx = StepContext::new(&arch, &rule);
        let theta0 = random_theta(131, 2, 0.8);
        let cfg = RunConfig {
            method: Method::Euler,
            h: 0.05,
            steps: 3,
            iterations: 5,
            eps_mode: EpsMode::Adaptive(None),
            max_retries: DEFAULT_MAX_RETRIES,
        };
        let traj = integrate(&ctx, &Problem::transport(), &theta0, &cfg, |_, _| Ok(())).unwrap();
        let sel = traj.selection.as_ref().unwrap();
        assert_eq!(traj.records[0].eps, sel.eps);
        assert!(sel.probes.len() <= 60);
        let dev = (&*traj.theta_final - &*theta0).norm();
        assert!(dev <= traj.total_increment() * (1.0 + 1e-12));
        for w in traj.records.windows(2) {
            let q = w[1].eps / w[0].eps;
            assert!(q == 0.5 || q == 1.0 || q == 2.0);
        }
    }

    #[test]
    fn observer_errors_abort() {
        let rule = QuadratureRule::periodic(4, 2).unwrap();
        let basis = FourierBasis::new(1);
        let ctx = StepContext::new(&basis, &rule);
        let cfg = RunConfig {
            method: Method::Euler,
            h: 0.1,
            steps: 5,
            iterations: 1,
            eps_mode: EpsMode::Fixed(1e-3),
            max_retries: 0,
        };
        let r = integrate(
            &ctx,
            &Problem::heat(),
            &ParamVector::zeros(3),
            &cfg,
            |rec, _| {
                if rec.step == 2 {
                    Err(Error::Config("stop".into()))
                } else {
                    Ok(())
                }
            },
        );
        assert!(r.is_err());
    }
}
