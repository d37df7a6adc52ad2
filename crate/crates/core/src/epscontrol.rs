//! Choice of the regularization parameter `ε`: a halving search at the
//! initial time and a per-step doubling/halving rule during a run.

use crate::error::{Error, Result};

/// Hard lower bound on `ε` (`2⁻⁶⁰`).
pub const EPS_MIN: f64 = 8.673_617_379_884_035e-19;
/// Hard upper bound on `ε` (`2⁶⁰`).
pub const EPS_MAX: f64 = 1.152_921_504_606_847e18;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsPolicy {
    /// Target defect, by default `h^order`.
    pub delta_tol: f64,
    /// The search stops once `δ/ε` exceeds this.
    pub ratio_cap_search: f64,
    /// During a run, `δ/ε` above this doubles `ε`.
    pub ratio_cap_run: f64,
    /// During a run, `ε` is halved only while `δ/ε` stays below this.
    pub ratio_cap_shrink: f64,
    pub eps_init: f64,
    /// The search stops once `δ > slack_up · δ_min`.
    pub slack_up: f64,
    pub factor: f64,
    pub max_probes: usize,
}

impl Default for EpsPolicy {
    fn default() -> Self {
        Self {
            delta_tol: 1e-2,
            ratio_cap_search: 10.0,
            ratio_cap_run: 100.0,
            ratio_cap_shrink: 10.0,
            eps_init: 1.0,
            slack_up: 1.5,
            factor: 2.0,
            max_probes: 60,
        }
    }
}

impl EpsPolicy {
    /// Default policy with `δ_tol = h^order`.
    pub fn for_step(h: f64, order: u32) -> Self {
        Self {
            delta_tol: h.powi(order as i32),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let reals = [
            self.delta_tol,
            self.ratio_cap_search,
            self.ratio_cap_run,
            self.ratio_cap_shrink,
            self.eps_init,
            self.slack_up,
        ];
        if reals.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || !(self.factor > 1.0)
            || self.max_probes == 0
        {
            return Err(Error::Config(format!(
                "invalid regularization policy {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsSelection {
    pub eps: f64,
    pub delta_min: f64,
    /// Every `(ε, δ(ε))` evaluated, in order.
    pub probes: Vec<(f64, f64)>,
}

/// Halving search for the initial `ε`.
///
/// Starting at `eps_init`, `ε` is halved until `δ < δ_tol`,
/// `δ > slack_up · δ_min` or `δ/ε > ratio_cap_search`, and the largest `ε`
/// attaining the smallest admissible defect is returned. Points violating
/// the ratio cap are not admissible. A probe failure at the first `ε` is a
/// configuration error; later failures end the search.
pub fn select_initial_eps(
    mut probe: impl FnMut(f64) -> Result<f64>,
    policy: &EpsPolicy,
) -> Result<EpsSelection> {
    policy.validate()?;
    let mut eps = policy.eps_init.clamp(EPS_MIN, EPS_MAX);
    let mut probes = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    while probes.len() < policy.max_probes {
        let delta = match probe(eps) {
            Ok(d) if d.is_finite() => d,
            Ok(_) | Err(_) if best.is_some() => break,
            Ok(d) => {
                return Err(Error::Config(format!(
                    "defect {d} at the initial ε = {eps}"
                )))
            }
            Err(e) => {
                return Err(Error::Config(format!(
                    "probe failed at the initial ε = {eps}: {e}"
                )))
            }
        };
        probes.push((eps, delta));
        if delta / eps > policy.ratio_cap_search {
            break;
        }
        if best.is_none_or(|(_, d)| delta < d) {
            best = Some((eps, delta));
        }
        let (_, dmin) = best.unwrap();
        if delta < policy.delta_tol || policy.slack_up * dmin < delta || eps <= EPS_MIN {
            break;
        }
        eps = (eps / policy.factor).max(EPS_MIN);
    }
    // Only reachable with a ratio violation at the very first probe.
    let (eps, delta_min) = best.unwrap_or(probes[0]);
    Ok(EpsSelection {
        eps,
        delta_min,
        probes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsUpdate {
    pub eps: f64,
    /// The rule asked for a value outside `[EPS_MIN, EPS_MAX]`.
    pub clamped: bool,
}

/// Adapts `ε` after a step that ended with defect `δ`: doubling if
/// `δ/ε > ratio_cap_run` or `δ < δ_tol/10`, halving if `δ > 10 δ_tol` and
/// `δ/ε < ratio_cap_shrink`. Doubling takes precedence.
pub fn update_eps(eps: f64, delta: f64, policy: &EpsPolicy) -> EpsUpdate {
    let ratio = delta / eps;
    let target = if ratio > policy.ratio_cap_run || delta < policy.delta_tol / 10.0 {
        eps * policy.factor
    } else if delta > 10.0 * policy.delta_tol && ratio < policy.ratio_cap_shrink {
        eps / policy.factor
    } else {
        eps
    };
    let clamped_eps = target.clamp(EPS_MIN, EPS_MAX);
    EpsUpdate {
        eps: clamped_eps,
        clamped: clamped_eps != target,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn policy(delta_tol: f64) -> EpsPolicy {
        EpsPolicy {
            delta_tol,
            ..EpsPolicy::default()
        }
    }

    #[test]
    fn clamp_constants_are_powers_of_two() {
        assert_eq!(EPS_MIN, 2f64.powi(-60));
        assert_eq!(EPS_MAX, 2f64.powi(60));
    }

    #[test]
    fn linear_probe_stops_below_tolerance() {
        let sel = select_initial_eps(Ok, &policy(0.1)).unwrap();
        assert_eq!(sel.eps, 0.0625);
        assert_eq!(sel.delta_min, 0.0625);
        assert_eq!(sel.probes.len(), 5);
    }

    #[test]
    fn constant_probe_below_tolerance_returns_start() {
        let sel = select_initial_eps(|_| Ok(1e-3), &policy(0.1)).unwrap();
        assert_eq!(sel.eps, 1.0);
        assert_eq!(sel.probes.len(), 1);
    }

    #[test]
    fn floored_probe_returns_largest_eps_at_floor() {
        let sel = select_initial_eps(|e| Ok(e.max(1e-3)), &policy(1e-6)).unwrap();
        assert_eq!(sel.eps, 2f64.powi(-10));
        assert_eq!(sel.delta_min, 1e-3);
        let (last_eps, last_delta) = *sel.probes.last().unwrap();
        assert!(last_delta / last_eps > 10.0);
        assert!((last_eps - 1e-4).abs() < 5e-5);
    }

    #[test]
    fn rising_defect_stops_search() {
        // Minimum at ε = 1/8, then δ grows quickly as ε shrinks.
        let sel = select_initial_eps(|e| Ok((e - 0.125).abs() * 4.0 + 0.3), &policy(1e-6)).unwrap();
        assert_eq!(sel.eps, 0.125);
        assert!(sel.probes.len() <= 6);
    }

    #[test]
    fn first_probe_failure_is_a_config_error() {
        let r = select_initial_eps(|_| Err(Error::Numeric("boom".into())), &policy(0.1));
        assert!(matches!(r, Err(Error::Config(_))));
        let r = select_initial_eps(|_| Ok(f64::NAN), &policy(0.1));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn later_probe_failure_keeps_best() {
        let sel = select_initial_eps(
            |e| {
                if e < 0.3 {
                    Err(Error::Numeric("x".into()))
                } else {
                    Ok(e)
                }
            },
            &policy(1e-6),
        )
        .unwrap();
        assert_eq!(sel.eps, 0.5);
    }

    #[test]
    fn probe_budget_is_respected() {
        let mut calls = 0;
        let p = EpsPolicy {
            max_probes: 60,
            delta_tol: 1e-300,
            ..EpsPolicy::default()
        };
        select_initial_eps(
            |e| {
                calls += 1;
                Ok(e)
            },
            &p,
        )
        .unwrap();
        assert!(calls <= 60);
    }

    #[test]
    fn update_rules() {
        let p = policy(1e-3);
        assert_eq!(update_eps(1e-3, 1e-3, &p).eps, 1e-3);
        assert_eq!(update_eps(1e-3, 0.15, &p).eps, 2e-3);
        assert_eq!(update_eps(1e-2, 2e-2, &p).eps, 5e-3);
        assert_eq!(update_eps(1.0, 1e-5, &p).eps, 2.0);
    }

    #[test]
    fn grow_wins_over_shrink() {
        // δ/ε large would grow; a negative-ish inconsistent δ_tol cannot
        // trigger both, so force it via ratio_cap_shrink > ratio_cap_run.
        let p = EpsPolicy {
            delta_tol: 1e-3,
            ratio_cap_shrink: 1e9,
            ..EpsPolicy::default()
        };
        assert_eq!(update_eps(1e-3, 1.0, &p).eps, 2e-3);
    }

    #[test]
    fn clamps_are_reported() {
        let p = policy(1.0);
        let u = update_eps(EPS_MAX, 1e-9, &p);
        assert_eq!(u.eps, EPS_MAX);
        assert!(u.clamped);
        assert!(!update_eps(1.0, 1.0, &p).clamped);
    }

    proptest! {
        #[test]
        fn update_changes_by_allowed_factor(eps in 1e-10f64..1e3, delta in 0.0f64..1e3, tol in 1e-8f64..1.0) {
            let u = update_eps(eps, delta, &policy(tol));
            let q = u.eps / eps;
            prop_assert!(q == 0.5 || q == 1.0 || q == 2.0);
            prop_assert!((EPS_MIN..=EPS_MAX).contains(&u.eps));
        }

        #[test]
        fn selection_is_among_probes(scale in 1e-3f64..10.0, floor in 1e-8f64..1e-1, tol in 1e-9f64..1e-1) {
            let sel = select_initial_eps(|e| Ok(scale * e + floor), &policy(tol)).unwrap();
            prop_assert!(sel.probes.len() <= 60);
            prop_assert!(sel.probes.iter().any(|&(e, d)| e == sel.eps && d == sel.delta_min));
            let admissible = sel.probes.iter().filter(|(e, d)| d / e <= 10.0);
            for &(_, d) in admissible {
                prop_assert!(sel.delta_min <= d);
            }
        }
    }
}
