//! Minimum gate time by bisection over the duration `T`, with GRAPE
//! convergence as the success predicate.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bound::{maximize_bound, BoundConfig};
use crate::error::{QslError, Result};
use crate::grape::{gate_error, grape_optimize_seeded, propagate, GrapeConfig, PulseSchedule};
use crate::linalg::Unitary;
use crate::model::ControlSystem;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinTimeConfig {
    /// Success means GRAPE reaches `ε ≤ threshold`; overrides `grape.target_error`.
    pub threshold: f64,
    /// First duration tried; `None` uses the maximized bound.
    pub t_init: Option<f64>,
    pub t_rel_tol: f64,
    pub max_doublings: usize,
    pub grape: GrapeConfig,
    pub bound: BoundConfig,
}

impl Default for MinTimeConfig {
    fn default() -> Self {
        MinTimeConfig {
            threshold: 1e-4,
            t_init: None,
            t_rel_tol: 0.02,
            max_doublings: 20,
            grape: GrapeConfig::default(),
            bound: BoundConfig::default(),
        }
    }
}

/// One GRAPE run of the search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeProbe {
    pub total_time: f64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct MinTimeResult {
    pub t_min: f64,
    /// `(t_lo, t_hi)`: last failing and first succeeding duration. When the
    /// very first probe succeeds there is no failing probe and `t_lo = 0`.
    pub bracket: (f64, f64),
    pub error_at_t_min: f64,
    /// Number of GRAPE runs (durations probed).
    pub evaluations: usize,
    pub bound_value: f64,
    /// `t_min ≥ bound − 2·t_rel_tol·t_min`.
    pub consistent: bool,
    pub schedule: PulseSchedule,
    pub probes: Vec<TimeProbe>,
}

fn check_config(config: &MinTimeConfig) -> Result<()> {
    if !(config.threshold.is_finite() && config.threshold > 0.0) {
        return Err(QslError::InvalidArgument(format!(
            "threshold must be positive, got {}",
            config.threshold
        )));
    }
    if !(config.t_rel_tol > 0.0 && config.t_rel_tol < 1.0) {
        return Err(QslError::InvalidArgument(format!(
            "t_rel_tol must lie in (0, 1), got {}",
            config.t_rel_tol
        )));
    }
    if let Some(t) = config.t_init {
        if !(t.is_finite() && t > 0.0) {
            return Err(QslError::InvalidArgument(format!(
                "t_init must be positive, got {t}"
            )));
        }
    }
    Ok(())
}

/// Phase 1 doubles `T` from `t_init` until GRAPE converges; phase 2 bisects
/// the bracket until `(t_hi − t_lo)/t_hi ≤ t_rel_tol` with twice the restarts,
/// warm-starting from the shortest successful pulse. Returns `t_min = t_hi`.
pub fn find_min_time(
    system: &ControlSystem,
    goal: &Unitary,
    config: &MinTimeConfig,
) -> Result<MinTimeResult> {
    find_min_time_until(system, goal, config, None)
}

/// As [`find_min_time`], giving up with [`QslError::BudgetExceeded`] when a
/// GRAPE run would start after `deadline`.
pub fn find_min_time_until(
    system: &ControlSystem,
    goal: &Unitary,
    config: &MinTimeConfig,
    deadline: Option<Instant>,
) -> Result<MinTimeResult> {
    check_config(config)?;
    let check_deadline = |t: f64| match deadline {
        Some(d) if Instant::now() >= d => Err(QslError::BudgetExceeded(format!(
            "min-time search stopped before probing T = {t}"
        ))),
        _ => Ok(()),
    };
    let bound_value = maximize_bound(goal, system, &config.bound)?.value;
    let t_init = match config.t_init {
        Some(t) => t,
        None if bound_value > 0.0 => bound_value,
        None => {
            return Err(QslError::InvalidArgument(
                "bound is zero; supply t_init explicitly".into(),
            ))
        }
    };

    let mut grape = config.grape.clone();
    grape.target_error = config.threshold;
    let mut probes = Vec::new();

    let mut lo = 0.0;
    let mut t = t_init;
    let mut best = None;
    for _ in 0..=config.max_doublings {
        check_deadline(t)?;
        let r = grape_optimize_seeded(system, goal, t, &grape, &[])?;
        probes.push(TimeProbe {
            total_time: t,
            error: r.final_error,
            converged: r.converged,
        });
        log::debug!(
            "doubling T={t}: eps={} converged={}",
            r.final_error,
            r.converged
        );
        if r.converged {
            best = Some((t, r));
            break;
        }
        lo = t;
        t *= 2.0;
    }
    let Some((mut hi, mut hit)) = best else {
        let last = probes.last().expect("at least one probe");
        return Err(QslError::Unreachable(format!(
            "no convergence to eps <= {} after {} doublings from T = {}; last T = {} gave eps = {}",
            config.threshold, config.max_doublings, t_init, last.total_time, last.error
        )));
    };

    let mut near = grape.clone();
    near.restarts = grape.restarts.max(1) * 2;
    while lo > 0.0 && (hi - lo) / hi > config.t_rel_tol {
        let mid = 0.5 * (lo + hi);
        check_deadline(mid)?;
        let r = grape_optimize_seeded(
            system,
            goal,
            mid,
            &near,
            std::slice::from_ref(&hit.schedule),
        )?;
        probes.push(TimeProbe {
            total_time: mid,
            error: r.final_error,
            converged: r.converged,
        });
        log::debug!(
            "bisect T={mid}: eps={} converged={}",
            r.final_error,
            r.converged
        );
        if r.converged {
            hi = mid;
            hit = r;
        } else {
            lo = mid;
        }
    }

    let error_at_t_min = gate_error(goal.matrix(), propagate(system, &hit.schedule)?.matrix())?;
    if error_at_t_min.is_nan() || error_at_t_min > config.threshold {
        return Err(QslError::Numerical(format!(
            "re-verification at T = {hi} gave eps = {error_at_t_min} above threshold {}",
            config.threshold
        )));
    }
    Ok(MinTimeResult {
        t_min: hi,
        bracket: (lo, hi),
        error_at_t_min,
        evaluations: probes.len(),
        bound_value,
        consistent: hi >= bound_value - 2.0 * config.t_rel_tol * hi,
        schedule: hit.schedule,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_swap_goal;

    fn quick() -> MinTimeConfig {
        MinTimeConfig {
            grape: GrapeConfig {
                restarts: 4,
                max_iters: 500,
                ..Default::default()
            },
            bound: BoundConfig {
                restarts: 4,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn two_level_respects_anchor() {
        let sys = ControlSystem::n_level(2, 1).unwrap();
        let g = build_swap_goal(2).unwrap();
        let r = find_min_time(&sys, &g, &quick()).unwrap();
        assert!(r.t_min >= 2f64.sqrt(), "t_min = {}", r.t_min);
        assert!(r.consistent);
        assert!(r.error_at_t_min <= 1e-4);
        let (lo, hi) = r.bracket;
        assert!(lo < r.t_min && r.t_min <= hi);
        assert!((hi - lo) / hi <= 0.02);
    }

    #[test]
    fn trivial_threshold_returns_t_init() {
        let sys = ControlSystem::n_level(3, 1).unwrap();
        let g = build_swap_goal(3).unwrap();
        let cfg = MinTimeConfig {
            threshold: 2.0,
            ..quick()
        };
        let r = find_min_time(&sys, &g, &cfg).unwrap();
        assert_eq!(r.t_min, r.bound_value);
        assert_eq!(r.evaluations, 1);
        let cfg = MinTimeConfig {
            threshold: 2.0,
            t_init: Some(0.75),
            ..quick()
        };
        assert_eq!(find_min_time(&sys, &g, &cfg).unwrap().t_min, 0.75);
    }

    #[test]
    fn extra_control_does_not_slow_synthesis() {
        let g = build_swap_goal(3).unwrap();
        let one = find_min_time(&ControlSystem::n_level(3, 1).unwrap(), &g, &quick()).unwrap();
        let two = find_min_time(&ControlSystem::n_level(3, 2).unwrap(), &g, &quick()).unwrap();
        assert!(
            two.t_min <= one.t_min * 1.02,
            "{} vs {}",
            two.t_min,
            one.t_min
        );
    }

    #[test]
    fn weaker_threshold_is_faster() {
        let sys = ControlSystem::n_level(2, 1).unwrap();
        let g = build_swap_goal(2).unwrap();
        let strict = find_min_time(&sys, &g, &quick()).unwrap();
        let loose = find_min_time(
            &sys,
            &g,
            &MinTimeConfig {
                threshold: 0.5,
                ..quick()
            },
        )
        .unwrap();
        assert!(loose.t_min < strict.t_min);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let sys = ControlSystem::n_level(3, 1).unwrap();
        let g = build_swap_goal(3).unwrap();
        let a = find_min_time(&sys, &g, &quick()).unwrap();
        let b = find_min_time(&sys, &g, &quick()).unwrap();
        assert_eq!(a.t_min, b.t_min);
        assert_eq!(a.bracket, b.bracket);
    }

    #[test]
    fn expired_deadline_stops_search() {
        let sys = ControlSystem::n_level(2, 1).unwrap();
        let g = build_swap_goal(2).unwrap();
        let r = find_min_time_until(&sys, &g, &quick(), Some(Instant::now()));
        assert!(matches!(r, Err(QslError::BudgetExceeded(_))));
    }

    #[test]
    fn rejects_bad_config() {
        let sys = ControlSystem::n_level(2, 1).unwrap();
        let g = build_swap_goal(2).unwrap();
        for cfg in [
            MinTimeConfig {
                threshold: 0.0,
                ..quick()
            },
            MinTimeConfig {
                t_rel_tol: 1.5,
                ..quick()
            },
            MinTimeConfig {
                t_init: Some(-1.0),
                ..quick()
            },
        ] {
            assert!(matches!(
                find_min_time(&sys, &g, &cfg),
                Err(QslError::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn unreachable_after_doublings() {
        let sys = ControlSystem::n_level(3, 1).unwrap();
        let g = build_swap_goal(3).unwrap();
        let cfg = MinTimeConfig {
            threshold: 1e-12,
            max_doublings: 2,
            grape: GrapeConfig {
                restarts: 1,
                max_iters: 2,
                ..Default::default()
            },
            ..quick()
        };
        match find_min_time(&sys, &g, &cfg) {
            Err(QslError::Unreachable(msg)) => assert!(msg.contains("2 doublings")),
            other => panic!("expected unreachable, got {other:?}"),
        }
    }
}
