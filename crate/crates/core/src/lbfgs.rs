//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! All stopping tests and step rules are invariant under positive rescaling
//! of the objective (when `relative_grad_tol` is set), so minimizing `c·f`
//! follows the same iterates as minimizing `f` up to rounding.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct LbfgsConfig {
    /// Number of stored correction pairs.
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `‖∇f‖ ≤ grad_tol` (times `|f|` if `relative_grad_tol`).
    pub grad_tol: f64,
    pub relative_grad_tol: bool,
    /// Stop when `‖Δx‖ ≤ step_tol·(1 + ‖x‖)`.
    pub step_tol: f64,
    /// Stop when `|Δf| ≤ f_tol·max(|f_old|, |f_new|)`; zero disables.
    pub f_tol: f64,
    /// Stop as soon as `f ≤ f_target`.
    pub f_target: Option<f64>,
    /// Stop when `f` improved by less than `stall_rel·f` over the last
    /// `stall_window` iterations; a zero window disables the test.
    pub stall_window: usize,
    pub stall_rel: f64,
    /// With a target and a stall window: stop when, at the log-rate of the
    /// last window, reaching `f_target` would take more than `horizon` times
    /// the remaining iterations. Zero disables the test.
    pub horizon: f64,
    pub max_line_search_evals: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-8,
            relative_grad_tol: true,
            step_tol: 1e-14,
            f_tol: 0.0,
            f_target: None,
            stall_window: 0,
            stall_rel: 0.0,
            horizon: 0.0,
            max_line_search_evals: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    TargetReached,
    GradientTolerance,
    StepTolerance,
    FunctionTolerance,
    Stalled,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Evaluator<F> {
    objective: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Evaluator<F> {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluations += 1;
        let f = (self.objective)(x, grad);
        if f.is_finite() && grad.iter().all(|g| g.is_finite()) {
            f
        } else {
            grad.iter_mut().for_each(|g| *g = 0.0);
            f64::INFINITY
        }
    }
}

struct Trial {
    alpha: f64,
    f: f64,
    grad: Vec<f64>,
    dphi: f64,
}

/// Strong-Wolfe bracketing and zoom. Returns the accepted trial, or the best
/// sufficient-decrease trial found if the budget runs out.
fn line_search<F: FnMut(&[f64], &mut [f64]) -> f64>(
    ev: &mut Evaluator<F>,
    x: &[f64],
    f0: f64,
    dphi0: f64,
    dir: &[f64],
    alpha_init: f64,
    max_evals: usize,
) -> Option<Trial> {
    let n = x.len();
    let mut xt = vec![0.0; n];
    let mut evals = 0;
    let mut probe = |ev: &mut Evaluator<F>, alpha: f64| -> Trial {
        for i in 0..n {
            xt[i] = x[i] + alpha * dir[i];
        }
        let mut grad = vec![0.0; n];
        let f = ev.eval(&xt, &mut grad);
        let dphi = dot(&grad, dir);
        Trial {
            alpha,
            f,
            grad,
            dphi,
        }
    };
    let armijo = |t: &Trial| t.f <= f0 + C1 * t.alpha * dphi0;
    let curvature = |t: &Trial| t.dphi.abs() <= -C2 * dphi0;

    let zero = Trial {
        alpha: 0.0,
        f: f0,
        grad: Vec::new(),
        dphi: dphi0,
    };
    let mut prev = zero;
    let mut alpha = alpha_init;
    let (mut lo, mut hi);
    let mut first = true;
    loop {
        let t = probe(ev, alpha);
        evals += 1;
        if !armijo(&t) || (!first && t.f >= prev.f) {
            lo = prev;
            hi = t;
            break;
        }
        if curvature(&t) {
            return Some(t);
        }
        if t.dphi >= 0.0 {
            lo = t;
            hi = prev;
            break;
        }
        if evals >= max_evals {
            return Some(t);
        }
        first = false;
        alpha = t.alpha * 2.0;
        prev = t;
    }

    // zoom: lo satisfies sufficient decrease and has the lowest f seen so far
    while evals < max_evals {
        let (a, b) = (lo.alpha, hi.alpha);
        let width = (b - a).abs();
        if width <= f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
        let mut alpha = cubic_minimizer(&lo, &hi);
        let (left, right) = (a.min(b), a.max(b));
        if !(alpha.is_finite() && alpha > left + 0.1 * width && alpha < right - 0.1 * width) {
            alpha = 0.5 * (a + b);
        }
        let t = probe(ev, alpha);
        evals += 1;
        if !armijo(&t) || t.f >= lo.f {
            hi = t;
        } else {
            if curvature(&t) {
                return Some(t);
            }
            if t.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = t;
        }
    }
    (lo.alpha > 0.0 && lo.f < f0).then_some(lo)
}

/// Minimizer of the cubic Hermite interpolant through two trials.
fn cubic_minimizer(a: &Trial, b: &Trial) -> f64 {
    if !a.f.is_finite() || !b.f.is_finite() {
        return f64::NAN;
    }
    let d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.dphi * b.dphi;
    if disc < 0.0 {
        return f64::NAN;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2)
}

/// Minimizes `objective`, which returns `f(x)` and writes `∇f(x)` into its
/// second argument.
pub fn minimize<F>(objective: F, x0: Vec<f64>, config: &LbfgsConfig) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut ev = Evaluator {
        objective,
        evaluations: 0,
    };
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = ev.eval(&x, &mut g);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);

    let grad_done = |f: f64, g: &[f64]| {
        let scale = if config.relative_grad_tol {
            f.abs()
        } else {
            1.0
        };
        norm(g) <= config.grad_tol * scale
    };
    let target_done = |f: f64| config.f_target.is_some_and(|t| f <= t);

    let finish = |x: Vec<f64>, f: f64, g: &[f64], iterations, evaluations, termination| Minimum {
        x,
        f,
        grad_norm: norm(g),
        iterations,
        evaluations,
        termination,
    };

    if target_done(f) {
        return finish(x, f, &g, 0, ev.evaluations, Termination::TargetReached);
    }
    if n == 0 || grad_done(f, &g) {
        return finish(x, f, &g, 0, ev.evaluations, Termination::GradientTolerance);
    }

    let mut history: VecDeque<f64> = VecDeque::with_capacity(config.stall_window + 1);
    let mut iterations = 0;
    while iterations < config.max_iters {
        let mut dir = two_loop(&g, &pairs);
        let mut dphi0 = dot(&g, &dir);
        if dphi0.is_nan() || dphi0 >= 0.0 {
            pairs.clear();
            dir = g.iter().map(|v| -v).collect();
            dphi0 = dot(&g, &dir);
        }
        let alpha_init = if pairs.is_empty() {
            1.0 / norm(&g)
        } else {
            1.0
        };

        let Some(trial) = line_search(
            &mut ev,
            &x,
            f,
            dphi0,
            &dir,
            alpha_init,
            config.max_line_search_evals,
        ) else {
            if pairs.is_empty() {
                return finish(
                    x,
                    f,
                    &g,
                    iterations,
                    ev.evaluations,
                    Termination::LineSearchFailed,
                );
            }
            pairs.clear();
            continue;
        };

        iterations += 1;
        let s: Vec<f64> = dir.iter().map(|d| trial.alpha * d).collect();
        let y: Vec<f64> = trial.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 {
            if pairs.len() == config.memory {
                pairs.pop_front();
            }
            pairs.push_back((s.clone(), y, 1.0 / sy));
        }
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        let f_old = f;
        f = trial.f;
        g = trial.grad;

        if target_done(f) {
            return finish(
                x,
                f,
                &g,
                iterations,
                ev.evaluations,
                Termination::TargetReached,
            );
        }
        if grad_done(f, &g) {
            return finish(
                x,
                f,
                &g,
                iterations,
                ev.evaluations,
                Termination::GradientTolerance,
            );
        }
        if norm(&s) <= config.step_tol * (1.0 + norm(&x)) {
            return finish(
                x,
                f,
                &g,
                iterations,
                ev.evaluations,
                Termination::StepTolerance,
            );
        }
        if config.f_tol > 0.0 && (f_old - f).abs() <= config.f_tol * f_old.abs().max(f.abs()) {
            return finish(
                x,
                f,
                &g,
                iterations,
                ev.evaluations,
                Termination::FunctionTolerance,
            );
        }
        if config.stall_window > 0 {
            history.push_back(f);
            if history.len() > config.stall_window {
                let past = history.pop_front().expect("nonempty history");
                if past - f <= config.stall_rel * f.abs() {
                    return finish(x, f, &g, iterations, ev.evaluations, Termination::Stalled);
                }
                if let Some(target) = config.f_target {
                    if config.horizon > 0.0 && target > 0.0 && f > target && past > f {
                        let rate = (past / f).ln() / config.stall_window as f64;
                        let needed = (f / target).ln() / rate;
                        let left = (config.max_iters - iterations) as f64;
                        if needed > config.horizon * left {
                            return finish(
                                x,
                                f,
                                &g,
                                iterations,
                                ev.evaluations,
                                Termination::Stalled,
                            );
                        }
                    }
                }
            }
        }
    }
    finish(
        x,
        f,
        &g,
        iterations,
        ev.evaluations,
        Termination::MaxIterations,
    )
}

/// `−H·g` for the L-BFGS inverse-Hessian estimate.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let n = x.len();
        let mut f = 0.0;
        g.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * a * x[i] - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        f
    }

    #[test]
    fn solves_rosenbrock() {
        let cfg = LbfgsConfig {
            max_iters: 2000,
            grad_tol: 1e-10,
            relative_grad_tol: false,
            ..Default::default()
        };
        let m = minimize(rosenbrock, vec![-1.2, 1.0, -0.5, 0.8], &cfg);
        for xi in &m.x {
            assert!((xi - 1.0).abs() < 1e-6, "{:?} {:?}", m.x, m.termination);
        }
    }

    #[test]
    fn quadratic_converges_quickly() {
        let diag = [1.0, 10.0, 100.0];
        let obj = |x: &[f64], g: &mut [f64]| {
            let mut f = 0.0;
            for i in 0..3 {
                f += 0.5 * diag[i] * (x[i] - 1.0).powi(2);
                g[i] = diag[i] * (x[i] - 1.0);
            }
            f
        };
        let cfg = LbfgsConfig {
            grad_tol: 1e-12,
            relative_grad_tol: false,
            ..Default::default()
        };
        let m = minimize(obj, vec![0.0; 3], &cfg);
        assert_eq!(m.termination, Termination::GradientTolerance);
        assert!(m.iterations < 30);
    }

    #[test]
    fn target_short_circuits() {
        let obj = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * x[0];
            x[0] * x[0]
        };
        let cfg = LbfgsConfig {
            f_target: Some(10.0),
            ..Default::default()
        };
        let m = minimize(obj, vec![1.0], &cfg);
        assert_eq!(m.termination, Termination::TargetReached);
        assert_eq!(m.iterations, 0);
        assert_eq!(m.evaluations, 1);
    }

    #[test]
    fn scaled_objective_same_iterates() {
        let run = |c: f64| {
            let obj = move |x: &[f64], g: &mut [f64]| {
                let f = rosenbrock(x, g);
                g.iter_mut().for_each(|v| *v *= c);
                c * f
            };
            minimize(
                obj,
                vec![-1.2, 1.0],
                &LbfgsConfig {
                    max_iters: 60,
                    ..Default::default()
                },
            )
        };
        let a = run(1.0);
        let b = run(4.0);
        assert_eq!(a.x, b.x);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn stall_detection_stops_creeping_descent() {
        // f = 1 + 1/x creeps towards its infimum as x grows.
        let obj = |x: &[f64], g: &mut [f64]| {
            let x0 = x[0].max(1e-3);
            g[0] = -1.0 / (x0 * x0);
            1.0 + 1.0 / x0
        };
        let cfg = LbfgsConfig {
            max_iters: 100_000,
            grad_tol: 0.0,
            step_tol: 0.0,
            stall_window: 20,
            stall_rel: 1e-3,
            ..Default::default()
        };
        let m = minimize(obj, vec![1.0], &cfg);
        assert_eq!(m.termination, Termination::Stalled);
        assert!(m.iterations < 100_000);
    }

    #[test]
    fn rejects_infinite_region() {
        // Infinite outside x > 0 with minimum at x = 1.
        let obj = |x: &[f64], g: &mut [f64]| {
            if x[0] <= 0.0 {
                g[0] = 0.0;
                return f64::INFINITY;
            }
            g[0] = 1.0 - 1.0 / x[0];
            x[0] - x[0].ln()
        };
        let cfg = LbfgsConfig {
            grad_tol: 1e-10,
            relative_grad_tol: false,
            ..Default::default()
        };
        let m = minimize(obj, vec![5.0], &cfg);
        assert!((m.x[0] - 1.0).abs() < 1e-8);
    }
}
