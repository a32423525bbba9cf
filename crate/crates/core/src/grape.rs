//! Piecewise-constant pulse propagation and GRAPE gate synthesis.
//!
//! The figure of merit is the phase-sensitive normalized gate error
//! `ε = ‖G − U(T)‖_HS / √(2N)`; the optimizers minimize `ε²`, whose exact
//! gradient comes from per-slot Fréchet derivatives and cached forward and
//! backward propagator products.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QslError, Result};
use crate::lbfgs::{self, LbfgsConfig};
use crate::linalg::{
    eig_hermitian, eig_tridiagonal, hs_norm, Hermitian, HermitianEigen, SquareComplexMatrix,
    Unitary, C64,
};
use crate::model::ControlSystem;
use crate::start_rng;

/// Field amplitudes `f[k][s]` held constant over `n_slots` equal slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    #[serde(rename = "T")]
    pub total_time: f64,
    pub n_slots: usize,
    /// One row per control, one column per slot.
    pub amplitudes: Vec<Vec<f64>>,
}

/// `max(40, ⌈10·T⌉)`.
pub fn default_slots(total_time: f64) -> usize {
    ((10.0 * total_time).ceil() as usize).max(40)
}

impl PulseSchedule {
    pub fn new(total_time: f64, n_slots: usize, amplitudes: Vec<Vec<f64>>) -> Result<Self> {
        let s = PulseSchedule {
            total_time,
            n_slots,
            amplitudes,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn zeros(total_time: f64, n_slots: usize, n_controls: usize) -> Result<Self> {
        PulseSchedule::new(total_time, n_slots, vec![vec![0.0; n_slots]; n_controls])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(QslError::InvalidArgument(format!(
                "gate time must be positive and finite, got {}",
                self.total_time
            )));
        }
        if self.n_slots == 0 {
            return Err(QslError::InvalidArgument(
                "schedule needs at least one slot".into(),
            ));
        }
        for (k, row) in self.amplitudes.iter().enumerate() {
            if row.len() != self.n_slots {
                return Err(QslError::DimensionMismatch(format!(
                    "control {} has {} amplitudes for {} slots",
                    k + 1,
                    row.len(),
                    self.n_slots
                )));
            }
            if let Some(bad) = row.iter().position(|f| !f.is_finite()) {
                return Err(QslError::InvalidArgument(format!(
                    "nonfinite amplitude at control {}, slot {}",
                    k + 1,
                    bad + 1
                )));
            }
        }
        Ok(())
    }

    pub fn n_controls(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn slot_duration(&self) -> f64 {
        self.total_time / self.n_slots as f64
    }

    /// Control-major flattening `k·n_slots + s`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.amplitudes.iter().flatten().copied().collect()
    }

    pub fn from_flat(total_time: f64, n_slots: usize, flat: &[f64]) -> Result<Self> {
        if n_slots == 0 || !flat.len().is_multiple_of(n_slots) {
            return Err(QslError::DimensionMismatch(format!(
                "{} amplitudes do not tile {n_slots} slots",
                flat.len()
            )));
        }
        let rows = flat.chunks(n_slots).map(|c| c.to_vec()).collect();
        PulseSchedule::new(total_time, n_slots, rows)
    }

    /// Splits every slot into `factor` equal sub-slots with the same amplitude.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let rows = self
            .amplitudes
            .iter()
            .map(|row| {
                row.iter()
                    .flat_map(|&f| std::iter::repeat_n(f, factor))
                    .collect()
            })
            .collect();
        PulseSchedule::new(self.total_time, self.n_slots * factor, rows)
    }

    /// Piecewise-constant resampling onto a new duration and slot count,
    /// keeping the shape as a function of `t/T`.
    pub fn resampled(&self, total_time: f64, n_slots: usize) -> Result<Self> {
        let rows = self
            .amplitudes
            .iter()
            .map(|row| {
                (0..n_slots)
                    .map(|s| {
                        let mid = (s as f64 + 0.5) / n_slots as f64;
                        let src = ((mid * self.n_slots as f64) as usize).min(self.n_slots - 1);
                        row[src]
                    })
                    .collect()
            })
            .collect();
        PulseSchedule::new(total_time, n_slots, rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: PulseSchedule = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }
}

fn check_schedule(system: &ControlSystem, schedule: &PulseSchedule) -> Result<()> {
    schedule.validate()?;
    if schedule.n_controls() != system.n_controls() {
        return Err(QslError::DimensionMismatch(format!(
            "schedule drives {} controls, system has {}",
            schedule.n_controls(),
            system.n_controls()
        )));
    }
    Ok(())
}

fn slot_amplitudes(flat: &[f64], n_controls: usize, n_slots: usize, s: usize) -> Vec<f64> {
    (0..n_controls).map(|k| flat[k * n_slots + s]).collect()
}

/// `U(T) = ∏_{s=S..1} exp(−iΔt(H₀ + Σ_k f[k][s] H_k))`, earliest slot rightmost.
pub fn propagate(system: &ControlSystem, schedule: &PulseSchedule) -> Result<Unitary> {
    check_schedule(system, schedule)?;
    let n = system.dim();
    let dt = schedule.slot_duration();
    let flat = schedule.to_flat();
    let mut u = DMatrix::<C64>::identity(n, n);
    for s in 0..schedule.n_slots {
        let amps = slot_amplitudes(&flat, system.n_controls(), schedule.n_slots, s);
        let h = Hermitian::symmetrized(system.hamiltonian(&amps));
        u = eig_hermitian(&h)?.exp(dt) * u;
    }
    Ok(Unitary::new_unchecked(u))
}

/// `ε = ‖G − U‖_HS / √(2N)`.
pub fn gate_error(goal: &SquareComplexMatrix, u: &SquareComplexMatrix) -> Result<f64> {
    if goal.shape() != u.shape() {
        return Err(QslError::DimensionMismatch(format!(
            "goal {:?} vs propagator {:?}",
            goal.shape(),
            u.shape()
        )));
    }
    let n = goal.nrows() as f64;
    Ok(hs_norm(&(goal - u)) / (2.0 * n).sqrt())
}

/// `Re tr(a† b)`.
fn re_inner(a: &SquareComplexMatrix, b: &SquareComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// `ε²` and its amplitude gradient for a fixed system, goal and slot grid.
pub struct GrapeObjective<'a> {
    system: &'a ControlSystem,
    goal: &'a SquareComplexMatrix,
    n_slots: usize,
    dt: f64,
    /// Set when the drift is real tridiagonal and control `k` projects onto
    /// level `k+1`, so every slot Hamiltonian is real tridiagonal.
    chain: Option<Chain>,
}

struct Chain {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Chain {
    fn detect(system: &ControlSystem) -> Option<Chain> {
        if !system.leading_projector_controls() {
            return None;
        }
        let h = system.drift().matrix();
        let n = system.dim();
        for j in 0..n {
            for i in 0..n {
                let z = h[(i, j)];
                if z.im != 0.0 || (i.abs_diff(j) > 1 && z.re != 0.0) {
                    return None;
                }
            }
        }
        Some(Chain {
            diag: (0..n).map(|i| h[(i, i)].re).collect(),
            off: (0..n - 1).map(|i| h[(i, i + 1)].re).collect(),
        })
    }
}

impl<'a> GrapeObjective<'a> {
    pub fn new(
        system: &'a ControlSystem,
        goal: &'a Unitary,
        total_time: f64,
        n_slots: usize,
    ) -> Result<Self> {
        if goal.dim() != system.dim() {
            return Err(QslError::DimensionMismatch(format!(
                "goal dimension {} vs system dimension {}",
                goal.dim(),
                system.dim()
            )));
        }
        PulseSchedule::zeros(total_time, n_slots, system.n_controls())?;
        Ok(GrapeObjective {
            system,
            goal: goal.matrix(),
            n_slots,
            dt: total_time / n_slots as f64,
            chain: Chain::detect(system),
        })
    }

    pub fn n_params(&self) -> usize {
        self.system.n_controls() * self.n_slots
    }

    /// `ε²` at the flattened amplitudes; fills `∂ε²/∂f` when `grad` is given.
    pub fn evaluate(&self, flat: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let m = self.system.n_controls();
        if flat.len() != m * self.n_slots {
            return Err(QslError::DimensionMismatch(format!(
                "expected {} amplitudes, got {}",
                m * self.n_slots,
                flat.len()
            )));
        }
        if let Some(grad) = grad.as_deref() {
            if grad.len() != flat.len() {
                return Err(QslError::DimensionMismatch(format!(
                    "gradient buffer has {} entries, expected {}",
                    grad.len(),
                    flat.len()
                )));
            }
        }
        match &self.chain {
            Some(chain) => self.evaluate_chain(chain, flat, grad),
            None => self.evaluate_dense(flat, grad),
        }
    }

    fn evaluate_dense(&self, flat: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let n = self.system.dim();
        let m = self.system.n_controls();
        let slots = self.n_slots;

        let mut eigs: Vec<HermitianEigen> = Vec::with_capacity(slots);
        let mut steps: Vec<SquareComplexMatrix> = Vec::with_capacity(slots);
        // forward[s] = U_s ⋯ U_0
        let mut forward: Vec<SquareComplexMatrix> = Vec::with_capacity(slots);
        for s in 0..slots {
            let amps = slot_amplitudes(flat, m, slots, s);
            let h = Hermitian::symmetrized(self.system.hamiltonian(&amps));
            let eig = eig_hermitian(&h)?;
            let step = eig.exp(self.dt);
            let next = match forward.last() {
                Some(prev) => &step * prev,
                None => step.clone(),
            };
            forward.push(next);
            steps.push(step);
            eigs.push(eig);
        }
        let u = forward.last().expect("at least one slot");
        let diff = u - self.goal;
        let err2 = diff.iter().map(|z| z.norm_sqr()).sum::<f64>() / (2.0 * n as f64);

        let Some(grad) = grad else {
            return Ok(err2);
        };

        // dε² = Re tr(Γ† dU) with Γ = (U − G)/N; back[s] = (U_{S−1}⋯U_{s+1})† Γ
        let mut back = diff / C64::new(n as f64, 0.0);
        for s in (0..slots).rev() {
            let gamma_s = if s > 0 {
                &back * forward[s - 1].adjoint()
            } else {
                back.clone()
            };
            let xi = eigs[s].exp_pullback(self.dt, &gamma_s);
            for (k, hk) in self.system.controls().iter().enumerate() {
                grad[k * slots + s] = re_inner(&xi, hk.matrix());
            }
            back = steps[s].adjoint() * back;
        }
        Ok(err2)
    }

    /// Same quantity as `evaluate_dense` with real eigenvectors and
    /// allocation-free column-major kernels. The projector gradient only
    /// needs `Re Σ_ab W_ka W_kb Ψ_ab`, the `k`-th diagonal entry of `WΨWᵀ`.
    fn evaluate_chain(&self, chain: &Chain, flat: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let n = self.system.dim();
        let m = self.system.n_controls();
        let slots = self.n_slots;
        let nn = n * n;
        let dt = self.dt;

        let mut values = vec![0.0; n * slots];
        let mut vectors = vec![0.0; nn * slots];
        let mut steps = vec![C64::new(0.0, 0.0); nn * slots];
        let mut forward = vec![C64::new(0.0, 0.0); nn * slots];
        let mut diag = chain.diag.clone();
        let mut phase = vec![C64::new(0.0, 0.0); n];
        for s in 0..slots {
            diag.copy_from_slice(&chain.diag);
            for k in 0..m {
                diag[k] += flat[k * slots + s];
            }
            let (lam, w) = eig_tridiagonal(&diag, &chain.off)?;
            for (p, &l) in phase.iter_mut().zip(&lam) {
                *p = C64::from_polar(1.0, -dt * l);
            }
            let step = &mut steps[s * nn..(s + 1) * nn];
            // U_s = W diag(phase) Wᵀ
            for j in 0..n {
                for k in 0..n {
                    let c = phase[k] * w[k * n + j];
                    let wk = &w[k * n..(k + 1) * n];
                    for (u, &wik) in step[j * n..(j + 1) * n].iter_mut().zip(wk) {
                        *u += c * wik;
                    }
                }
            }
            if s == 0 {
                forward[..nn].copy_from_slice(&steps[..nn]);
            } else {
                let (done, rest) = forward.split_at_mut(s * nn);
                matmul(
                    &steps[s * nn..(s + 1) * nn],
                    &done[(s - 1) * nn..],
                    &mut rest[..nn],
                    n,
                );
            }
            values[s * n..(s + 1) * n].copy_from_slice(&lam);
            vectors[s * nn..(s + 1) * nn].copy_from_slice(&w);
        }

        let u = &forward[(slots - 1) * nn..];
        let goal = self.goal.as_slice();
        let mut back: Vec<C64> = u.iter().zip(goal).map(|(a, b)| a - b).collect();
        let err2 = back.iter().map(|z| z.norm_sqr()).sum::<f64>() / (2.0 * n as f64);
        let Some(grad) = grad else {
            return Ok(err2);
        };

        for z in back.iter_mut() {
            *z /= n as f64;
        }
        let mut gamma = vec![C64::new(0.0, 0.0); nn];
        let mut tmp = vec![C64::new(0.0, 0.0); nn];
        let mut rot = vec![C64::new(0.0, 0.0); nn];
        let mut phi = vec![C64::new(0.0, 0.0); nn];
        for s in (0..slots).rev() {
            if s > 0 {
                matmul_adj_right(&back, &forward[(s - 1) * nn..s * nn], &mut gamma, n);
            } else {
                gamma.copy_from_slice(&back);
            }
            let w = &vectors[s * nn..(s + 1) * nn];
            let lam = &values[s * n..(s + 1) * n];
            // rot = Wᵀ Γ W
            tmp.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for j in 0..n {
                for k in 0..n {
                    let wkj = w[j * n + k];
                    let gk = &gamma[k * n..(k + 1) * n];
                    for (t, &g) in tmp[j * n..(j + 1) * n].iter_mut().zip(gk) {
                        *t += g * wkj;
                    }
                }
            }
            for j in 0..n {
                let tj = &tmp[j * n..(j + 1) * n];
                for a in 0..n {
                    let wa = &w[a * n..(a + 1) * n];
                    rot[j * n + a] = tj.iter().zip(wa).map(|(t, &x)| t * x).sum();
                }
            }
            for (p, &l) in phase.iter_mut().zip(lam) {
                *p = C64::from_polar(1.0, -dt * l);
            }
            divided_differences(lam, &phase, dt, &mut phi);
            for k in 0..m {
                let mut acc = 0.0;
                for b in 0..n {
                    let wkb = w[b * n + k];
                    for a in 0..n {
                        let idx = b * n + a;
                        let z = rot[idx] * phi[idx].conj();
                        acc += w[a * n + k] * wkb * z.re;
                    }
                }
                grad[k * slots + s] = acc;
            }
            // back ← U_s† back
            tmp.copy_from_slice(&back);
            matmul_adj_left(&steps[s * nn..(s + 1) * nn], &tmp, &mut back, n);
        }
        Ok(err2)
    }
}

/// `c = a b` for column-major `n × n` arrays.
fn matmul(a: &[C64], b: &[C64], c: &mut [C64], n: usize) {
    for j in 0..n {
        let cj = &mut c[j * n..(j + 1) * n];
        cj.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for k in 0..n {
            let bkj = b[j * n + k];
            for (z, &aik) in cj.iter_mut().zip(&a[k * n..(k + 1) * n]) {
                *z += aik * bkj;
            }
        }
    }
}

/// `c = a b†`.
fn matmul_adj_right(a: &[C64], b: &[C64], c: &mut [C64], n: usize) {
    for j in 0..n {
        let cj = &mut c[j * n..(j + 1) * n];
        cj.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for k in 0..n {
            let bjk = b[k * n + j].conj();
            for (z, &aik) in cj.iter_mut().zip(&a[k * n..(k + 1) * n]) {
                *z += aik * bjk;
            }
        }
    }
}

/// `c = a† b`.
fn matmul_adj_left(a: &[C64], b: &[C64], c: &mut [C64], n: usize) {
    for j in 0..n {
        let bj = &b[j * n..(j + 1) * n];
        for i in 0..n {
            let ai = &a[i * n..(i + 1) * n];
            c[j * n + i] = ai.iter().zip(bj).map(|(x, y)| x.conj() * y).sum();
        }
    }
}

/// Column-major divided differences of `λ ↦ e^{−i t λ}`, given `phase_j = e^{−i t λ_j}`.
fn divided_differences(lam: &[f64], phase: &[C64], t: f64, out: &mut [C64]) {
    let n = lam.len();
    for k in 0..n {
        for j in 0..n {
            let (a, b) = (lam[j], lam[k]);
            let half = 0.5 * t * (a - b);
            out[k * n + j] = if half.abs() > 1e-4 {
                (phase[j] - phase[k]) / (a - b)
            } else {
                let sinc = 1.0 - half * half / 6.0;
                C64::new(0.0, -t) * C64::from_polar(1.0, -0.5 * t * (a + b)) * sinc
            };
        }
    }
}

/// `∂(ε²)/∂f[k][s]` as an `M × n_slots` table.
pub fn grape_gradient(
    system: &ControlSystem,
    goal: &Unitary,
    schedule: &PulseSchedule,
) -> Result<Vec<Vec<f64>>> {
    check_schedule(system, schedule)?;
    let obj = GrapeObjective::new(system, goal, schedule.total_time, schedule.n_slots)?;
    let flat = schedule.to_flat();
    let mut grad = vec![0.0; flat.len()];
    obj.evaluate(&flat, Some(&mut grad))?;
    Ok(grad.chunks(schedule.n_slots).map(|c| c.to_vec()).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrapeConfig {
    /// Slot count; `None` uses [`default_slots`].
    pub n_slots: Option<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub target_error: f64,
    pub seed: u64,
    pub amp_init_scale: f64,
    /// Absolute gradient-norm floor on `ε²` below which a start is declared stuck.
    pub grad_tol: f64,
    /// A start is abandoned once `ε²` improved by less than a fraction
    /// `stall_rel` over `stall_window` iterations (0 disables).
    pub stall_window: usize,
    pub stall_rel: f64,
    /// Abandon a start whose recent convergence rate cannot reach the target
    /// within `horizon` times the remaining iterations (0 disables).
    pub horizon: f64,
    /// Starts run in batches of this size and the search stops after the first
    /// batch containing a converged start. Zero runs every start.
    pub batch: usize,
}

impl Default for GrapeConfig {
    fn default() -> Self {
        GrapeConfig {
            n_slots: None,
            restarts: 8,
            max_iters: 1000,
            target_error: 1e-4,
            seed: 0,
            amp_init_scale: 1.0,
            grad_tol: 1e-10,
            stall_window: 100,
            stall_rel: 1e-2,
            horizon: 10.0,
            batch: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GrapeResult {
    pub final_error: f64,
    pub schedule: PulseSchedule,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    pub evaluations: usize,
    /// Final error and iteration count of every start that ran, seeded starts first.
    pub per_restart_errors: Vec<f64>,
    pub per_restart_iterations: Vec<usize>,
}

struct RestartOutcome {
    error: f64,
    amplitudes: Vec<f64>,
    iterations: usize,
    evaluations: usize,
}

fn descend(obj: &GrapeObjective<'_>, x0: Vec<f64>, config: &GrapeConfig) -> RestartOutcome {
    let lb = LbfgsConfig {
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        relative_grad_tol: false,
        f_target: Some(config.target_error * config.target_error),
        step_tol: 1e-14,
        stall_window: config.stall_window,
        stall_rel: config.stall_rel,
        horizon: config.horizon,
        ..LbfgsConfig::default()
    };
    let minimum = lbfgs::minimize(
        |x, g| obj.evaluate(x, Some(g)).unwrap_or(f64::INFINITY),
        x0,
        &lb,
    );
    RestartOutcome {
        error: minimum.f.max(0.0).sqrt(),
        amplitudes: minimum.x,
        iterations: minimum.iterations,
        evaluations: minimum.evaluations,
    }
}

/// Multi-start GRAPE at fixed duration `T`.
///
/// Restarts draw amplitudes from `N(0, amp_init_scale²)` on independent RNG
/// streams; the best final error wins, ties to the lowest restart index.
/// With a nonzero `batch`, starts after the first successful batch are skipped.
pub fn grape_optimize(
    system: &ControlSystem,
    goal: &Unitary,
    total_time: f64,
    config: &GrapeConfig,
) -> Result<GrapeResult> {
    grape_optimize_seeded(system, goal, total_time, config, &[])
}

/// As [`grape_optimize`], with extra deterministic initial schedules tried
/// ahead of the random restarts (resampled onto this run's slot grid).
pub fn grape_optimize_seeded(
    system: &ControlSystem,
    goal: &Unitary,
    total_time: f64,
    config: &GrapeConfig,
    initial: &[PulseSchedule],
) -> Result<GrapeResult> {
    let n_slots = config.n_slots.unwrap_or_else(|| default_slots(total_time));
    let obj = GrapeObjective::new(system, goal, total_time, n_slots)?;
    if !(config.amp_init_scale.is_finite() && config.amp_init_scale >= 0.0) {
        return Err(QslError::InvalidArgument(format!(
            "amp_init_scale must be nonnegative, got {}",
            config.amp_init_scale
        )));
    }
    let m = system.n_controls();

    let mut starts: Vec<Vec<f64>> = Vec::new();
    for sched in initial {
        if sched.n_controls() != m {
            return Err(QslError::DimensionMismatch(
                "initial schedule does not match the control count".into(),
            ));
        }
        starts.push(sched.resampled(total_time, n_slots)?.to_flat());
    }
    let dist = Normal::new(0.0, config.amp_init_scale)
        .map_err(|e| QslError::InvalidArgument(e.to_string()))?;
    for idx in 0..config.restarts.max(1) {
        let mut rng = start_rng(config.seed, idx as u64);
        starts.push((0..m * n_slots).map(|_| rng.sample(dist)).collect());
    }

    let target = config.target_error;
    let chunk = if config.batch == 0 {
        starts.len()
    } else {
        config.batch
    };
    let mut outcomes: Vec<RestartOutcome> = Vec::with_capacity(starts.len());
    for batch in starts.chunks(chunk) {
        let done: Vec<RestartOutcome> = batch
            .par_iter()
            .map(|x0| descend(&obj, x0.clone(), config))
            .collect();
        let hit = done.iter().any(|o| o.error <= target);
        outcomes.extend(done);
        if hit && config.batch > 0 {
            break;
        }
    }

    let mut best = 0;
    for (idx, o) in outcomes.iter().enumerate() {
        if o.error < outcomes[best].error {
            best = idx;
        }
    }
    let chosen = &outcomes[best];
    let schedule = PulseSchedule::from_flat(total_time, n_slots, &chosen.amplitudes)?;
    let final_error = gate_error(goal.matrix(), propagate(system, &schedule)?.matrix())?;
    Ok(GrapeResult {
        final_error,
        converged: final_error <= config.target_error,
        schedule,
        iterations: chosen.iterations,
        restart_index: best,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        per_restart_errors: outcomes.iter().map(|o| o.error).collect(),
        per_restart_iterations: outcomes.iter().map(|o| o.iterations).collect(),
    })
}
