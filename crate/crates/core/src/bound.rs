//! Speed-limit lower bound `max_V ‖[G,V]‖ / ‖[H₀,V]‖` over unitaries `V`
//! commuting with every control.
//!
//! For projector controls `P₁ … P_M` the feasible set is the block-diagonal
//! group `diag(e^{iθ₁}, …, e^{iθ_M}) ⊕ U(N−M)`. The `U(N−M)` block is charted
//! as `exp(iA)` with `A` Hermitian, giving `M + (N−M)²` real parameters.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QslError, Result};
use crate::lbfgs::{self, LbfgsConfig};
use crate::linalg::{
    commutator, eig_hermitian, hs_norm, Hermitian, HermitianEigen, SquareComplexMatrix, Unitary,
    C64,
};
use crate::model::ControlSystem;
use crate::start_rng;

pub const DEFAULT_DENOM_FLOOR: f64 = 1e-8;

/// Objective value reported to the minimizer when the denominator guard trips.
pub const REJECTED_PENALTY: f64 = 1e12;

/// Prior single-control bound for the normalized chain (`T ≥ 2` for every N).
pub const PREVIOUS_BOUND: f64 = 2.0;

/// Real coordinates of a feasible `V`.
///
/// `generator` holds the `(N−M)²` reals of the Hermitian block generator:
/// first the diagonal, then `(re, im)` for each strict-upper entry in
/// row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleUnitaryParams {
    pub phases: Vec<f64>,
    pub generator: Vec<f64>,
}

pub fn param_count(n: usize, m: usize) -> usize {
    m + (n - m) * (n - m)
}

fn check_nm(n: usize, m: usize) -> Result<()> {
    if n < 2 || m < 1 || m > n - 1 {
        return Err(QslError::InvalidArgument(format!(
            "need N >= 2 and 1 <= M <= N-1, got N = {n}, M = {m}"
        )));
    }
    Ok(())
}

impl FeasibleUnitaryParams {
    pub fn zeros(n: usize, m: usize) -> Self {
        FeasibleUnitaryParams {
            phases: vec![0.0; m],
            generator: vec![0.0; (n - m) * (n - m)],
        }
    }

    /// Parameters of `V = 𝟙 − 2P₁`: `θ₁ = π`, every other phase and `A` zero.
    pub fn anchor(n: usize, m: usize) -> Self {
        let mut p = Self::zeros(n, m);
        p.phases[0] = std::f64::consts::PI;
        p
    }

    /// θ uniform in `[0, 2π)`, generator entries standard normal.
    pub fn random<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Self {
        let phases = (0..m)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let generator = (0..(n - m) * (n - m))
            .map(|_| rng.sample(StandardNormal))
            .collect();
        FeasibleUnitaryParams { phases, generator }
    }

    pub fn from_flat(n: usize, m: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != param_count(n, m) {
            return Err(QslError::DimensionMismatch(format!(
                "expected {} parameters for N = {n}, M = {m}, got {}",
                param_count(n, m),
                flat.len()
            )));
        }
        Ok(FeasibleUnitaryParams {
            phases: flat[..m].to_vec(),
            generator: flat[m..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.phases.iter().chain(&self.generator).copied().collect()
    }
}

/// Hermitian `k×k` block generator from its packed real coordinates.
fn generator_matrix(values: &[f64], k: usize) -> SquareComplexMatrix {
    let mut a = DMatrix::zeros(k, k);
    for j in 0..k {
        a[(j, j)] = C64::new(values[j], 0.0);
    }
    let mut idx = k;
    for j in 0..k {
        for l in j + 1..k {
            let z = C64::new(values[idx], values[idx + 1]);
            a[(j, l)] = z;
            a[(l, j)] = z.conj();
            idx += 2;
        }
    }
    a
}

/// Gradient of `Re tr(Ξ† dA)` with respect to the packed coordinates of `A`.
fn generator_gradient(xi: &SquareComplexMatrix, out: &mut [f64]) {
    let k = xi.nrows();
    for j in 0..k {
        out[j] = xi[(j, j)].re;
    }
    let mut idx = k;
    for j in 0..k {
        for l in j + 1..k {
            out[idx] = xi[(j, l)].re + xi[(l, j)].re;
            out[idx + 1] = xi[(j, l)].im - xi[(l, j)].im;
            idx += 2;
        }
    }
}

struct BlockParts {
    matrix: SquareComplexMatrix,
    /// Eigendecomposition of the generator, kept for the gradient.
    eig: HermitianEigen,
}

fn assemble(params: &FeasibleUnitaryParams, n: usize, m: usize) -> Result<BlockParts> {
    let k = n - m;
    let mut v = DMatrix::zeros(n, n);
    for (j, &theta) in params.phases.iter().enumerate() {
        v[(j, j)] = C64::from_polar(1.0, theta);
    }
    // exp(iA) = exp(−i·(−1)·A)
    let a = Hermitian::new(generator_matrix(&params.generator, k))?;
    let eig = eig_hermitian(&a)?;
    let block = eig.exp(-1.0);
    v.view_mut((m, m), (k, k)).copy_from(&block);
    Ok(BlockParts { matrix: v, eig })
}

/// `V = diag(e^{iθ₁},…,e^{iθ_M}) ⊕ exp(iA)`.
pub fn feasible_unitary(params: &FeasibleUnitaryParams, n: usize, m: usize) -> Result<Unitary> {
    check_nm(n, m)?;
    if params.phases.len() != m || params.generator.len() != (n - m) * (n - m) {
        return Err(QslError::InvalidArgument(format!(
            "parameter shape ({}, {}) does not match N = {n}, M = {m}",
            params.phases.len(),
            params.generator.len()
        )));
    }
    Unitary::new(assemble(params, n, m)?.matrix)
}

/// Outcome of one objective evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObjectiveValue {
    Feasible(f64),
    /// `‖[H₀,V]‖` fell below `floor·‖H₀‖`: `V` (numerically) stabilizes the drift.
    Rejected {
        denominator: f64,
    },
}

impl ObjectiveValue {
    pub fn value(self) -> Option<f64> {
        match self {
            ObjectiveValue::Feasible(v) => Some(v),
            ObjectiveValue::Rejected { .. } => None,
        }
    }
}

/// `‖[G,V]‖_HS / ‖[H₀,V]‖_HS`.
///
/// The floor is relative to `‖H₀‖_HS`, which is 1 for the normalized chain.
pub fn objective(
    v: &SquareComplexMatrix,
    goal: &SquareComplexMatrix,
    drift: &SquareComplexMatrix,
    denom_floor: f64,
) -> Result<ObjectiveValue> {
    let num = hs_norm(&commutator(goal, v)?);
    let den = hs_norm(&commutator(drift, v)?);
    if den < denom_floor * hs_norm(drift) {
        return Ok(ObjectiveValue::Rejected { denominator: den });
    }
    Ok(ObjectiveValue::Feasible(num / den))
}

/// `√(2(N−1))`, the objective at `V = 𝟙 − 2P₁`.
pub fn analytic_reference(n: usize) -> f64 {
    (2.0 * (n as f64 - 1.0)).sqrt()
}

pub fn previous_bound_reference() -> f64 {
    PREVIOUS_BOUND
}

/// Objective and exact parameter gradient for a fixed `(G, H₀, N, M)`.
pub struct BoundObjective<'a> {
    goal: &'a SquareComplexMatrix,
    drift: &'a SquareComplexMatrix,
    n: usize,
    m: usize,
    /// Absolute denominator floor (`denom_floor·‖H₀‖`).
    floor: f64,
}

impl<'a> BoundObjective<'a> {
    pub fn new(
        goal: &'a Unitary,
        system: &'a ControlSystem,
        denom_floor: f64,
    ) -> Result<BoundObjective<'a>> {
        let n = system.dim();
        let m = system.n_controls();
        check_nm(n, m)?;
        if goal.dim() != n {
            return Err(QslError::DimensionMismatch(format!(
                "goal is {}x{}, system has N = {n}",
                goal.dim(),
                goal.dim()
            )));
        }
        if !system.leading_projector_controls() {
            return Err(QslError::InvalidArgument(
                "block parametrization needs controls P_1..P_M on the leading levels".into(),
            ));
        }
        let drift = system.drift().matrix();
        let floor = denom_floor * hs_norm(drift);
        Ok(BoundObjective {
            goal: goal.matrix(),
            drift,
            n,
            m,
            floor,
        })
    }

    pub fn n_params(&self) -> usize {
        param_count(self.n, self.m)
    }

    /// Ratio at `flat`, writing `∂ratio/∂params` into `grad` when given.
    /// `None` when the denominator guard trips.
    pub fn evaluate(&self, flat: &[f64], grad: Option<&mut [f64]>) -> Result<Option<f64>> {
        let (n, m) = (self.n, self.m);
        let params = FeasibleUnitaryParams::from_flat(n, m, flat)?;
        let parts = assemble(&params, n, m)?;
        let v = &parts.matrix;
        let c = self.goal * v - v * self.goal;
        let d = self.drift * v - v * self.drift;
        let num = hs_norm(&c);
        let den = hs_norm(&d);
        if den < self.floor {
            return Ok(None);
        }
        let ratio = num / den;
        let Some(grad) = grad else {
            return Ok(Some(ratio));
        };

        // dL = Re tr(Γ† dV) with Γ = ∂num/den − num·∂den/den²,
        // ∂‖[X,V]‖ = [X†, [X,V]] / ‖[X,V]‖.
        let mut gamma = if num > 0.0 {
            let g_adj = self.goal.adjoint();
            (&g_adj * &c - &c * &g_adj) / C64::new(num * den, 0.0)
        } else {
            DMatrix::zeros(n, n)
        };
        let h_adj = self.drift.adjoint();
        gamma -= (&h_adj * &d - &d * &h_adj) * C64::new(num / (den * den * den), 0.0);

        for j in 0..m {
            let dv = C64::new(0.0, 1.0) * C64::from_polar(1.0, params.phases[j]);
            grad[j] = (gamma[(j, j)].conj() * dv).re;
        }
        let k = n - m;
        let gamma_block = gamma.view((m, m), (k, k)).into_owned();
        let xi = parts.eig.exp_pullback(-1.0, &gamma_block);
        generator_gradient(&xi, &mut grad[m..]);
        Ok(Some(ratio))
    }
}

impl BoundObjective<'_> {
    /// Hermitian direction `X` with `V ≈ 𝟙 + iεX` for `V = V(ε·p)`.
    fn tangent_generator(&self, p: &[f64]) -> SquareComplexMatrix {
        let (n, m) = (self.n, self.m);
        let k = n - m;
        let mut x = DMatrix::zeros(n, n);
        for j in 0..m {
            x[(j, j)] = C64::new(p[j], 0.0);
        }
        x.view_mut((m, m), (k, k))
            .copy_from(&generator_matrix(&p[m..], k));
        x
    }

    /// Supremum of the objective along curves leaving the identity:
    /// `max_X ‖[G,X]‖/‖[H₀,X]‖` over the feasible Lie algebra, solved as a
    /// generalized symmetric eigenproblem. Returns the unit parameter
    /// direction and the limiting ratio.
    pub fn tangent_supremum(&self) -> Option<(Vec<f64>, f64)> {
        let dim = self.n_params();
        let flatten =
            |x: &SquareComplexMatrix| -> Vec<f64> { x.iter().flat_map(|z| [z.re, z.im]).collect() };
        let mut num_cols = Vec::with_capacity(dim);
        let mut den_cols = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            let x = self.tangent_generator(&e);
            num_cols.push(flatten(&(self.goal * &x - &x * self.goal)));
            den_cols.push(flatten(&(self.drift * &x - &x * self.drift)));
        }
        let gram = |cols: &[Vec<f64>]| -> DMatrix<f64> {
            DMatrix::from_fn(dim, dim, |a, b| {
                cols[a].iter().zip(&cols[b]).map(|(p, q)| p * q).sum()
            })
        };
        let (num_gram, den_gram) = (gram(&num_cols), gram(&den_cols));

        // Whiten the denominator form on its range; the kernel (drift
        // stabilizer directions) is dropped.
        let den_eig = SymmetricEigen::new(den_gram);
        let top = den_eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..dim)
            .filter(|&i| den_eig.eigenvalues[i] > 1e-12 * top)
            .collect();
        if keep.is_empty() {
            return None;
        }
        let whiten = DMatrix::from_fn(dim, keep.len(), |r, c| {
            den_eig.eigenvectors[(r, keep[c])] / den_eig.eigenvalues[keep[c]].sqrt()
        });
        let reduced = whiten.transpose() * num_gram * &whiten;
        let red_eig = SymmetricEigen::new(reduced);
        let best = red_eig.eigenvalues.imax();
        let lambda = red_eig.eigenvalues[best].max(0.0);
        let mut dir: Vec<f64> = (&whiten * red_eig.eigenvectors.column(best))
            .iter()
            .copied()
            .collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            return None;
        }
        // sign convention: largest-magnitude component positive
        let pivot = dir
            .iter()
            .cloned()
            .fold(0.0, |acc: f64, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        dir.iter_mut().for_each(|v| *v *= sign / norm);
        Some((dir, lambda.sqrt()))
    }
}

/// Step along the tangent direction used for the tangent start.
pub const TANGENT_START_STEP: f64 = 1e-2;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundConfig {
    /// Total starts, the first of which is the `𝟙 − 2P₁` anchor.
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    /// Relative to `‖H₀‖_HS`.
    pub denom_floor: f64,
    pub seed: u64,
    /// Add one start a short step along the best tangent direction at `𝟙`.
    pub tangent_start: bool,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            restarts: 20,
            max_iters: 500,
            grad_tol: 1e-8,
            step_tol: 1e-14,
            denom_floor: DEFAULT_DENOM_FLOOR,
            seed: 0,
            tangent_start: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundResult {
    pub value: f64,
    pub argmax: Unitary,
    pub argmax_params: FeasibleUnitaryParams,
    pub best_start: usize,
    pub starts_used: usize,
    pub objective_evaluations: usize,
    /// Best value per start; `None` for starts that never left the rejected region.
    pub per_start_best: Vec<Option<f64>>,
}

struct StartOutcome {
    value: Option<f64>,
    params: Vec<f64>,
    evaluations: usize,
}

fn run_start(obj: &BoundObjective<'_>, x0: Vec<f64>, config: &BoundConfig) -> StartOutcome {
    let lb = LbfgsConfig {
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        relative_grad_tol: true,
        step_tol: config.step_tol,
        ..LbfgsConfig::default()
    };
    let minimum = lbfgs::minimize(
        |x, g| match obj.evaluate(x, Some(&mut *g)) {
            Ok(Some(r)) => {
                g.iter_mut().for_each(|v| *v = -*v);
                -r
            }
            _ => {
                g.iter_mut().for_each(|v| *v = 0.0);
                REJECTED_PENALTY
            }
        },
        x0,
        &lb,
    );
    let value = obj.evaluate(&minimum.x, None).ok().flatten();
    StartOutcome {
        value,
        params: minimum.x,
        evaluations: minimum.evaluations + 1,
    }
}

/// Multi-start L-BFGS ascent of the bound objective.
///
/// Start 0 is the `𝟙 − 2P₁` anchor, so the result is never below
/// [`analytic_reference`] for the chain model. Starts `1..restarts` are
/// random, each on its own RNG stream; the optional tangent start comes last.
/// Starts run in parallel and ties go to the lowest start index.
pub fn maximize_bound(
    goal: &Unitary,
    system: &ControlSystem,
    config: &BoundConfig,
) -> Result<BoundResult> {
    let obj = BoundObjective::new(goal, system, config.denom_floor)?;
    let (n, m) = (system.dim(), system.n_controls());

    let mut initial = vec![FeasibleUnitaryParams::anchor(n, m).to_flat()];
    for idx in 1..config.restarts.max(1) {
        let mut rng = start_rng(config.seed, idx as u64);
        initial.push(FeasibleUnitaryParams::random(n, m, &mut rng).to_flat());
    }
    if config.tangent_start {
        if let Some((dir, _)) = obj.tangent_supremum() {
            initial.push(dir.iter().map(|v| v * TANGENT_START_STEP).collect());
        }
    }
    let starts = initial.len();

    let outcomes: Vec<StartOutcome> = initial
        .into_par_iter()
        .map(|x0| run_start(&obj, x0, config))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (idx, o) in outcomes.iter().enumerate() {
        if let Some(v) = o.value {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((idx, v));
            }
        }
    }
    let Some((best_start, _)) = best else {
        return Err(QslError::DegenerateObjective(format!(
            "all {starts} starts fell below the denominator floor {:e}",
            config.denom_floor
        )));
    };

    let argmax_params = FeasibleUnitaryParams::from_flat(n, m, &outcomes[best_start].params)?;
    let argmax = feasible_unitary(&argmax_params, n, m)?;
    let value = objective(
        argmax.matrix(),
        goal.matrix(),
        system.drift().matrix(),
        config.denom_floor,
    )?
    .value()
    .ok_or_else(|| QslError::Numerical("best start re-evaluated as rejected".into()))?;

    Ok(BoundResult {
        value,
        argmax,
        argmax_params,
        best_start,
        starts_used: starts,
        objective_evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        per_start_best: outcomes.iter().map(|o| o.value).collect(),
    })
}
