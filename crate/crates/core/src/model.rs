//! The N-level chain: tridiagonal hopping drift, level-projector controls and
//! the SWAP goal between the first and last level.
//!
//! Levels are written 1-based in docs (`|1⟩ … |N⟩`) and stored 0-based.

use nalgebra::DMatrix;

use crate::error::{QslError, Result};
use crate::linalg::{
    commutator, expm_hermitian, hs_norm, Hermitian, SquareComplexMatrix, Unitary, C64,
};

/// Drift `H₀`, controls `H_k` and the constant the raw drift was divided by.
#[derive(Clone, Debug)]
pub struct ControlSystem {
    dim: usize,
    drift: Hermitian,
    controls: Vec<Hermitian>,
    normalization: f64,
}

impl ControlSystem {
    pub fn new(drift: Hermitian, controls: Vec<Hermitian>, normalization: f64) -> Result<Self> {
        let dim = drift.dim();
        if let Some(bad) = controls.iter().position(|c| c.dim() != dim) {
            return Err(QslError::DimensionMismatch(format!(
                "control {} has dimension {}, drift has {dim}",
                bad + 1,
                controls[bad].dim()
            )));
        }
        if !(normalization.is_finite() && normalization > 0.0) {
            return Err(QslError::InvalidArgument(format!(
                "normalization must be positive, got {normalization}"
            )));
        }
        Ok(ControlSystem {
            dim,
            drift,
            controls,
            normalization,
        })
    }

    /// Normalized chain drift with projector controls on levels `1..=m`.
    pub fn n_level(n: usize, m: usize) -> Result<Self> {
        let (drift, norm) = build_drift(n)?;
        let controls = build_controls(n, m)?;
        ControlSystem::new(drift, controls, norm)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift(&self) -> &Hermitian {
        &self.drift
    }

    pub fn controls(&self) -> &[Hermitian] {
        &self.controls
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Same controls, drift replaced by `c·H₀`.
    pub fn with_scaled_drift(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(QslError::InvalidArgument(format!(
                "drift scale must be positive, got {c}"
            )));
        }
        ControlSystem::new(
            self.drift.scaled(c),
            self.controls.clone(),
            self.normalization / c,
        )
    }

    /// Same controls, arbitrary replacement drift.
    pub fn with_drift(&self, drift: Hermitian) -> Result<Self> {
        ControlSystem::new(drift, self.controls.clone(), self.normalization)
    }

    /// `H₀ + Σ_k f_k H_k`.
    pub fn hamiltonian(&self, amplitudes: &[f64]) -> SquareComplexMatrix {
        debug_assert_eq!(amplitudes.len(), self.controls.len());
        let mut h = self.drift.matrix().clone();
        for (f, hk) in amplitudes.iter().zip(&self.controls) {
            if *f != 0.0 {
                h += hk.matrix() * C64::new(*f, 0.0);
            }
        }
        h
    }

    /// True when control `k` is the projector onto level `k+1` for every `k`.
    pub fn leading_projector_controls(&self) -> bool {
        self.controls.iter().enumerate().all(|(j, c)| {
            c.iter().enumerate().all(|(idx, z)| {
                // column-major storage: idx = col * dim + row
                let (row, col) = (idx % self.dim, idx / self.dim);
                let want = if row == j && col == j { 1.0 } else { 0.0 };
                (z - C64::new(want, 0.0)).norm() <= 1e-12
            })
        })
    }
}

/// Unnormalized chain hopping `h = Σ_j |j⟩⟨j+1| + |j+1⟩⟨j|`.
pub fn chain_hopping(n: usize) -> Result<Hermitian> {
    if n < 2 {
        return Err(QslError::InvalidArgument(format!(
            "need at least 2 levels, got N = {n}"
        )));
    }
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Hermitian::new(m)
}

/// `H₀ = h/‖h‖_HS` and the normalization `‖h‖_HS = √(2(N−1))`.
pub fn build_drift(n: usize) -> Result<(Hermitian, f64)> {
    let h = chain_hopping(n)?;
    let norm = hs_norm(h.matrix());
    Ok((h.scaled(1.0 / norm), norm))
}

pub fn basis_projector(n: usize, level: usize) -> Hermitian {
    let mut m = DMatrix::zeros(n, n);
    m[(level, level)] = C64::new(1.0, 0.0);
    Hermitian::new(m).expect("basis projector is Hermitian")
}

/// `[P₁, …, P_M]`, the projectors onto the first `M` levels. Requires `1 ≤ M ≤ N−1`.
pub fn build_controls(n: usize, m: usize) -> Result<Vec<Hermitian>> {
    if n < 2 {
        return Err(QslError::InvalidArgument(format!(
            "need at least 2 levels, got N = {n}"
        )));
    }
    if m < 1 || m > n - 1 {
        return Err(QslError::InvalidArgument(format!(
            "number of controls must satisfy 1 <= M <= N-1, got N = {n}, M = {m}"
        )));
    }
    Ok((0..m).map(|j| basis_projector(n, j)).collect())
}

/// `G = exp(−i(π/2)(|1⟩⟨N| + |N⟩⟨1|))`.
pub fn build_swap_goal(n: usize) -> Result<Unitary> {
    if n < 2 {
        return Err(QslError::InvalidArgument(format!(
            "need at least 2 levels, got N = {n}"
        )));
    }
    let mut gen = DMatrix::zeros(n, n);
    gen[(0, n - 1)] = C64::new(1.0, 0.0);
    gen[(n - 1, 0)] = C64::new(1.0, 0.0);
    expm_hermitian(&Hermitian::new(gen)?, std::f64::consts::FRAC_PI_2)
}

/// Dimension of the real Lie algebra generated by `{iH₀, iH₁, …}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LieRank {
    pub rank: usize,
    pub dim: usize,
    /// Generated algebra is all of `u(N)` (rank `N²`).
    pub full_unitary: bool,
    /// Generators are traceless and the algebra is all of `su(N)` (rank `N²−1`).
    pub full_special_unitary: bool,
    pub controllable: bool,
}

pub const LIE_RANK_TOL: f64 = 1e-9;

/// Real coordinates of a skew-Hermitian matrix `X` (all real and imaginary parts).
fn flatten(x: &SquareComplexMatrix) -> Vec<f64> {
    x.iter().flat_map(|z| [z.re, z.im]).collect()
}

struct OrthoBasis {
    vectors: Vec<Vec<f64>>,
    matrices: Vec<SquareComplexMatrix>,
}

impl OrthoBasis {
    /// Gram–Schmidt (two passes) against the basis; keeps the residual if
    /// its norm relative to the normalized input exceeds the tolerance.
    fn try_insert(&mut self, x: &SquareComplexMatrix) -> bool {
        let norm = hs_norm(x);
        if norm <= f64::MIN_POSITIVE {
            return false;
        }
        let mut v: Vec<f64> = flatten(x).into_iter().map(|c| c / norm).collect();
        for _ in 0..2 {
            for b in &self.vectors {
                let dot: f64 = v.iter().zip(b).map(|(p, q)| p * q).sum();
                v.iter_mut().zip(b).for_each(|(p, q)| *p -= dot * q);
            }
        }
        let resid = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if resid <= LIE_RANK_TOL {
            return false;
        }
        v.iter_mut().for_each(|c| *c /= resid);
        let n = x.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let k = 2 * (j * n + i);
            C64::new(v[k], v[k + 1])
        });
        self.vectors.push(v);
        self.matrices.push(m);
        true
    }
}

/// Controllability test by commutator closure.
///
/// Rounds of commutators between the newest basis elements and the whole
/// basis are orthogonalized in until a round adds nothing.
pub fn lie_rank(system: &ControlSystem) -> LieRank {
    let n = system.dim();
    let max_rank = n * n;
    let i = C64::new(0.0, 1.0);
    let generators: Vec<SquareComplexMatrix> = std::iter::once(system.drift())
        .chain(system.controls())
        .map(|h| h.matrix() * i)
        .collect();
    let traceless = generators.iter().all(|g| g.trace().norm() <= 1e-12);

    let mut basis = OrthoBasis {
        vectors: Vec::new(),
        matrices: Vec::new(),
    };
    for g in &generators {
        basis.try_insert(g);
    }
    let mut frontier = 0;
    while frontier < basis.matrices.len() && basis.matrices.len() < max_rank {
        let end = basis.matrices.len();
        'round: for a in frontier..end {
            for b in 0..end {
                if a == b {
                    continue;
                }
                let c = commutator(&basis.matrices[a], &basis.matrices[b])
                    .expect("basis matrices share a dimension");
                basis.try_insert(&c);
                if basis.matrices.len() >= max_rank {
                    break 'round;
                }
            }
        }
        frontier = end;
    }

    let rank = basis.matrices.len();
    let full_unitary = rank == max_rank;
    let full_special_unitary = traceless && rank == max_rank - 1;
    LieRank {
        rank,
        dim: n,
        full_unitary,
        full_special_unitary,
        controllable: full_unitary || full_special_unitary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermiticity_defect;
    use approx::assert_abs_diff_eq;

    #[test]
    fn drift_two_levels() {
        let (h0, norm) = build_drift(2).unwrap();
        assert_abs_diff_eq!(norm, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(h0[(0, 1)].re, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(h0[(0, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn drift_normalizations() {
        assert_abs_diff_eq!(build_drift(3).unwrap().1, 2.0, epsilon = 1e-15);
        let (h0, norm) = build_drift(5).unwrap();
        assert_abs_diff_eq!(norm, 8f64.sqrt(), epsilon = 1e-15);
        for i in 0..5usize {
            for j in 0..5usize {
                let want = if i.abs_diff(j) == 1 {
                    1.0 / 8f64.sqrt()
                } else {
                    0.0
                };
                assert_abs_diff_eq!(h0[(i, j)].re, want, epsilon = 1e-15);
                assert_eq!(h0[(i, j)].im, 0.0);
            }
        }
        for n in 2..=15 {
            let (h0, _) = build_drift(n).unwrap();
            assert_abs_diff_eq!(hs_norm(h0.matrix()), 1.0, epsilon = 1e-12);
            assert_eq!(hermiticity_defect(h0.matrix()), 0.0);
        }
    }

    #[test]
    fn drift_rejects_single_level() {
        assert!(matches!(build_drift(1), Err(QslError::InvalidArgument(_))));
    }

    #[test]
    fn controls_examples() {
        let c = build_controls(2, 1).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0][(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(c[0][(1, 1)], C64::new(0.0, 0.0));
        let c = build_controls(4, 2).unwrap();
        assert_eq!(c[1][(1, 1)], C64::new(1.0, 0.0));
        assert_eq!(hs_norm(c[1].matrix()), 1.0);
        assert!(build_controls(4, 4).is_err());
        assert!(build_controls(4, 0).is_err());
    }

    #[test]
    fn projectors_are_orthogonal_idempotents() {
        let c = build_controls(6, 5).unwrap();
        for (j, pj) in c.iter().enumerate() {
            assert_abs_diff_eq!(pj.trace().re, 1.0, epsilon = 1e-12);
            for (k, pk) in c.iter().enumerate() {
                let prod = pj.matrix() * pk.matrix();
                let want = if j == k {
                    pj.matrix().clone()
                } else {
                    DMatrix::zeros(6, 6)
                };
                assert!(hs_norm(&(prod - want)) <= 1e-14);
            }
        }
        assert!(ControlSystem::n_level(6, 5)
            .unwrap()
            .leading_projector_controls());
    }

    /// Power series of exp(−i(π/2)X) on the swap generator.
    fn swap_series(n: usize) -> SquareComplexMatrix {
        let mut x = DMatrix::<C64>::zeros(n, n);
        x[(0, n - 1)] = C64::new(1.0, 0.0);
        x[(n - 1, 0)] = C64::new(1.0, 0.0);
        let a = x * C64::new(0.0, -std::f64::consts::FRAC_PI_2);
        let mut term = DMatrix::<C64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * &a / C64::new(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn swap_goal_two_levels() {
        let g = build_swap_goal(2).unwrap();
        let want = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0., 0.),
                C64::new(0., -1.),
                C64::new(0., -1.),
                C64::new(0., 0.),
            ],
        );
        assert!(hs_norm(&(g.matrix() - &want)) < 1e-15 * 10.0);
        assert!(hs_norm(&(g.into_inner() - swap_series(2))) < 1e-12);
    }

    #[test]
    fn swap_goal_three_levels() {
        let g = build_swap_goal(3).unwrap();
        assert!(hs_norm(&(g.matrix() - swap_series(3))) < 1e-12);
        assert!((g[(1, 1)] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((g[(2, 0)] - C64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((g[(0, 2)] - C64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn swap_goal_squares_and_fourth_power() {
        for n in 2..=15 {
            let g = build_swap_goal(n).unwrap();
            let g2 = g.matrix() * g.matrix();
            for i in 0..n {
                let on_block = i == 0 || i == n - 1;
                let want = if on_block { -1.0 } else { 1.0 };
                assert!((g2[(i, i)] - C64::new(want, 0.0)).norm() < 1e-14);
            }
            let g4 = &g2 * &g2;
            assert!(hs_norm(&(g4 - DMatrix::identity(n, n))) < 1e-10);
        }
    }

    #[test]
    fn lie_rank_examples() {
        let r = lie_rank(&ControlSystem::n_level(2, 1).unwrap());
        assert!(r.controllable);
        assert_eq!(r.rank, 4);
        let r = lie_rank(&ControlSystem::n_level(3, 1).unwrap());
        assert!(r.controllable && r.full_unitary);
        assert_eq!(r.rank, 9);

        let (drift, norm) = build_drift(4).unwrap();
        let bare = ControlSystem::new(drift, vec![], norm).unwrap();
        let r = lie_rank(&bare);
        assert_eq!(r.rank, 1);
        assert!(!r.controllable);
    }

    #[test]
    fn lie_rank_detects_uncontrollable_middle_control() {
        // Control on the middle level of an odd chain respects the reflection symmetry.
        let (drift, norm) = build_drift(3).unwrap();
        let sys = ControlSystem::new(drift, vec![basis_projector(3, 1)], norm).unwrap();
        let r = lie_rank(&sys);
        assert!(!r.controllable);
        assert!(r.rank < 9);
    }

    #[test]
    fn lie_rank_monotone_in_controls() {
        for n in 2..=5 {
            let mut prev = 0;
            let (drift, norm) = build_drift(n).unwrap();
            for m in 0..n {
                let controls = (0..m).map(|j| basis_projector(n, j)).collect();
                let r = lie_rank(&ControlSystem::new(drift.clone(), controls, norm).unwrap()).rank;
                assert!(r >= prev);
                prev = r;
            }
        }
    }

    #[test]
    fn scaled_drift_tracks_normalization() {
        let sys = ControlSystem::n_level(4, 1).unwrap();
        let scaled = sys.with_scaled_drift(2.0).unwrap();
        assert_abs_diff_eq!(hs_norm(scaled.drift().matrix()), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            scaled.normalization(),
            sys.normalization() / 2.0,
            epsilon = 1e-14
        );
    }
}
