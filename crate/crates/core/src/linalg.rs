//! Dense complex matrix primitives.
//!
//! Everything that gets exponentiated in this crate is Hermitian, so the
//! exponential goes through an eigendecomposition. The same decomposition
//! feeds the exact (Daleckii–Krein) derivative used by the optimizers.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{QslError, Result};

pub type C64 = Complex64;

/// Dense square complex matrix.
pub type SquareComplexMatrix = DMatrix<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_SWEEPS: usize = 10_000;

/// A matrix known to be Hermitian within [`HERMITIAN_TOL`] (relative).
#[derive(Clone, Debug, PartialEq)]
pub struct Hermitian(SquareComplexMatrix);

impl Hermitian {
    pub fn new(m: SquareComplexMatrix) -> Result<Self> {
        check_square(&m)?;
        let defect = hermiticity_defect(&m);
        let scale = hs_norm(&m).max(1.0);
        if defect > HERMITIAN_TOL * scale {
            return Err(QslError::InvalidArgument(format!(
                "matrix is not Hermitian: max |a_ij - conj(a_ji)| = {defect:e}"
            )));
        }
        Ok(Hermitian(m))
    }

    /// Symmetrizes `(m + m†)/2`. Use only where `m` is Hermitian by construction.
    pub fn symmetrized(m: SquareComplexMatrix) -> Self {
        let adj = m.adjoint();
        Hermitian((m + adj) * C64::new(0.5, 0.0))
    }

    pub fn from_real_symmetric(entries: &DMatrix<f64>) -> Result<Self> {
        Hermitian::new(entries.map(|x| C64::new(x, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &SquareComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> SquareComplexMatrix {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Hermitian {
        Hermitian(self.0.map(|z| z * c))
    }
}

impl Deref for Hermitian {
    type Target = SquareComplexMatrix;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

/// A matrix with `‖V†V − 𝟙‖_HS ≤ 1e−10·√dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary(SquareComplexMatrix);

impl Unitary {
    pub fn new(m: SquareComplexMatrix) -> Result<Self> {
        check_square(&m)?;
        let defect = unitarity_defect(&m);
        if defect > UNITARY_TOL * (m.nrows() as f64).sqrt() {
            return Err(QslError::Numerical(format!(
                "matrix is not unitary: ‖V†V − 𝟙‖ = {defect:e}"
            )));
        }
        Ok(Unitary(m))
    }

    pub(crate) fn new_unchecked(m: SquareComplexMatrix) -> Self {
        Unitary(m)
    }

    pub fn identity(dim: usize) -> Self {
        Unitary(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &SquareComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> SquareComplexMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary(self.0.adjoint())
    }

    pub fn mul(&self, other: &Unitary) -> Unitary {
        Unitary(&self.0 * &other.0)
    }

    /// Multiplies by the global phase `e^{iφ}`.
    pub fn with_phase(&self, phi: f64) -> Unitary {
        let p = C64::from_polar(1.0, phi);
        Unitary(self.0.map(|z| z * p))
    }
}

impl Deref for Unitary {
    type Target = SquareComplexMatrix;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

fn check_square(m: &SquareComplexMatrix) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(QslError::DimensionMismatch(format!(
            "expected a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn hermiticity_defect(m: &SquareComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `‖V†V − 𝟙‖_HS`.
pub fn unitarity_defect(m: &SquareComplexMatrix) -> f64 {
    let n = m.nrows();
    let prod = m.adjoint() * m;
    hs_norm(&(prod - DMatrix::<C64>::identity(n, n)))
}

/// `ab − ba`.
pub fn commutator(a: &SquareComplexMatrix, b: &SquareComplexMatrix) -> Result<SquareComplexMatrix> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(QslError::DimensionMismatch(format!(
            "commutator of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a * b - b * a)
}

/// Hilbert–Schmidt (Frobenius) norm `√tr(A†A)`.
pub fn hs_norm(a: &SquareComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigendecomposition `h = W diag(λ) W†` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: SquareComplexMatrix,
}

pub fn eig_hermitian(h: &Hermitian) -> Result<HermitianEigen> {
    let sym = Hermitian::symmetrized(h.matrix().clone());
    let n = sym.dim();
    let failure = || {
        QslError::Numerical(format!(
            "Hermitian eigendecomposition did not converge (dim {n}, ‖h‖ = {:e})",
            hs_norm(h.matrix())
        ))
    };

    // Real symmetric inputs (every Hamiltonian of the chain model) take the
    // cheaper real solver.
    let (raw_values, raw_vectors) = if sym.iter().all(|z| z.im == 0.0) {
        let real = sym.map(|z| z.re);
        let eig = SymmetricEigen::try_new(real, EIG_EPS, EIG_MAX_SWEEPS).ok_or_else(failure)?;
        (eig.eigenvalues, eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let eig = SymmetricEigen::try_new(sym.into_inner(), EIG_EPS, EIG_MAX_SWEEPS)
            .ok_or_else(failure)?;
        (eig.eigenvalues, eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_values[a].total_cmp(&raw_values[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| raw_values[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &raw_vectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

fn pythag(a: f64, b: f64) -> f64 {
    if a.abs() < 1e150 && b.abs() < 1e150 {
        (a * a + b * b).sqrt()
    } else {
        a.hypot(b)
    }
}

/// Eigenpairs of the real symmetric tridiagonal matrix with diagonal `diag`
/// and off-diagonal `off` (implicit QL with Wilkinson shifts).
///
/// Returns ascending eigenvalues and the eigenvectors as columns of a
/// column-major `n × n` array.
pub fn eig_tridiagonal(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(QslError::DimensionMismatch(format!(
            "tridiagonal with {} diagonal and {} off-diagonal entries",
            n,
            off.len()
        )));
    }
    if diag.iter().chain(off).any(|x| !x.is_finite()) {
        return Err(QslError::Numerical("nonfinite tridiagonal entry".into()));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > f64::EPSILON * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > 60 {
                    return Err(QslError::Numerical(format!(
                        "tridiagonal eigensolver did not converge (dim {n})"
                    )));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = pythag(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = pythag(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = v.split_at_mut((i + 1) * n);
                    let col_i = &mut left[i * n..];
                    let col_next = &mut right[..n];
                    for (a, b) in col_i.iter_mut().zip(col_next.iter_mut()) {
                        let hb = *b;
                        *b = s * *a + c * hb;
                        *a = c * *a - s * hb;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= f64::EPSILON * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        vectors.extend_from_slice(&v[k * n..(k + 1) * n]);
    }
    Ok((values, vectors))
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `exp(−i t h)` assembled from the cached decomposition.
    pub fn exp(&self, t: f64) -> SquareComplexMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -t * lam);
            for i in 0..n {
                scaled[(i, j)] *= phase;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Divided differences of `λ ↦ e^{−itλ}` over eigenvalue pairs.
    ///
    /// Written as `−it·e^{−it(λj+λk)/2}·sinc(t(λj−λk)/2)` so the diagonal and
    /// near-degenerate pairs need no special casing.
    pub fn exp_divided_differences(&self, t: f64) -> SquareComplexMatrix {
        let n = self.dim();
        DMatrix::from_fn(n, n, |j, k| {
            let (a, b) = (self.values[j], self.values[k]);
            let half = 0.5 * t * (a - b);
            let sinc = if half.abs() < 1e-8 {
                1.0 - half * half / 6.0
            } else {
                half.sin() / half
            };
            C64::new(0.0, -t) * C64::from_polar(1.0, -0.5 * t * (a + b)) * sinc
        })
    }

    /// Pulls a gradient back through `U = exp(−i t h)`.
    ///
    /// Given `Γ` with `dL = Re tr(Γ† dU)`, returns `Ξ` with `dL = Re tr(Ξ† dh)`.
    pub fn exp_pullback(&self, t: f64, gamma: &SquareComplexMatrix) -> SquareComplexMatrix {
        let w = &self.vectors;
        let w_adj = w.adjoint();
        let phi = self.exp_divided_differences(t);
        let rotated = &w_adj * gamma * w;
        let psi = rotated.zip_map(&phi, |g, p| g * p.conj());
        w * psi * w_adj
    }
}

/// `exp(−i t h)` via eigendecomposition.
pub fn expm_hermitian(h: &Hermitian, t: f64) -> Result<Unitary> {
    let eig = eig_hermitian(h)?;
    Unitary::new(eig.exp(t))
}

/// Hermitian matrix with i.i.d. Gaussian real/imaginary parts (GUE up to scale).
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Hermitian {
    let raw = DMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    Hermitian::symmetrized(raw)
}

pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Unitary {
    let h = random_hermitian(n, rng);
    expm_hermitian(&h, 1.0).expect("random Hermitian exponential")
}
