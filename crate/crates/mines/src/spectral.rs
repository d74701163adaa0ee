//! Symmetric-matrix primitives: eigendecomposition, SPD square root, inverse,
//! log-determinant, the log-det Bregman divergence, and spectral projections
//! onto the matrix intervals used to constrain the covariance state.
//!
//! The optimizer keeps its covariance-inverse iterate inside the interval
//! `tau*I <= X <= zeta*I`; the corresponding covariance then lives in
//! `1/zeta*I <= S <= 1/tau*I`. Both projections are spectral: decompose,
//! clamp the eigenvalues to the interval, recompose.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Errors from symmetric-matrix operations.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NotFinite { row: usize, col: usize },
    #[error("eigen solver did not converge on a {dim}x{dim} symmetric matrix")]
    EigenFailed { dim: usize },
    #[error("matrix is not positive definite (smallest eigenvalue {lambda_min})")]
    NotPositiveDefinite { lambda_min: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("constraint box needs 0 < tau <= zeta, got tau = {tau}, zeta = {zeta}")]
    BadBox { tau: f64, zeta: f64 },
}

/// Dense symmetric matrix. Symmetry is enforced on construction by averaging
/// `(M + M^T) / 2`, and every eigen-recomposition re-symmetrizes the result,
/// so `get(i, j) == get(j, i)` holds exactly at all times.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Builds from an arbitrary square matrix, symmetrizing it. Rejects
    /// non-square or non-finite input.
    pub fn new(m: DMatrix<f64>) -> Result<Self, SpectralError> {
        if m.nrows() != m.ncols() {
            return Err(SpectralError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if !m[(i, j)].is_finite() {
                    return Err(SpectralError::NotFinite { row: i, col: j });
                }
            }
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrizes without the finiteness check; for internal recompositions
    /// whose inputs are already validated.
    pub(crate) fn symmetrize(m: DMatrix<f64>) -> Self {
        let sym = 0.5 * (&m + m.transpose());
        Self { m: sym }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &DVector<f64>) -> Self {
        Self {
            m: DMatrix::from_diagonal(diag),
        }
    }

    /// Builds the symmetric matrix with `f(i, j)` on and above the diagonal.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Squared Frobenius distance `|A - B|_F^2`.
    pub fn frobenius_dist2(&self, other: &SymMatrix) -> f64 {
        (&self.m - &other.m).norm_squared()
    }

    pub fn frobenius_dist(&self, other: &SymMatrix) -> f64 {
        self.frobenius_dist2(other).sqrt()
    }

    /// Frobenius inner product `<A, B> = tr(A B)`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.m.dotc(&other.m)
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix { m: &self.m * c }
    }

    /// `A + c * B`; the mirror-descent update shape.
    pub fn add_scaled(&self, c: f64, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m + c * &other.m,
        }
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.m * v
    }

    /// Quadratic form `v^T A v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.m * v))
    }

    /// Eigendecomposition with eigenvalues sorted descending; ties keep the
    /// solver's original order. Eigenvector signs are unspecified.
    pub fn eig(&self) -> Result<EigenPair, SpectralError> {
        let dim = self.dim();
        // 30 QR sweeps per eigenvalue is the classic convergence budget.
        let max_niter = 30 * dim.max(4);
        let se = nalgebra::SymmetricEigen::try_new(self.m.clone(), f64::EPSILON, max_niter)
            .ok_or(SpectralError::EigenFailed { dim })?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            se.eigenvalues[b]
                .partial_cmp(&se.eigenvalues[a])
                .expect("finite eigenvalues")
                .then(a.cmp(&b))
        });
        let values = DVector::from_iterator(dim, order.iter().map(|&i| se.eigenvalues[i]));
        let vectors = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| se.eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        Ok(EigenPair { vectors, values })
    }

    /// Symmetric positive definite square root: `R` with `R R = A`.
    pub fn spd_sqrt(&self) -> Result<SymMatrix, SpectralError> {
        let eig = self.eig()?;
        let lambda_min = eig.values[self.dim() - 1];
        if lambda_min <= 0.0 {
            return Err(SpectralError::NotPositiveDefinite { lambda_min });
        }
        Ok(eig.recompose_with(|l| l.sqrt()))
    }

    /// Inverse of a symmetric positive definite matrix.
    pub fn spd_inv(&self) -> Result<SymMatrix, SpectralError> {
        let eig = self.eig()?;
        let lambda_min = eig.values[self.dim() - 1];
        if lambda_min <= 0.0 {
            return Err(SpectralError::NotPositiveDefinite { lambda_min });
        }
        Ok(eig.recompose_with(|l| 1.0 / l))
    }

    /// `log det A = sum_i ln(lambda_i)` for SPD `A`.
    pub fn log_det(&self) -> Result<f64, SpectralError> {
        let eig = self.eig()?;
        let lambda_min = eig.values[self.dim() - 1];
        if lambda_min <= 0.0 {
            return Err(SpectralError::NotPositiveDefinite { lambda_min });
        }
        Ok(eig.values.iter().map(|l| l.ln()).sum())
    }
}

impl std::ops::Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m + &rhs.m,
        }
    }
}

impl std::ops::Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m - &rhs.m,
        }
    }
}

/// Orthonormal eigenvectors `U` (columns) and descending eigenvalues of a
/// symmetric matrix, with `U diag(values) U^T` reconstructing the input.
#[derive(Debug, Clone)]
pub struct EigenPair {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl EigenPair {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.values[self.dim() - 1]
    }

    /// `U diag(values) U^T`, re-symmetrized.
    pub fn reconstruct(&self) -> SymMatrix {
        self.recompose_with(|l| l)
    }

    /// `U diag(f(lambda_i)) U^T`, re-symmetrized to keep symmetry exact.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = DMatrix::from_diagonal(&self.values.map(f));
        SymMatrix::symmetrize(&self.vectors * d * self.vectors.transpose())
    }

    /// Replaces the eigenvalues, keeping the eigenvectors. The caller must
    /// preserve descending order (clamping does).
    pub fn with_values(&self, values: DVector<f64>) -> EigenPair {
        debug_assert_eq!(values.len(), self.dim());
        EigenPair {
            vectors: self.vectors.clone(),
            values,
        }
    }
}

/// Spectral bounds `(tau, zeta)` with `0 < tau <= zeta`, defining the
/// covariance interval `1/zeta*I <= S <= 1/tau*I` and its inverse image
/// `tau*I <= X <= zeta*I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintBox {
    tau: f64,
    zeta: f64,
}

impl ConstraintBox {
    pub fn new(tau: f64, zeta: f64) -> Result<Self, SpectralError> {
        if !(tau > 0.0 && zeta >= tau && zeta.is_finite()) {
            return Err(SpectralError::BadBox { tau, zeta });
        }
        Ok(Self { tau, zeta })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Projects a symmetric matrix onto the inverse-covariance interval by
    /// clamping its eigenvalues to `[tau, zeta]`. Frobenius-nearest point.
    pub fn project_inv(&self, a: &SymMatrix) -> Result<SymMatrix, SpectralError> {
        Ok(self.project_inv_eig(a)?.reconstruct())
    }

    /// Same as [`project_inv`](Self::project_inv) but returns the clamped
    /// eigendecomposition, so callers that need the factors (the optimizer
    /// does, every iteration) avoid a second decomposition.
    pub fn project_inv_eig(&self, a: &SymMatrix) -> Result<EigenPair, SpectralError> {
        let eig = a.eig()?;
        let clamped = eig.values.map(|l| l.clamp(self.tau, self.zeta));
        Ok(eig.with_values(clamped))
    }

    /// Projects onto the covariance interval: eigenvalues clamped to
    /// `[1/zeta, 1/tau]`.
    pub fn project_cov(&self, a: &SymMatrix) -> Result<SymMatrix, SpectralError> {
        let eig = a.eig()?;
        let (lo, hi) = (1.0 / self.zeta, 1.0 / self.tau);
        Ok(eig.recompose_with(|l| l.clamp(lo, hi)))
    }

    /// Whether all eigenvalues lie in `[tau - tol, zeta + tol]`.
    pub fn contains_inv(&self, a: &SymMatrix, tol: f64) -> Result<bool, SpectralError> {
        let eig = a.eig()?;
        Ok(eig.lambda_min() >= self.tau - tol && eig.lambda_max() <= self.zeta + tol)
    }

    /// Whether all eigenvalues lie in `[1/zeta - tol, 1/tau + tol]`.
    pub fn contains_cov(&self, a: &SymMatrix, tol: f64) -> Result<bool, SpectralError> {
        let eig = a.eig()?;
        Ok(eig.lambda_min() >= 1.0 / self.zeta - tol && eig.lambda_max() <= 1.0 / self.tau + tol)
    }
}

/// Bregman divergence induced by the log-det mirror map
/// `R(S) = -(alpha^2/2) log det S`:
///
/// `B(S1, S2) = -(alpha^2/2) (log det(S1 S2^-1) - <S2^-1, S1> + d)`.
///
/// Nonnegative, zero iff `S1 == S2`, and asymmetric in its arguments.
pub fn bregman_log_det(s1: &SymMatrix, s2: &SymMatrix, alpha: f64) -> Result<f64, SpectralError> {
    if s1.dim() != s2.dim() {
        return Err(SpectralError::DimMismatch {
            left: s1.dim(),
            right: s2.dim(),
        });
    }
    let ld1 = s1.log_det()?;
    let ld2 = s2.log_det()?;
    let s2_inv = s2.spd_inv()?;
    let d = s1.dim() as f64;
    Ok(-(alpha * alpha / 2.0) * (ld1 - ld2 - s2_inv.dot(s1) + d))
}

/// Haar-like random orthogonal matrix: QR of a Gaussian matrix with the sign
/// of `diag(R)` fixed so the result is deterministic per RNG stream.
pub fn random_orthogonal(dim: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Random SPD matrix with eigenvalues drawn uniformly from `[lo, hi]` and a
/// random orthogonal eigenbasis.
pub fn random_spd(dim: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> SymMatrix {
    let q = random_orthogonal(dim, rng);
    let diag = DVector::from_fn(dim, |_, _| rng.random_range(lo..=hi));
    SymMatrix::symmetrize(&q * DMatrix::from_diagonal(&diag) * q.transpose())
}
