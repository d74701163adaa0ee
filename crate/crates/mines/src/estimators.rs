//! Seeded Gaussian direction batches and the stochastic estimators driving
//! the optimizers: the antithetic natural-gradient estimate for the mean,
//! the covariance-inverse mirror-gradient estimate, its closed form on
//! quadratics, and the plain derivative-free gradient estimate.
//!
//! One optimizer iteration shares a single direction batch and a single set
//! of antithetic evaluations between the mean and covariance estimates, so a
//! batch of size `b` costs exactly `2b + 1` queries (`2b` antithetic pairs
//! plus one evaluation at the mean).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::objectives::Objective;
use crate::spectral::{EigenPair, SpectralError, SymMatrix};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("alpha must be positive and finite, got {alpha}")]
    BadAlpha { alpha: f64 },
    #[error("objective returned non-finite value {value} at {point:?}")]
    NonFiniteEval { value: f64, point: Vec<f64> },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("direction batch is empty")]
    EmptyBatch,
}

/// A batch of standard-normal directions from a counter-based stream:
/// the same `(seed, draw_index, b, d)` always reproduces the same batch,
/// regardless of what was sampled before, so traces stay reproducible under
/// any evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionBatch {
    dirs: Vec<DVector<f64>>,
    seed: u64,
    draw_index: u64,
}

impl DirectionBatch {
    /// Draws `b` i.i.d. `N(0, I_d)` directions from stream `draw_index` of
    /// the ChaCha generator keyed by `seed`.
    pub fn sample(d: usize, b: usize, seed: u64, draw_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(draw_index);
        let dirs = (0..b)
            .map(|_| DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        Self {
            dirs,
            seed,
            draw_index,
        }
    }

    /// Wraps explicit directions (hand-built batches in tests and oracles).
    pub fn from_dirs(dirs: Vec<DVector<f64>>) -> Self {
        Self {
            dirs,
            seed: 0,
            draw_index: 0,
        }
    }

    pub fn dirs(&self) -> &[DVector<f64>] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draw_index(&self) -> u64 {
        self.draw_index
    }
}

/// Search distribution `N(mu, alpha^2 S)` parameterized by the mean, the
/// covariance-inverse `S^-1` (the mirror-descent state), and the smoothing
/// scale `alpha`. Caches the eigendecomposition of `S^-1` so `S`, `S^(1/2)`
/// and `S^(-1/2)` come for free.
#[derive(Debug, Clone)]
pub struct SearchDistribution {
    mu: DVector<f64>,
    sigma_inv: SymMatrix,
    alpha: f64,
    eig: EigenPair,
    sigma: SymMatrix,
    sigma_sqrt: SymMatrix,
    sigma_inv_sqrt: SymMatrix,
}

impl SearchDistribution {
    pub fn new(
        mu: DVector<f64>,
        sigma_inv: SymMatrix,
        alpha: f64,
    ) -> Result<Self, EstimatorError> {
        if mu.len() != sigma_inv.dim() {
            return Err(EstimatorError::DimMismatch {
                left: mu.len(),
                right: sigma_inv.dim(),
            });
        }
        let eig = sigma_inv.eig()?;
        Self::from_parts(mu, sigma_inv, eig, alpha)
    }

    /// Builds from an eigendecomposition of the covariance inverse, as handed
    /// back by the spectral projection; skips the redundant decomposition.
    pub fn from_eigenpair(
        mu: DVector<f64>,
        eig: EigenPair,
        alpha: f64,
    ) -> Result<Self, EstimatorError> {
        if mu.len() != eig.dim() {
            return Err(EstimatorError::DimMismatch {
                left: mu.len(),
                right: eig.dim(),
            });
        }
        let sigma_inv = eig.reconstruct();
        Self::from_parts(mu, sigma_inv, eig, alpha)
    }

    fn from_parts(
        mu: DVector<f64>,
        sigma_inv: SymMatrix,
        eig: EigenPair,
        alpha: f64,
    ) -> Result<Self, EstimatorError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(EstimatorError::BadAlpha { alpha });
        }
        let lambda_min = eig.lambda_min();
        if lambda_min <= 0.0 {
            return Err(SpectralError::NotPositiveDefinite { lambda_min }.into());
        }
        let sigma = eig.recompose_with(|l| 1.0 / l);
        let sigma_sqrt = eig.recompose_with(|l| 1.0 / l.sqrt());
        let sigma_inv_sqrt = eig.recompose_with(|l| l.sqrt());
        Ok(Self {
            mu,
            sigma_inv,
            alpha,
            eig,
            sigma,
            sigma_sqrt,
            sigma_inv_sqrt,
        })
    }

    /// Same covariance state, new mean; reuses every cached factor.
    pub fn with_mu(&self, mu: DVector<f64>) -> Result<Self, EstimatorError> {
        if mu.len() != self.dim() {
            return Err(EstimatorError::DimMismatch {
                left: mu.len(),
                right: self.dim(),
            });
        }
        let mut next = self.clone();
        next.mu = mu;
        Ok(next)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma_inv(&self) -> &SymMatrix {
        &self.sigma_inv
    }

    pub fn sigma_inv_eig(&self) -> &EigenPair {
        &self.eig
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn sigma_sqrt(&self) -> &SymMatrix {
        &self.sigma_sqrt
    }

    pub fn sigma_inv_sqrt(&self) -> &SymMatrix {
        &self.sigma_inv_sqrt
    }
}

/// The `2b` antithetic values `f(mu +- alpha S^(1/2) u_i)`, evaluated in
/// ascending batch order (plus before minus).
#[derive(Debug, Clone)]
pub struct AntitheticEvals {
    pub f_plus: Vec<f64>,
    pub f_minus: Vec<f64>,
}

fn check_finite(value: f64, point: &DVector<f64>) -> Result<f64, EstimatorError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EstimatorError::NonFiniteEval {
            value,
            point: point.iter().copied().collect(),
        })
    }
}

/// Evaluates the antithetic pair for each direction; exactly `2b` queries.
pub fn evaluate_antithetic(
    f: &Objective,
    dist: &SearchDistribution,
    batch: &DirectionBatch,
) -> Result<AntitheticEvals, EstimatorError> {
    if batch.is_empty() {
        return Err(EstimatorError::EmptyBatch);
    }
    if f.dim() != dist.dim() {
        return Err(EstimatorError::DimMismatch {
            left: dist.dim(),
            right: f.dim(),
        });
    }
    let mut f_plus = Vec::with_capacity(batch.len());
    let mut f_minus = Vec::with_capacity(batch.len());
    for u in batch.dirs() {
        let step = dist.sigma_sqrt().mul_vec(u).scale(dist.alpha());
        let xp = dist.mu() + &step;
        let xm = dist.mu() - &step;
        f_plus.push(check_finite(f.eval(&xp), &xp)?);
        f_minus.push(check_finite(f.eval(&xm), &xm)?);
    }
    Ok(AntitheticEvals { f_plus, f_minus })
}

/// Antithetic natural-gradient estimate for the mean update:
///
/// `(1/b) sum_i [(f(mu + a S^(1/2) u_i) - f(mu - a S^(1/2) u_i)) / 2a] S^(1/2) u_i`.
///
/// Consumes exactly `2b` queries.
pub fn grad_estimate(
    f: &Objective,
    dist: &SearchDistribution,
    batch: &DirectionBatch,
) -> Result<DVector<f64>, EstimatorError> {
    let evals = evaluate_antithetic(f, dist, batch)?;
    Ok(grad_from_evals(dist, batch, &evals))
}

/// Assembles the mean-update estimate from already-computed evaluations.
pub fn grad_from_evals(
    dist: &SearchDistribution,
    batch: &DirectionBatch,
    evals: &AntitheticEvals,
) -> DVector<f64> {
    let b = batch.len() as f64;
    let two_alpha = 2.0 * dist.alpha();
    let mut g = DVector::zeros(dist.dim());
    for (i, u) in batch.dirs().iter().enumerate() {
        let w = (evals.f_plus[i] - evals.f_minus[i]) / two_alpha;
        g += dist.sigma_sqrt().mul_vec(u).scale(w);
    }
    g / b
}

/// Covariance-inverse mirror-gradient estimate:
///
/// `(1/(2 b a^2)) sum_i [(f- + f+ - 2 f(mu)) (S^(-1/2) u_i u_i^T S^(-1/2) - S^-1)] - S^-1`.
///
/// Standalone it consumes `2b + 1` queries; optimizer loops reuse the
/// antithetic evaluations from the mean estimate and pay only the extra
/// `f(mu)` query via [`cov_grad_from_evals`].
pub fn cov_grad_estimate(
    f: &Objective,
    dist: &SearchDistribution,
    batch: &DirectionBatch,
) -> Result<SymMatrix, EstimatorError> {
    let evals = evaluate_antithetic(f, dist, batch)?;
    let f_mu = check_finite(f.eval(dist.mu()), dist.mu())?;
    Ok(cov_grad_from_evals(dist, batch, &evals, f_mu))
}

/// Assembles the covariance estimate from shared evaluations.
pub fn cov_grad_from_evals(
    dist: &SearchDistribution,
    batch: &DirectionBatch,
    evals: &AntitheticEvals,
    f_mu: f64,
) -> SymMatrix {
    let d = dist.dim();
    let mut acc = DMatrix::<f64>::zeros(d, d);
    for (i, u) in batch.dirs().iter().enumerate() {
        let curvature = evals.f_minus[i] + evals.f_plus[i] - 2.0 * f_mu;
        let v = dist.sigma_inv_sqrt().mul_vec(u);
        // acc += curvature * (v v^T - S^-1)
        acc.ger(curvature, &v, &v, 1.0);
        acc -= dist.sigma_inv().as_matrix() * curvature;
    }
    let scale = 1.0 / (2.0 * batch.len() as f64 * dist.alpha() * dist.alpha());
    let g = acc * scale - dist.sigma_inv().as_matrix();
    SymMatrix::symmetrize(g)
}

/// Closed form of the covariance estimate when the objective is the
/// quadratic `x -> x^T H x / 2 + linear`:
///
/// `(1/(2b)) sum_i u_i^T S^(1/2) H S^(1/2) u_i (S^(-1/2) u_i u_i^T S^(-1/2) - S^-1) - S^-1`.
///
/// Agrees with [`cov_grad_estimate`] on the same batch without spending
/// queries; the antithetic curvature term is exact for quadratics.
pub fn cov_grad_quadratic_oracle(
    hess: &SymMatrix,
    dist: &SearchDistribution,
    batch: &DirectionBatch,
) -> Result<SymMatrix, EstimatorError> {
    if hess.dim() != dist.dim() {
        return Err(EstimatorError::DimMismatch {
            left: hess.dim(),
            right: dist.dim(),
        });
    }
    if batch.is_empty() {
        return Err(EstimatorError::EmptyBatch);
    }
    let d = dist.dim();
    let mut acc = DMatrix::<f64>::zeros(d, d);
    for u in batch.dirs() {
        let su = dist.sigma_sqrt().mul_vec(u);
        let q = hess.quad_form(&su);
        let v = dist.sigma_inv_sqrt().mul_vec(u);
        acc.ger(q, &v, &v, 1.0);
        acc -= dist.sigma_inv().as_matrix() * q;
    }
    let g = acc / (2.0 * batch.len() as f64) - dist.sigma_inv().as_matrix();
    Ok(SymMatrix::symmetrize(g))
}

/// Plain derivative-free two-point gradient estimate (identity covariance):
///
/// `(1/b) sum_i [(f(mu + a u_i) - f(mu - a u_i)) / 2a] u_i`.
///
/// Consumes exactly `2b` queries.
pub fn df_grad_estimate(
    f: &Objective,
    mu: &DVector<f64>,
    alpha: f64,
    batch: &DirectionBatch,
) -> Result<DVector<f64>, EstimatorError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(EstimatorError::BadAlpha { alpha });
    }
    if batch.is_empty() {
        return Err(EstimatorError::EmptyBatch);
    }
    if f.dim() != mu.len() {
        return Err(EstimatorError::DimMismatch {
            left: mu.len(),
            right: f.dim(),
        });
    }
    let mut g = DVector::zeros(mu.len());
    for u in batch.dirs() {
        let step = u.scale(alpha);
        let xp = mu + &step;
        let xm = mu - &step;
        let fp = check_finite(f.eval(&xp), &xp)?;
        let fm = check_finite(f.eval(&xm), &xm)?;
        g += u.scale((fp - fm) / (2.0 * alpha));
    }
    Ok(g / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::make_quadratic;
    use crate::spectral::random_spd;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_dist(d: usize, alpha: f64) -> SearchDistribution {
        SearchDistribution::new(DVector::zeros(d), SymMatrix::identity(d), alpha).unwrap()
    }

    #[test]
    fn direction_batches_are_reproducible() {
        let a = DirectionBatch::sample(7, 3, 42, 9);
        let b = DirectionBatch::sample(7, 3, 42, 9);
        assert_eq!(a, b);
        let c = DirectionBatch::sample(7, 3, 42, 10);
        assert_ne!(a, c);
        let d = DirectionBatch::sample(7, 3, 43, 9);
        assert_ne!(a, d);
    }

    #[test]
    fn direction_stream_mean_and_variance() {
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for chunk in 0..100u64 {
            let batch = DirectionBatch::sample(n / 100, 1, 777, chunk);
            for v in batch.dirs()[0].iter() {
                sum += v;
                sum_sq += v * v;
            }
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 0.01, "variance {var}");
    }

    #[test]
    fn search_distribution_caches_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigma_inv = random_spd(5, 0.5, 4.0, &mut rng);
        let dist = SearchDistribution::new(DVector::zeros(5), sigma_inv.clone(), 0.1).unwrap();
        let sigma_direct = sigma_inv.spd_inv().unwrap();
        let rel = dist.sigma().frobenius_dist(&sigma_direct) / sigma_direct.frobenius_norm();
        assert!(rel <= 1e-8);
        let sq = SymMatrix::new(dist.sigma_sqrt().as_matrix() * dist.sigma_sqrt().as_matrix())
            .unwrap();
        let rel_sq = sq.frobenius_dist(dist.sigma()) / dist.sigma().frobenius_norm();
        assert!(rel_sq <= 1e-8);
        let prod = SymMatrix::new(
            dist.sigma_inv_sqrt().as_matrix() * dist.sigma_inv_sqrt().as_matrix(),
        )
        .unwrap();
        assert!(prod.frobenius_dist(&sigma_inv) / sigma_inv.frobenius_norm() <= 1e-8);
    }

    #[test]
    fn search_distribution_rejects_bad_inputs() {
        let bad = SymMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, -2.0]));
        assert!(SearchDistribution::new(DVector::zeros(2), bad, 0.1).is_err());
        assert!(
            SearchDistribution::new(DVector::zeros(2), SymMatrix::identity(2), 0.0).is_err()
        );
        assert!(
            SearchDistribution::new(DVector::zeros(3), SymMatrix::identity(2), 0.1).is_err()
        );
    }

    #[test]
    fn grad_estimate_single_direction_hand_case() {
        // f = |x|^2/2, mu = e1, u = e1: the antithetic difference is exactly
        // 2 alpha <mu, u>, so the estimate is <mu, u> u = e1 for any alpha.
        let (f, _) = make_quadratic(2, 1.0, 1.0, 0).unwrap();
        for alpha in [1e-3, 0.1, 1.0] {
            let dist = SearchDistribution::new(
                DVector::from_row_slice(&[1.0, 0.0]),
                SymMatrix::identity(2),
                alpha,
            )
            .unwrap();
            let batch = DirectionBatch::from_dirs(vec![DVector::from_row_slice(&[1.0, 0.0])]);
            let g = grad_estimate(&f, &dist, &batch).unwrap();
            assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
        }
    }

    #[test]
    fn antithetic_pair_adds_nothing() {
        let (f, _) = make_quadratic(3, 0.5, 5.0, 9).unwrap();
        let dist = SearchDistribution::new(
            DVector::from_row_slice(&[0.3, -1.0, 2.0]),
            SymMatrix::identity(3),
            0.05,
        )
        .unwrap();
        let u = DirectionBatch::sample(3, 1, 5, 1).dirs()[0].clone();
        let single = DirectionBatch::from_dirs(vec![u.clone()]);
        let mirrored = DirectionBatch::from_dirs(vec![u.clone(), -u]);
        let g1 = grad_estimate(&f, &dist, &single).unwrap();
        let g2 = grad_estimate(&f, &dist, &mirrored).unwrap();
        assert!((g1 - g2).norm() < 1e-12);
    }

    #[test]
    fn grad_estimate_query_cost_is_2b() {
        let (f, _) = make_quadratic(4, 1.0, 3.0, 2).unwrap();
        let dist = unit_dist(4, 0.1);
        let batch = DirectionBatch::sample(4, 6, 3, 1);
        let before = f.query_count();
        grad_estimate(&f, &dist, &batch).unwrap();
        assert_eq!(f.query_count() - before, 12);
        let before = f.query_count();
        cov_grad_estimate(&f, &dist, &batch).unwrap();
        assert_eq!(f.query_count() - before, 13); // 2b + 1
    }

    #[test]
    fn grad_estimate_mean_matches_natural_gradient() {
        // Monte Carlo vs Sigma * grad f on a quadratic (exact antithetic)
        let d = 4;
        let (f, h) = make_quadratic(d, 1.0, 6.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sigma_inv = random_spd(d, 0.8, 3.0, &mut rng);
        let mu = DVector::from_row_slice(&[0.5, -1.0, 0.25, 2.0]);
        let dist = SearchDistribution::new(mu.clone(), sigma_inv, 0.5).unwrap();
        let target = dist.sigma().mul_vec(&h.mul_vec(&mu));

        let n = 40_000;
        let mut mean = DVector::zeros(d);
        let mut sq = DVector::zeros(d);
        for j in 0..n {
            let batch = DirectionBatch::sample(d, 1, 202, j as u64);
            let g = grad_estimate(&f, &dist, &batch).unwrap();
            sq += g.component_mul(&g);
            mean += g;
        }
        let mean = mean / n as f64;
        for c in 0..d {
            let var = sq[c] / n as f64 - mean[c] * mean[c];
            let se = (var / n as f64).sqrt();
            assert!(
                (mean[c] - target[c]).abs() <= 5.0 * se,
                "component {c}: {} vs {} (se {se})",
                mean[c],
                target[c]
            );
        }
    }

    #[test]
    fn cov_grad_hand_case() {
        // H = I, Sigma = I, u = e1, d = 2: G = (1/2)(diag(1,0) - I) - I
        let (f, _) = make_quadratic(2, 1.0, 1.0, 0).unwrap();
        let dist = unit_dist(2, 0.7);
        let batch = DirectionBatch::from_dirs(vec![DVector::from_row_slice(&[1.0, 0.0])]);
        let g = cov_grad_estimate(&f, &dist, &batch).unwrap();
        let want = SymMatrix::from_diagonal(&DVector::from_row_slice(&[-1.0, -1.5]));
        assert!(g.frobenius_dist(&want) < 1e-12);
    }

    #[test]
    fn cov_grad_constant_objective() {
        let f = Objective::new(3, |_| 4.25);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let sigma_inv = random_spd(3, 0.5, 2.0, &mut rng);
        let dist = SearchDistribution::new(DVector::zeros(3), sigma_inv.clone(), 0.2).unwrap();
        let batch = DirectionBatch::sample(3, 4, 3, 0);
        let g = cov_grad_estimate(&f, &dist, &batch).unwrap();
        let want = sigma_inv.scale(-1.0);
        assert!(g.frobenius_dist(&want) < 1e-12);
    }

    #[test]
    fn cov_grad_matches_quadratic_oracle() {
        let d = 5;
        let (f, h) = make_quadratic(d, 1.0, 10.0, 77).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sigma_inv = random_spd(d, 0.6, 5.0, &mut rng);
        let mu = DVector::from_fn(d, |i, _| 0.2 * i as f64 - 0.3);
        let dist = SearchDistribution::new(mu, sigma_inv, 0.8).unwrap();
        for j in 0..100 {
            let batch = DirectionBatch::sample(d, 2, 31, j);
            let est = cov_grad_estimate(&f, &dist, &batch).unwrap();
            let oracle = cov_grad_quadratic_oracle(&h, &dist, &batch).unwrap();
            let rel = est.frobenius_dist(&oracle) / oracle.frobenius_norm();
            assert!(rel <= 1e-10, "batch {j}: rel {rel}");
        }
    }

    #[test]
    fn cov_grad_oracle_is_linear_in_batch() {
        let d = 3;
        let (_, h) = make_quadratic(d, 1.0, 4.0, 1).unwrap();
        let dist = unit_dist(d, 0.3);
        let b2 = DirectionBatch::sample(d, 2, 5, 2);
        let u0 = DirectionBatch::from_dirs(vec![b2.dirs()[0].clone()]);
        let u1 = DirectionBatch::from_dirs(vec![b2.dirs()[1].clone()]);
        let g2 = cov_grad_quadratic_oracle(&h, &dist, &b2).unwrap();
        let g0 = cov_grad_quadratic_oracle(&h, &dist, &u0).unwrap();
        let g1 = cov_grad_quadratic_oracle(&h, &dist, &u1).unwrap();
        let avg = g0.add_scaled(1.0, &g1).scale(0.5);
        assert!(g2.frobenius_dist(&avg) < 1e-12);
    }

    #[test]
    fn cov_grad_oracle_fixed_point_mean_is_zero() {
        // H = Sigma^-1: E[G] = H - Sigma^-1 = 0
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let h = random_spd(d, 0.5, 3.0, &mut rng);
        let dist = SearchDistribution::new(DVector::zeros(d), h.clone(), 0.5).unwrap();
        let n = 30_000;
        let mut mean = DMatrix::<f64>::zeros(d, d);
        let mut sq = DMatrix::<f64>::zeros(d, d);
        for j in 0..n {
            let batch = DirectionBatch::sample(d, 1, 99, j as u64);
            let g = cov_grad_quadratic_oracle(&h, &dist, &batch).unwrap();
            sq += g.as_matrix().component_mul(g.as_matrix());
            mean += g.as_matrix();
        }
        mean /= n as f64;
        for i in 0..d {
            for j in 0..d {
                let var = sq[(i, j)] / n as f64 - mean[(i, j)] * mean[(i, j)];
                let se = (var / n as f64).sqrt().max(1e-12);
                assert!(
                    mean[(i, j)].abs() <= 5.0 * se,
                    "entry ({i},{j}): {} (se {se})",
                    mean[(i, j)]
                );
            }
        }
    }

    #[test]
    fn df_equals_natural_gradient_at_identity_covariance() {
        let (f, _) = make_quadratic(4, 0.5, 7.0, 3).unwrap();
        let mu = DVector::from_row_slice(&[1.0, -0.5, 0.0, 2.0]);
        let dist = SearchDistribution::new(mu.clone(), SymMatrix::identity(4), 0.05).unwrap();
        let batch = DirectionBatch::sample(4, 3, 17, 4);
        let g_nat = grad_estimate(&f, &dist, &batch).unwrap();
        let g_df = df_grad_estimate(&f, &mu, 0.05, &batch).unwrap();
        assert!((g_nat - g_df).norm() <= 1e-12);
    }

    #[test]
    fn df_is_exact_on_linear_functions() {
        let c = DVector::from_row_slice(&[2.0, -1.0, 0.5]);
        let cc = c.clone();
        let f = Objective::new(3, move |x| cc.dot(x));
        let u = DirectionBatch::sample(3, 1, 1, 1).dirs()[0].clone();
        let g = df_grad_estimate(
            &f,
            &DVector::zeros(3),
            3.7,
            &DirectionBatch::from_dirs(vec![u.clone()]),
        )
        .unwrap();
        let want = u.scale(c.dot(&u));
        assert!((g - want).norm() < 1e-12);
    }

    #[test]
    fn df_mean_matches_gradient() {
        let d = 3;
        let (f, h) = make_quadratic(d, 1.0, 5.0, 21).unwrap();
        let mu = DVector::from_row_slice(&[0.7, -0.2, 1.1]);
        let grad = h.mul_vec(&mu);
        let n = 30_000;
        let mut mean = DVector::zeros(d);
        let mut sq = DVector::zeros(d);
        for j in 0..n {
            let batch = DirectionBatch::sample(d, 1, 303, j as u64);
            let g = df_grad_estimate(&f, &mu, 0.05, &batch).unwrap();
            sq += g.component_mul(&g);
            mean += g;
        }
        mean /= n as f64;
        for c in 0..d {
            let var = sq[c] / n as f64 - mean[c] * mean[c];
            let se = (var / n as f64).sqrt();
            assert!((mean[c] - grad[c]).abs() <= 5.0 * se + 1e-3);
        }
    }

    #[test]
    fn non_finite_evaluation_is_reported_with_the_point() {
        let f = Objective::new(2, |x| if x[0] > 0.5 { f64::INFINITY } else { 1.0 });
        let dist = unit_dist(2, 1.0);
        let batch = DirectionBatch::from_dirs(vec![DVector::from_row_slice(&[1.0, 0.0])]);
        match grad_estimate(&f, &dist, &batch) {
            Err(EstimatorError::NonFiniteEval { point, .. }) => {
                assert!((point[0] - 1.0).abs() < 1e-12)
            }
            other => panic!("expected NonFiniteEval, got {other:?}"),
        }
    }

    #[test]
    fn constant_f_gives_zero_gradient() {
        let f = Objective::new(3, |_| 2.0);
        let dist = unit_dist(3, 0.4);
        let batch = DirectionBatch::sample(3, 5, 6, 6);
        let g = grad_estimate(&f, &dist, &batch).unwrap();
        assert!(g.norm() < 1e-14);
    }
}
