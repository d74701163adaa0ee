//! Independent numerical oracles for the estimator and convergence claims:
//! closed-form Gaussian quadratic-form moments against Monte Carlo, estimator
//! mean/variance identities, the regularized objective on quadratics,
//! power-law rate fitting, and the spectral sandwich test.
//!
//! Monte Carlo checks use jackknife standard errors over 100 blocks (higher
//! moments are heavy-tailed; the plain standard error underestimates) and a
//! four-standard-error pass criterion.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::estimators::{
    cov_grad_estimate, grad_estimate, DirectionBatch, EstimatorError, SearchDistribution,
};
use crate::objectives::{make_quadratic, ConfigError, Objective};
use crate::optimizers::{eta1_default, mines_run, MinesConfig, RunError, RunFailure, RunTrace};
use crate::spectral::{bregman_log_det, random_spd, ConstraintBox, SpectralError, SymMatrix};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const JACKKNIFE_BLOCKS: usize = 100;
const MIN_MC_SAMPLES: usize = 10_000;
const SE_MULTIPLIER: f64 = 4.0;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("moment order must be in 1..=4, got {s}")]
    BadOrder { s: u32 },
    #[error("need at least {need} Monte Carlo samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("fit window [{k_lo}, {k_hi}] is empty or not covered by the series")]
    BadWindow { k_lo: usize, k_hi: usize },
    #[error("nonpositive value {value} at k = {k} inside the fit window (divergence?)")]
    NonPositive { k: usize, value: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("experiment run failed: {0}")]
    Run(String),
}

impl From<RunError> for VerifyError {
    fn from(e: RunError) -> Self {
        VerifyError::Run(e.to_string())
    }
}

impl From<RunFailure> for VerifyError {
    fn from(e: RunFailure) -> Self {
        VerifyError::Run(e.to_string())
    }
}

/// Closed-form `E[(u^T A u)^s]` for `u ~ N(0, I)` and symmetric `A`, in
/// terms of the traces `t_k = tr(A^k)`:
///
/// * s=1: `t1`
/// * s=2: `t1^2 + 2 t2`
/// * s=3: `t1^3 + 6 t1 t2 + 8 t3`
/// * s=4: `t1^4 + 32 t1 t3 + 12 t2^2 + 12 t1^2 t2 + 48 t4`
pub fn beta_formula(s: u32, a: &SymMatrix) -> Result<f64, VerifyError> {
    let eig = a.eig()?;
    let tk = |p: i32| -> f64 { eig.values().iter().map(|l| l.powi(p)).sum() };
    let (t1, t2, t3, t4) = (tk(1), tk(2), tk(3), tk(4));
    match s {
        1 => Ok(t1),
        2 => Ok(t1 * t1 + 2.0 * t2),
        3 => Ok(t1.powi(3) + 6.0 * t1 * t2 + 8.0 * t3),
        4 => Ok(t1.powi(4) + 32.0 * t1 * t3 + 12.0 * t2 * t2 + 12.0 * t1 * t1 * t2 + 48.0 * t4),
        s => Err(VerifyError::BadOrder { s }),
    }
}

/// One Monte Carlo check of a closed-form value: blocked mean, jackknife
/// standard error, pass iff `|formula - mc| <= 4 se`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub s: u32,
    pub formula_value: f64,
    pub mc_value: f64,
    pub mc_se: f64,
    pub n_samples: usize,
    pub pass: bool,
}

fn jack_mean(block_means: &[f64]) -> f64 {
    block_means.iter().sum::<f64>() / block_means.len() as f64
}

/// Jackknife standard error of the mean over equal-sized blocks.
fn jack_se(block_means: &[f64]) -> f64 {
    let b = block_means.len() as f64;
    let total: f64 = block_means.iter().sum();
    let loo: Vec<f64> = block_means.iter().map(|m| (total - m) / (b - 1.0)).collect();
    let loo_mean = loo.iter().sum::<f64>() / b;
    let ss: f64 = loo.iter().map(|x| (x - loo_mean) * (x - loo_mean)).sum();
    ((b - 1.0) / b * ss).sqrt()
}

/// Monte Carlo check of [`beta_formula`]; draws `u ~ N(0, I)` from seeded
/// streams, one stream per jackknife block, so the estimate is independent
/// of evaluation order.
pub fn moment_check(
    s: u32,
    a: &SymMatrix,
    n_samples: usize,
    seed: u64,
) -> Result<MomentReport, VerifyError> {
    let formula_value = beta_formula(s, a)?;
    if n_samples < MIN_MC_SAMPLES {
        return Err(VerifyError::TooFewSamples {
            need: MIN_MC_SAMPLES,
            got: n_samples,
        });
    }
    let d = a.dim();
    let per_block = n_samples / JACKKNIFE_BLOCKS;
    let mut block_means = Vec::with_capacity(JACKKNIFE_BLOCKS);
    for block in 0..JACKKNIFE_BLOCKS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block as u64);
        let mut sum = 0.0;
        for _ in 0..per_block {
            let u = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            sum += a.quad_form(&u).powi(s as i32);
        }
        block_means.push(sum / per_block as f64);
    }
    let mc_value = jack_mean(&block_means);
    let mc_se = jack_se(&block_means);
    Ok(MomentReport {
        s,
        formula_value,
        mc_value,
        mc_se,
        n_samples: per_block * JACKKNIFE_BLOCKS,
        pass: (formula_value - mc_value).abs() <= SE_MULTIPLIER * mc_se,
    })
}

/// Monte Carlo check of the mixed-moment identity
/// `E[|u|^8 - 2 |u|^6 + d |u|^4] = d^4 + 11 d^3 + 34 d^2 + 32 d`,
/// the quantity bounding the covariance estimator's second moment.
pub fn composite_moment_check(
    d: usize,
    n_samples: usize,
    seed: u64,
) -> Result<MomentReport, VerifyError> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(VerifyError::TooFewSamples {
            need: MIN_MC_SAMPLES,
            got: n_samples,
        });
    }
    let i = SymMatrix::identity(d);
    let df = d as f64;
    let formula_value = beta_formula(4, &i)? - 2.0 * beta_formula(3, &i)? + df * beta_formula(2, &i)?;
    let per_block = n_samples / JACKKNIFE_BLOCKS;
    let mut block_means = Vec::with_capacity(JACKKNIFE_BLOCKS);
    for block in 0..JACKKNIFE_BLOCKS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block as u64);
        let mut sum = 0.0;
        for _ in 0..per_block {
            let u = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let q = u.norm_squared();
            sum += q * q * (q * q - 2.0 * q + df);
        }
        block_means.push(sum / per_block as f64);
    }
    let mc_value = jack_mean(&block_means);
    let mc_se = jack_se(&block_means);
    Ok(MomentReport {
        s: 4,
        formula_value,
        mc_value,
        mc_se,
        n_samples: per_block * JACKKNIFE_BLOCKS,
        pass: (formula_value - mc_value).abs() <= SE_MULTIPLIER * mc_se,
    })
}

/// Closed-form regularized objective on the quadratic
/// `f(x) = f0 + g0^T x + x^T H x / 2`:
///
/// `Q(mu, S) = f(mu) + (alpha^2/2) <H, S> - (alpha^2/2) log det S`.
pub fn q_alpha_quadratic(
    mu: &DVector<f64>,
    sigma: &SymMatrix,
    alpha: f64,
    hess: &SymMatrix,
    f0: f64,
    g0: &DVector<f64>,
) -> Result<f64, VerifyError> {
    let f_mu = f0 + g0.dot(mu) + 0.5 * hess.quad_form(mu);
    let a2 = alpha * alpha;
    Ok(f_mu + 0.5 * a2 * hess.dot(sigma) - 0.5 * a2 * sigma.log_det()?)
}

/// Ordinary least squares of `log(value)` on `log(k)` over a window,
/// restricted to about fifty log-spaced points so every decade weighs the
/// same. `geom_ratio` is the per-step geometric ratio over the window
/// (`(v_hi / v_lo)^(1/(k_hi - k_lo))`), the natural statistic when the decay
/// is geometric rather than polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub k_lo: usize,
    pub k_hi: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub geom_ratio: f64,
}

/// Which positive per-iteration series of a run trace to fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceField {
    CovError,
    /// Objective gap `f(mu_k) - f_star`.
    FGap { f_star: f64 },
}

/// Power-law fit over an explicit `(k, value)` series.
pub fn fit_power_law(
    series: &[(usize, f64)],
    k_lo: usize,
    k_hi: usize,
) -> Result<RateFit, VerifyError> {
    if k_lo >= k_hi {
        return Err(VerifyError::BadWindow { k_lo, k_hi });
    }
    let window: Vec<(usize, f64)> = series
        .iter()
        .copied()
        .filter(|&(k, _)| k >= k_lo && k <= k_hi)
        .collect();
    if window.is_empty() || window.first().unwrap().0 > k_lo || window.last().unwrap().0 < k_hi {
        return Err(VerifyError::BadWindow { k_lo, k_hi });
    }
    for &(k, v) in &window {
        if !(v > 0.0) {
            return Err(VerifyError::NonPositive { k, value: v });
        }
    }
    // log-spaced subsample, deduplicated; at least 20 points
    let targets: Vec<usize> = {
        let n_target = 50usize;
        let (lo, hi) = (k_lo as f64, k_hi as f64);
        let mut t: Vec<usize> = (0..n_target)
            .map(|i| {
                let frac = i as f64 / (n_target - 1) as f64;
                (lo.ln() + frac * (hi.ln() - lo.ln())).exp().round() as usize
            })
            .collect();
        t.dedup();
        t
    };
    let mut points = Vec::with_capacity(targets.len());
    for t in targets {
        // window is sorted by k; nearest record at or after t
        let pos = match window.binary_search_by_key(&t, |&(k, _)| k) {
            Ok(p) | Err(p) => p,
        };
        if pos < window.len() {
            let (k, v) = window[pos];
            points.push((k as f64, v));
        }
    }
    points.dedup_by_key(|p| p.0 as usize);
    if points.len() < 20 {
        return Err(VerifyError::BadWindow { k_lo, k_hi });
    }

    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };

    let v_lo = window.iter().find(|&&(k, _)| k >= k_lo).unwrap().1;
    let (k_last, v_hi) = *window.last().unwrap();
    let k_first = window.first().unwrap().0;
    let geom_ratio = (v_hi / v_lo).powf(1.0 / (k_last - k_first) as f64);

    Ok(RateFit {
        k_lo,
        k_hi,
        slope,
        intercept,
        r2,
        geom_ratio,
    })
}

/// Power-law fit of a trace field over `[k_lo, k_hi]`.
pub fn fit_rate(
    trace: &RunTrace,
    field: TraceField,
    k_lo: usize,
    k_hi: usize,
) -> Result<RateFit, VerifyError> {
    let series: Vec<(usize, f64)> = match field {
        TraceField::CovError => trace
            .records
            .iter()
            .filter_map(|r| r.cov_error.map(|c| (r.k, c)))
            .collect(),
        TraceField::FGap { f_star } => trace
            .records
            .iter()
            .map(|r| (r.k, r.f_mu - f_star))
            .collect(),
    };
    fit_power_law(&series, k_lo, k_hi)
}

/// Checks the spectral sandwich
/// `(1 - (sigma/4)/(L + sigma/4)) X <= H <= (4/3) X` for `X` the covariance
/// inverse, via the eigenvalues of `S^(1/2) H S^(1/2)`.
pub fn sandwich_check(
    sigma_inv: &SymMatrix,
    hess: &SymMatrix,
    sigma_strong: f64,
    l_smooth: f64,
) -> Result<bool, VerifyError> {
    if sigma_inv.dim() != hess.dim() {
        return Err(SpectralError::DimMismatch {
            left: sigma_inv.dim(),
            right: hess.dim(),
        }
        .into());
    }
    let eig = sigma_inv.eig()?;
    if eig.lambda_min() <= 0.0 {
        return Err(SpectralError::NotPositiveDefinite {
            lambda_min: eig.lambda_min(),
        }
        .into());
    }
    let sqrt_sigma = eig.recompose_with(|l| 1.0 / l.sqrt());
    let m = SymMatrix::symmetrize(
        sqrt_sigma.as_matrix() * hess.as_matrix() * sqrt_sigma.as_matrix(),
    );
    let meig = m.eig()?;
    let lower = 1.0 - (sigma_strong / 4.0) / (l_smooth + sigma_strong / 4.0);
    let upper = 4.0 / 3.0;
    Ok(meig.lambda_min() >= lower && meig.lambda_max() <= upper)
}

/// Outcome of one named verification check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) -> Self {
        let pass = (expected - actual).abs() <= tolerance;
        Self {
            name: name.into(),
            expected,
            actual,
            tolerance,
            pass,
        }
    }

    fn bounded(name: impl Into<String>, bound: f64, actual: f64) -> Self {
        Self {
            name: name.into(),
            expected: bound,
            actual,
            tolerance: 0.0,
            pass: actual <= bound,
        }
    }
}

fn random_config(
    d: usize,
    seed: u64,
) -> Result<(Objective, SymMatrix, SearchDistribution), VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX); // keep config draws off the sample streams
    let (f, h) = make_quadratic(d, 1.0, 10.0, rng.random())?;
    let sigma_inv = random_spd(d, 0.5, 4.0, &mut rng);
    let mu = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let dist = SearchDistribution::new(mu, sigma_inv, 0.5)?;
    Ok((f, h, dist))
}

/// Monte Carlo mean of the antithetic mean-update estimate against its
/// closed form `S grad f(mu)` on a quadratic; passes iff every component is
/// within four jackknife standard errors.
pub fn check_grad_mean(d: usize, n_samples: usize, seed: u64) -> Result<CheckOutcome, VerifyError> {
    let (f, h, dist) = random_config(d, seed)?;
    let target = dist.sigma().mul_vec(&h.mul_vec(dist.mu()));
    let per_block = n_samples.max(MIN_MC_SAMPLES) / JACKKNIFE_BLOCKS;
    let mut block_means: Vec<DVector<f64>> = Vec::with_capacity(JACKKNIFE_BLOCKS);
    for block in 0..JACKKNIFE_BLOCKS {
        let mut sum = DVector::zeros(d);
        for i in 0..per_block {
            let batch = DirectionBatch::sample(
                d,
                1,
                seed,
                (block * per_block + i) as u64,
            );
            sum += grad_estimate(&f, &dist, &batch)?;
        }
        block_means.push(sum / per_block as f64);
    }
    let mut worst = 0.0f64;
    for c in 0..d {
        let comp: Vec<f64> = block_means.iter().map(|m| m[c]).collect();
        let mean = jack_mean(&comp);
        let se = jack_se(&comp).max(1e-300);
        worst = worst.max((mean - target[c]).abs() / se);
    }
    Ok(CheckOutcome::bounded(
        format!("grad_mean[d={d},seed={seed}] max |dev|/se"),
        SE_MULTIPLIER,
        worst,
    ))
}

/// Monte Carlo mean of `g^T S^-1 g` against `(d+2) |grad f|_S^2`; the pass
/// band is a 3 percent relative tolerance.
pub fn check_grad_variance(
    d: usize,
    n_samples: usize,
    seed: u64,
) -> Result<CheckOutcome, VerifyError> {
    let (f, h, dist) = random_config(d, seed)?;
    let grad = h.mul_vec(dist.mu());
    let target = (d as f64 + 2.0) * dist.sigma().quad_form(&grad);
    let (mc, _se) = mc_samples_scalar(n_samples, seed, |j| {
        let batch = DirectionBatch::sample(d, 1, seed, j);
        let g = grad_estimate(&f, &dist, &batch)?;
        Ok(dist.sigma_inv().quad_form(&g))
    })?;
    Ok(CheckOutcome::new(
        format!("grad_variance[d={d},seed={seed}]"),
        target,
        mc,
        0.03 * target,
    ))
}

/// Monte Carlo mean of the covariance-inverse estimate against
/// `H - S^-1`, entrywise within four jackknife standard errors. The batch
/// estimator runs through the full evaluation path (antithetic pairs plus
/// the mean query).
pub fn check_cov_grad_mean(
    d: usize,
    n_samples: usize,
    seed: u64,
) -> Result<CheckOutcome, VerifyError> {
    let (f, h, dist) = random_config(d, seed)?;
    let target = &h - dist.sigma_inv();
    let per_block = n_samples.max(MIN_MC_SAMPLES) / JACKKNIFE_BLOCKS;
    let mut block_means: Vec<DMatrix<f64>> = Vec::with_capacity(JACKKNIFE_BLOCKS);
    for block in 0..JACKKNIFE_BLOCKS {
        let mut sum = DMatrix::zeros(d, d);
        for i in 0..per_block {
            let batch =
                DirectionBatch::sample(d, 1, seed, (block * per_block + i) as u64);
            sum += cov_grad_estimate(&f, &dist, &batch)?.into_matrix();
        }
        block_means.push(sum / per_block as f64);
    }
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let comp: Vec<f64> = block_means.iter().map(|m| m[(i, j)]).collect();
            let mean = jack_mean(&comp);
            let se = jack_se(&comp).max(1e-300);
            worst = worst.max((mean - target.get(i, j)).abs() / se);
        }
    }
    Ok(CheckOutcome::bounded(
        format!("cov_grad_mean[d={d},seed={seed}] max |dev|/se"),
        SE_MULTIPLIER,
        worst,
    ))
}

/// Sanity inequality on the covariance estimator's second moment:
/// `E |G|_F^2 <= (L^2 zeta^2 / (4 tau^2)) (d^4 + 11 d^3 + 34 d^2 + 32 d)
///  + 2 d zeta^2 + |H|_F^2`. Not a tightness check.
pub fn check_cov_grad_second_moment(
    d: usize,
    n_samples: usize,
    seed: u64,
) -> Result<CheckOutcome, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let (tau, zeta) = (0.5, 4.0);
    let l_smooth = 3.0;
    let (f, h) = make_quadratic(d, 0.5, l_smooth, rng.random())?;
    let sigma_inv = random_spd(d, tau, zeta, &mut rng);
    let mu = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let dist = SearchDistribution::new(mu, sigma_inv, 0.5)?;
    let df = d as f64;
    let bound = l_smooth * l_smooth * zeta * zeta / (4.0 * tau * tau)
        * (df.powi(4) + 11.0 * df.powi(3) + 34.0 * df * df + 32.0 * df)
        + 2.0 * df * zeta * zeta
        + h.frobenius_norm().powi(2);
    let (mc, _se) = mc_samples_scalar(n_samples, seed, |j| {
        let batch = DirectionBatch::sample(d, 1, seed, j);
        let g = cov_grad_estimate(&f, &dist, &batch)?;
        Ok(g.frobenius_norm().powi(2))
    })?;
    Ok(CheckOutcome::bounded(
        format!("cov_grad_second_moment[d={d},seed={seed}]"),
        bound,
        mc,
    ))
}

fn mc_samples_scalar(
    n_samples: usize,
    _seed: u64,
    mut stat: impl FnMut(u64) -> Result<f64, VerifyError>,
) -> Result<(f64, f64), VerifyError> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(VerifyError::TooFewSamples {
            need: MIN_MC_SAMPLES,
            got: n_samples,
        });
    }
    let per_block = n_samples / JACKKNIFE_BLOCKS;
    let mut block_means = Vec::with_capacity(JACKKNIFE_BLOCKS);
    let mut j = 0u64;
    for _ in 0..JACKKNIFE_BLOCKS {
        let mut sum = 0.0;
        for _ in 0..per_block {
            sum += stat(j)?;
            j += 1;
        }
        block_means.push(sum / per_block as f64);
    }
    Ok((jack_mean(&block_means), jack_se(&block_means)))
}

/// Summary of the covariance-rate experiment: the power-law fit of the mean
/// squared covariance error and the end-to-start error ratio.
#[derive(Debug, Clone)]
pub struct CovRateSummary {
    pub fit: RateFit,
    pub final_ratio: f64,
    pub first_error: f64,
    pub last_error: f64,
}

/// Runs the covariance-rate experiment: a rotated quadratic with condition
/// number `cond` (`sigma = 1`, `L = cond`), constraint interval exactly
/// `[sigma, L]`, batch 1, `eta2 = 1/k`, frozen mean at the optimum, and the
/// mean covariance error over the given seeds fitted on `[k_lo, iters]`.
pub fn covariance_rate_experiment(
    dim: usize,
    cond: f64,
    quad_seed: u64,
    seeds: &[u64],
    iters: usize,
    k_lo: usize,
) -> Result<CovRateSummary, VerifyError> {
    let (f, _h) = make_quadratic(dim, 1.0, cond, quad_seed)?;
    let bounds = ConstraintBox::new(1.0, cond)?;
    let mut sums = vec![0.0f64; iters];
    for &seed in seeds {
        let mut cfg = MinesConfig::new(dim, 1e-2, bounds, 0, seed);
        cfg.max_queries = cfg.queries_per_iter() * iters as u64;
        let trace = mines_run(&f.fresh(), &DVector::zeros(dim), &cfg)?;
        if trace.records.len() != iters {
            return Err(VerifyError::Run(format!(
                "expected {iters} iterations, got {}",
                trace.records.len()
            )));
        }
        for r in &trace.records {
            sums[r.k - 1] += r.cov_error.expect("quadratic records cov_error");
        }
    }
    let n = seeds.len() as f64;
    let series: Vec<(usize, f64)> = sums
        .iter()
        .enumerate()
        .map(|(i, s)| (i + 1, s / n))
        .collect();
    let fit = fit_power_law(&series, k_lo, iters)?;
    let first_error = series[0].1;
    let last_error = series[iters - 1].1;
    Ok(CovRateSummary {
        fit,
        final_ratio: last_error / first_error,
        first_error,
        last_error,
    })
}

/// Mean-contraction experiment: quadratic objective, covariance inverse
/// pinned to the Hessian, mean step `1/(2(d+2))`, batch 1. Returns the
/// geometric-mean per-step ratio of the objective gap pooled over seeds.
pub fn mean_contraction_experiment(
    dim: usize,
    cond: f64,
    quad_seed: u64,
    n_seeds: usize,
    iters: usize,
) -> Result<f64, VerifyError> {
    let (f, h) = make_quadratic(dim, 1.0, cond, quad_seed)?;
    let eta1 = eta1_default(dim);
    let mut log_sum = 0.0;
    for s in 0..n_seeds {
        let seed = 0x5eed_0000 + s as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let mu0 = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut dist = SearchDistribution::new(mu0, h.clone(), 1e-2)?;
        let gap0 = f.eval_untracked(dist.mu());
        for k in 1..=iters {
            let batch = DirectionBatch::sample(dim, 1, seed, k as u64);
            let g = grad_estimate(&f, &dist, &batch)?;
            let mu_next = dist.mu() - g.scale(eta1);
            dist = dist.with_mu(mu_next)?;
        }
        let gap1 = f.eval_untracked(dist.mu());
        if !(gap1 > 0.0 && gap0 > 0.0) {
            return Err(VerifyError::Run(format!(
                "nonpositive gap in contraction run (start {gap0}, end {gap1})"
            )));
        }
        log_sum += (gap1 / gap0).ln() / iters as f64;
    }
    Ok((log_sum / n_seeds as f64).exp())
}

/// Per-step contraction factor the mean-update analysis guarantees on
/// quadratics with the covariance pinned to the Hessian inverse, plus the
/// empirical slack used by the gate.
pub fn contraction_bound(dim: usize, slack: f64) -> f64 {
    1.0 - 1.0 / (3.0 * (dim as f64 + 2.0)) + slack
}

/// Randomized projection property suite. Each case draws random symmetric
/// matrices and exercises: projection idempotence (1e-12), membership,
/// non-expansiveness, optimality against random feasible points, Bregman
/// nonnegativity (zero iff equal), and the SPD square-root round trip.
/// Returns the failure count as a zero-bound check.
pub fn projection_property_suite(cases: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = ConstraintBox::new(0.5, 4.0).expect("static box");
    let mut failures = 0usize;
    for _ in 0..cases {
        let dim = rng.random_range(2..=6);
        let a = random_spd(dim, -6.0, 9.0, &mut rng);
        let b = random_spd(dim, -6.0, 9.0, &mut rng);
        let (pa, pb) = match (bounds.project_inv(&a), bounds.project_inv(&b)) {
            (Ok(pa), Ok(pb)) => (pa, pb),
            _ => {
                failures += 1;
                continue;
            }
        };
        let idempotent = bounds
            .project_inv(&pa)
            .map(|paa| pa.frobenius_dist(&paa) <= 1e-12)
            .unwrap_or(false);
        let member = bounds.contains_inv(&pa, 1e-12).unwrap_or(false);
        let nonexpansive = pa.frobenius_dist(&pb) <= a.frobenius_dist(&b) + 1e-12;
        let mut optimal = true;
        for _ in 0..20 {
            let x = random_spd(dim, bounds.tau(), bounds.zeta(), &mut rng);
            if pa.frobenius_dist(&a) > x.frobenius_dist(&a) + 1e-12 {
                optimal = false;
                break;
            }
        }
        let s1 = random_spd(dim, 0.2, 5.0, &mut rng);
        let s2 = random_spd(dim, 0.2, 5.0, &mut rng);
        let bregman_ok = match (
            bregman_log_det(&s1, &s2, 1.0),
            bregman_log_det(&s1, &s1, 1.0),
        ) {
            (Ok(cross), Ok(this)) => cross >= -1e-10 && this.abs() <= 1e-10,
            _ => false,
        };
        let sqrt_ok = s1
            .spd_sqrt()
            .ok()
            .and_then(|r| SymMatrix::new(r.as_matrix() * r.as_matrix()).ok())
            .map(|sq| sq.frobenius_dist(&s1) / s1.frobenius_norm() <= 1e-8)
            .unwrap_or(false);
        if !(idempotent && member && nonexpansive && optimal && bregman_ok && sqrt_ok) {
            failures += 1;
        }
    }
    CheckOutcome::bounded(
        format!("projection_property_suite[{cases} cases]"),
        0.0,
        failures as f64,
    )
}

/// Runs a short optimizer loop and counts iterations whose covariance
/// inverse leaves the constraint interval by more than 1e-10.
pub fn state_feasibility_check(
    steps: usize,
    seed: u64,
) -> Result<CheckOutcome, VerifyError> {
    use crate::optimizers::mines_step;
    let (f, _h) = make_quadratic(5, 1.0, 20.0, seed)?;
    let bounds = ConstraintBox::new(1.0, 20.0)?;
    let mut cfg = MinesConfig::new(5, 1e-2, bounds, 0, seed);
    cfg.max_queries = u64::MAX;
    let mut state = SearchDistribution::new(
        DVector::from_element(5, 0.5),
        SymMatrix::identity(5),
        cfg.alpha,
    )?;
    let mut violations = 0usize;
    for k in 1..=steps {
        let step = mines_step(&state, &cfg, k, &f)?;
        state = step.state;
        if !bounds.contains_inv(state.sigma_inv(), 1e-10)? {
            violations += 1;
        }
    }
    Ok(CheckOutcome::bounded(
        format!("state_feasibility[{steps} steps,seed={seed}]"),
        0.0,
        violations as f64,
    ))
}
