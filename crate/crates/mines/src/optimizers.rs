//! Optimizer loops behind a common trace interface: the mirror-NES loop
//! (antithetic natural-gradient mean update, projected mirror-descent update
//! of the covariance inverse), a vanilla NES baseline driven by raw fitness,
//! and the two-point derivative-free baseline.
//!
//! All loops terminate on a query budget, never on a tolerance, and share the
//! counter-based direction streams: iteration `k` of a run seeded `s` always
//! draws batch `(s, k)`, so traces are bitwise reproducible.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use thiserror::Error;

use crate::estimators::{
    cov_grad_from_evals, df_grad_estimate, evaluate_antithetic, grad_from_evals, DirectionBatch,
    EstimatorError, SearchDistribution,
};
use crate::objectives::Objective;
use crate::spectral::{ConstraintBox, EigenPair, SpectralError, SymMatrix};

/// Eigenvalue floor applied when the NES covariance loses positive
/// definiteness.
pub const NES_PD_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("non-finite {what} at iteration {k}")]
    NonFinite { what: &'static str, k: usize },
}

/// A failed run still carries everything recorded up to the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub trace: RunTrace,
    pub error: RunError,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} run (seed {}) aborted after {} iterations: {}",
            self.trace.algo,
            self.trace.seed,
            self.trace.records.len(),
            self.error
        )
    }
}

impl std::error::Error for RunFailure {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Df,
    Mines,
    Nes,
}

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::Df => "df",
            Algo::Mines => "mines",
            Algo::Nes => "nes",
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Step-size schedule: a constant, or the `1/k` decay used by the
/// covariance update's convergence analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    OneOverK,
}

impl StepSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            StepSchedule::Constant(c) => *c,
            StepSchedule::OneOverK => 1.0 / k as f64,
        }
    }
}

/// Default mean step size `1/(2(d+2))`; the largest constant step the mean
/// contraction analysis admits. Overridable in every config.
pub fn eta1_default(d: usize) -> f64 {
    assert!(d >= 1, "dimension must be at least 1, got {d}");
    1.0 / (2.0 * (d + 2) as f64)
}

/// One per-iteration trace record. `queries` is cumulative over the run;
/// `cov_error` is the squared Frobenius distance from the covariance-inverse
/// iterate to the projected Hessian (present only when the objective exposes
/// a Hessian oracle); `pd_clamped` flags NES iterations whose covariance had
/// to be floored back to positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub k: usize,
    pub queries: u64,
    pub f_mu: f64,
    pub cov_error: Option<f64>,
    pub eta1: f64,
    pub eta2: f64,
    pub pd_clamped: bool,
}

/// Per-run trace: dense per-iteration records plus terminal summary fields.
/// `wall_time` is diagnostic only and never serialized.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub algo: Algo,
    pub seed: u64,
    pub records: Vec<IterRecord>,
    pub best_f: f64,
    pub final_f: f64,
    pub total_queries: u64,
    pub wall_time: Duration,
}

impl RunTrace {
    fn new(algo: Algo, seed: u64) -> Self {
        Self {
            algo,
            seed,
            records: Vec::new(),
            best_f: f64::INFINITY,
            final_f: f64::NAN,
            total_queries: 0,
            wall_time: Duration::ZERO,
        }
    }

    fn finish(&mut self, final_f: f64, started: Instant) {
        self.final_f = final_f;
        self.best_f = self
            .records
            .iter()
            .map(|r| r.f_mu)
            .fold(final_f, f64::min);
        self.wall_time = started.elapsed();
    }
}

/// Mirror-NES configuration. `sigma1_inv` is projected into the constraint
/// interval before the first iteration; identity is the scale-neutral
/// default when nothing better is known.
#[derive(Debug, Clone)]
pub struct MinesConfig {
    pub alpha: f64,
    pub eta1: StepSchedule,
    pub eta2: StepSchedule,
    pub bounds: ConstraintBox,
    pub batch: usize,
    pub sigma1_inv: SymMatrix,
    pub max_queries: u64,
    pub seed: u64,
}

impl MinesConfig {
    /// Theorem-default schedules: `eta1 = 1/(2(d+2))`, `eta2 = 1/k`,
    /// identity initial covariance inverse.
    pub fn new(dim: usize, alpha: f64, bounds: ConstraintBox, max_queries: u64, seed: u64) -> Self {
        Self {
            alpha,
            eta1: StepSchedule::Constant(eta1_default(dim)),
            eta2: StepSchedule::OneOverK,
            bounds,
            batch: 1,
            sigma1_inv: SymMatrix::identity(dim),
            max_queries,
            seed,
        }
    }

    fn validate(&self, dim: usize) -> Result<(), RunError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(RunError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.batch == 0 {
            return Err(RunError::Config("batch size must be at least 1".into()));
        }
        if self.sigma1_inv.dim() != dim {
            return Err(RunError::Config(format!(
                "sigma1_inv is {}x{0} but the objective dimension is {dim}",
                self.sigma1_inv.dim()
            )));
        }
        Ok(())
    }

    /// Queries consumed by one iteration: `2b` antithetic plus `f(mu)`.
    pub fn queries_per_iter(&self) -> u64 {
        2 * self.batch as u64 + 1
    }
}

/// Output of a single mirror-NES step.
#[derive(Debug, Clone)]
pub struct MinesStep {
    pub state: SearchDistribution,
    pub f_mu: f64,
    pub eta1: f64,
    pub eta2: f64,
}

/// One mirror-NES iteration (1-based `k`):
///
/// * draw batch `(cfg.seed, k)`,
/// * evaluate the `2b` antithetic pairs and `f(mu_k)`,
/// * mean: `mu - eta1(k) * g`,
/// * covariance inverse: project `S^-1 + eta2(k) * G` back onto the
///   constraint interval.
///
/// Costs exactly `2b + 1` queries.
pub fn mines_step(
    state: &SearchDistribution,
    cfg: &MinesConfig,
    k: usize,
    f: &Objective,
) -> Result<MinesStep, RunError> {
    let batch = DirectionBatch::sample(state.dim(), cfg.batch, cfg.seed, k as u64);
    let evals = evaluate_antithetic(f, state, &batch)?;
    let mu = state.mu();
    let f_mu = f.eval(mu);
    if !f_mu.is_finite() {
        return Err(RunError::NonFinite { what: "f(mu)", k });
    }
    let g = grad_from_evals(state, &batch, &evals);
    let big_g = cov_grad_from_evals(state, &batch, &evals, f_mu);
    let eta1 = cfg.eta1.at(k);
    let eta2 = cfg.eta2.at(k);
    let mu_next = mu - g.scale(eta1);
    if mu_next.iter().any(|v| !v.is_finite()) {
        return Err(RunError::NonFinite { what: "mean update", k });
    }
    let proposed = state.sigma_inv().add_scaled(eta2, &big_g);
    let eig = cfg.bounds.project_inv_eig(&proposed)?;
    let state = SearchDistribution::from_eigenpair(mu_next, eig, cfg.alpha)?;
    Ok(MinesStep {
        state,
        f_mu,
        eta1,
        eta2,
    })
}

fn cov_error_target(
    f: &Objective,
    bounds: &ConstraintBox,
    mu: &DVector<f64>,
) -> Result<Option<SymMatrix>, RunError> {
    match f.hess(mu) {
        Some(h) => Ok(Some(bounds.project_inv(&h)?)),
        None => Ok(None),
    }
}

/// Runs mirror-NES until the query budget cannot cover another iteration.
///
/// Records, per iteration `k`: the pre-step mean value `f(mu_k)` (the budgeted
/// evaluation the covariance estimate reuses), the pre-step covariance error
/// `|S_k^-1 - proj(H)|_F^2` when a Hessian oracle exists (constant Hessians
/// are projected once; otherwise the oracle runs at the current mean), and
/// the step sizes used. A step failure aborts with the partial trace intact.
pub fn mines_run(
    f: &Objective,
    mu1: &DVector<f64>,
    cfg: &MinesConfig,
) -> Result<RunTrace, RunFailure> {
    let started = Instant::now();
    let mut trace = RunTrace::new(Algo::Mines, cfg.seed);
    let fail = |trace: RunTrace, error: RunError| RunFailure { trace, error };

    if f.dim() != mu1.len() {
        return Err(fail(
            trace,
            RunError::Config(format!(
                "objective dimension {} vs initial mean length {}",
                f.dim(),
                mu1.len()
            )),
        ));
    }
    if let Err(e) = cfg.validate(f.dim()) {
        return Err(fail(trace, e));
    }

    let init_eig = match cfg.bounds.project_inv_eig(&cfg.sigma1_inv) {
        Ok(e) => e,
        Err(e) => return Err(fail(trace, e.into())),
    };
    let mut state = match SearchDistribution::from_eigenpair(mu1.clone(), init_eig, cfg.alpha) {
        Ok(s) => s,
        Err(e) => return Err(fail(trace, e.into())),
    };

    let constant_target = if f.hess_is_constant() {
        match cov_error_target(f, &cfg.bounds, mu1) {
            Ok(t) => t,
            Err(e) => return Err(fail(trace, e)),
        }
    } else {
        None
    };

    let per_iter = cfg.queries_per_iter();
    let mut used = 0u64;
    let mut k = 0usize;
    while used + per_iter <= cfg.max_queries {
        k += 1;
        let cov_error = if f.hess_is_constant() {
            constant_target
                .as_ref()
                .map(|t| state.sigma_inv().frobenius_dist2(t))
        } else {
            match cov_error_target(f, &cfg.bounds, state.mu()) {
                Ok(t) => t.map(|t| state.sigma_inv().frobenius_dist2(&t)),
                Err(e) => return Err(fail(trace, e)),
            }
        };
        let step = match mines_step(&state, cfg, k, f) {
            Ok(s) => s,
            Err(e) => {
                trace.finish(f.eval_untracked(state.mu()), started);
                return Err(fail(trace, e));
            }
        };
        used += per_iter;
        trace.records.push(IterRecord {
            k,
            queries: used,
            f_mu: step.f_mu,
            cov_error,
            eta1: step.eta1,
            eta2: step.eta2,
            pd_clamped: false,
        });
        state = step.state;
    }
    trace.total_queries = used;
    trace.finish(f.eval_untracked(state.mu()), started);
    Ok(trace)
}

/// Vanilla NES baseline configuration: one step size for both the mean and
/// covariance meta-updates, raw fitness weights, full covariance state.
#[derive(Debug, Clone)]
pub struct NesConfig {
    pub eta: f64,
    pub sigma_bar1: SymMatrix,
    pub batch: usize,
    pub max_queries: u64,
    pub seed: u64,
}

/// One NES meta-update over `z_i = mu + C^(1/2) u_i` with raw fitness:
///
/// * `mu <- mu - eta (1/b) sum f(z_i) C^(1/2) u_i`
/// * `C  <- C  - eta (1/b) sum f(z_i) (C^(1/2) u_i u_i^T C^(1/2) - C)`
///
/// Returns the new mean and the eigendecomposition of the new covariance,
/// floored at [`NES_PD_FLOOR`] when the update loses positive definiteness
/// (the `clamped` flag records it). Costs exactly `b` queries.
pub fn nes_step(
    mu: &DVector<f64>,
    cov_eig: &EigenPair,
    cfg: &NesConfig,
    k: usize,
    f: &Objective,
) -> Result<(DVector<f64>, EigenPair, bool), RunError> {
    let d = mu.len();
    let batch = DirectionBatch::sample(d, cfg.batch, cfg.seed, k as u64);
    let sqrt = cov_eig.recompose_with(|l| l.sqrt());
    let cov = cov_eig.reconstruct();
    let b = cfg.batch as f64;

    let mut mean_shift = DVector::zeros(d);
    let mut cov_shift = SymMatrix::zeros(d);
    for u in batch.dirs() {
        let su = sqrt.mul_vec(u);
        let z = mu + &su;
        let fz = f.eval(&z);
        if !fz.is_finite() {
            return Err(EstimatorError::NonFiniteEval {
                value: fz,
                point: z.iter().copied().collect(),
            }
            .into());
        }
        mean_shift += su.scale(fz);
        let mut outer = nalgebra::DMatrix::zeros(d, d);
        outer.ger(fz, &su, &su, 0.0);
        cov_shift = cov_shift.add_scaled(1.0, &SymMatrix::symmetrize(outer));
        cov_shift = cov_shift.add_scaled(-fz, &cov);
    }
    let mu_next = mu - mean_shift.scale(cfg.eta / b);
    if mu_next.iter().any(|v| !v.is_finite()) {
        return Err(RunError::NonFinite { what: "mean update", k });
    }
    let cov_next = cov.add_scaled(-cfg.eta / b, &cov_shift);
    let eig = cov_next.eig()?;
    let clamped = eig.lambda_min() < NES_PD_FLOOR;
    let eig = if clamped {
        eig.with_values(eig.values().map(|l| l.max(NES_PD_FLOOR)))
    } else {
        eig
    };
    Ok((mu_next, eig, clamped))
}

/// Runs the NES baseline; `b` queries per iteration. The per-iteration
/// `f(mu_k)` in the trace is a diagnostic evaluation outside the budget
/// (NES itself never queries the mean).
pub fn nes_run(
    f: &Objective,
    mu1: &DVector<f64>,
    cfg: &NesConfig,
) -> Result<RunTrace, RunFailure> {
    let started = Instant::now();
    let mut trace = RunTrace::new(Algo::Nes, cfg.seed);
    let fail = |trace: RunTrace, error: RunError| RunFailure { trace, error };

    if f.dim() != mu1.len() || cfg.sigma_bar1.dim() != mu1.len() {
        return Err(fail(
            trace,
            RunError::Config("objective, initial mean and covariance dimensions differ".into()),
        ));
    }
    if cfg.batch == 0 || !(cfg.eta > 0.0 && cfg.eta.is_finite()) {
        return Err(fail(
            trace,
            RunError::Config("need batch >= 1 and positive finite eta".into()),
        ));
    }
    let mut eig = match cfg.sigma_bar1.eig() {
        Ok(e) => e,
        Err(e) => return Err(fail(trace, e.into())),
    };
    if eig.lambda_min() <= 0.0 {
        return Err(fail(
            trace,
            RunError::Config("initial covariance must be positive definite".into()),
        ));
    }
    let mut mu = mu1.clone();
    let per_iter = cfg.batch as u64;
    let mut used = 0u64;
    let mut k = 0usize;
    while used + per_iter <= cfg.max_queries {
        k += 1;
        let f_mu = f.eval_untracked(&mu);
        let (mu_next, eig_next, clamped) = match nes_step(&mu, &eig, cfg, k, f) {
            Ok(t) => t,
            Err(e) => {
                trace.finish(f.eval_untracked(&mu), started);
                return Err(fail(trace, e));
            }
        };
        used += per_iter;
        trace.records.push(IterRecord {
            k,
            queries: used,
            f_mu,
            cov_error: None,
            eta1: cfg.eta,
            eta2: cfg.eta,
            pd_clamped: clamped,
        });
        mu = mu_next;
        eig = eig_next;
    }
    trace.total_queries = used;
    trace.finish(f.eval_untracked(&mu), started);
    Ok(trace)
}

/// Derivative-free baseline configuration.
#[derive(Debug, Clone)]
pub struct DfConfig {
    pub alpha: f64,
    pub eta: f64,
    pub batch: usize,
    pub max_queries: u64,
    pub seed: u64,
}

/// One two-point step: `mu - eta * g(mu)` with the batch `(cfg.seed, k)`.
/// Costs exactly `2b` queries.
pub fn df_step(
    f: &Objective,
    mu: &DVector<f64>,
    cfg: &DfConfig,
    k: usize,
) -> Result<DVector<f64>, RunError> {
    let batch = DirectionBatch::sample(mu.len(), cfg.batch, cfg.seed, k as u64);
    let g = df_grad_estimate(f, mu, cfg.alpha, &batch)?;
    let mu_next = mu - g.scale(cfg.eta);
    if mu_next.iter().any(|v| !v.is_finite()) {
        return Err(RunError::NonFinite { what: "mean update", k });
    }
    Ok(mu_next)
}

/// Runs the derivative-free baseline; `2b` queries per iteration. With the
/// covariance frozen at identity this is exactly the mirror-NES mean update,
/// which the equivalence tests pin down. The traced `f(mu_k)` is diagnostic,
/// outside the budget.
pub fn df_run(f: &Objective, mu1: &DVector<f64>, cfg: &DfConfig) -> Result<RunTrace, RunFailure> {
    let started = Instant::now();
    let mut trace = RunTrace::new(Algo::Df, cfg.seed);
    let fail = |trace: RunTrace, error: RunError| RunFailure { trace, error };

    if f.dim() != mu1.len() {
        return Err(fail(
            trace,
            RunError::Config("objective and initial mean dimensions differ".into()),
        ));
    }
    if cfg.batch == 0 || !(cfg.eta > 0.0 && cfg.eta.is_finite()) {
        return Err(fail(
            trace,
            RunError::Config("need batch >= 1 and positive finite eta".into()),
        ));
    }
    let mut mu = mu1.clone();
    let per_iter = 2 * cfg.batch as u64;
    let mut used = 0u64;
    let mut k = 0usize;
    while used + per_iter <= cfg.max_queries {
        k += 1;
        let f_mu = f.eval_untracked(&mu);
        let mu_next = match df_step(f, &mu, cfg, k) {
            Ok(m) => m,
            Err(e) => {
                trace.finish(f.eval_untracked(&mu), started);
                return Err(fail(trace, e));
            }
        };
        used += per_iter;
        trace.records.push(IterRecord {
            k,
            queries: used,
            f_mu,
            cov_error: None,
            eta1: cfg.eta,
            eta2: 0.0,
            pd_clamped: false,
        });
        mu = mu_next;
    }
    trace.total_queries = used;
    trace.finish(f.eval_untracked(&mu), started);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::DirectionBatch;
    use crate::objectives::make_quadratic;
    use nalgebra::{DMatrix, DVector};

    fn quick_cfg(dim: usize, seed: u64, max_queries: u64) -> MinesConfig {
        MinesConfig::new(
            dim,
            1e-2,
            ConstraintBox::new(0.5, 10.0).unwrap(),
            max_queries,
            seed,
        )
    }

    #[test]
    fn eta1_default_values() {
        assert!((eta1_default(2) - 0.125).abs() < 1e-15);
        assert!((eta1_default(198) - 1.0 / 400.0).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "dimension must be at least 1")]
    fn eta1_default_rejects_zero_dim() {
        eta1_default(0);
    }

    #[test]
    fn one_over_k_schedule() {
        assert_eq!(StepSchedule::OneOverK.at(4), 0.25);
        assert_eq!(StepSchedule::Constant(0.3).at(17), 0.3);
    }

    #[test]
    fn constant_objective_step_keeps_mean_and_shrinks_sigma_inv() {
        let f = Objective::new(2, |_| 3.0);
        let cfg = quick_cfg(2, 5, 1000);
        let state = SearchDistribution::new(
            DVector::from_row_slice(&[1.0, -2.0]),
            SymMatrix::identity(2).scale(2.0),
            cfg.alpha,
        )
        .unwrap();
        let k = 4; // eta2 = 1/4
        let step = mines_step(&state, &cfg, k, &f).unwrap();
        assert_eq!(step.state.mu(), state.mu());
        assert!((step.eta2 - 0.25).abs() < 1e-15);
        // G = -S^-1, so the proposal is (1 - 1/4) * 2I = 1.5I, inside the box
        let want = SymMatrix::identity(2).scale(1.5);
        assert!(step.state.sigma_inv().frobenius_dist(&want) < 1e-12);
    }

    #[test]
    fn mines_single_step_matches_hand_oracle() {
        let d = 2;
        let (f, h) = make_quadratic(d, 1.0, 1.0, 0).unwrap(); // H = I
        let cfg = quick_cfg(d, 33, 100);
        let mu = DVector::from_row_slice(&[0.4, -0.8]);
        let state =
            SearchDistribution::new(mu.clone(), SymMatrix::identity(d), cfg.alpha).unwrap();
        let step = mines_step(&state, &cfg, 1, &f).unwrap();

        // hand-rolled recomputation from the same batch, raw nalgebra ops
        let batch = DirectionBatch::sample(d, 1, 33, 1);
        let u = &batch.dirs()[0];
        let a = cfg.alpha;
        let fp = 0.5 * (&mu + u.scale(a)).dot(&(h.as_matrix() * (&mu + u.scale(a))));
        let fm = 0.5 * (&mu - u.scale(a)).dot(&(h.as_matrix() * (&mu - u.scale(a))));
        let f0 = 0.5 * mu.dot(&(h.as_matrix() * &mu));
        let g = u.scale((fp - fm) / (2.0 * a));
        let mu_want = &mu - g.scale(eta1_default(d));
        let curis = fm + fp - 2.0 * f0;
        let gmat = (u * u.transpose() - DMatrix::identity(d, d)) * (curis / (2.0 * a * a))
            - DMatrix::identity(d, d);
        let prop = DMatrix::identity(d, d) + gmat; // eta2 = 1 at k = 1
        let se = nalgebra::SymmetricEigen::new(0.5 * (&prop + prop.transpose()));
        let vals = se.eigenvalues.map(|l| l.clamp(0.5, 10.0));
        let sig_want =
            &se.eigenvectors * DMatrix::from_diagonal(&vals) * se.eigenvectors.transpose();

        assert!((step.state.mu() - mu_want).norm() < 1e-10);
        assert!((step.state.sigma_inv().as_matrix() - sig_want).norm() < 1e-10);
    }

    #[test]
    fn mines_run_respects_budget_and_ledger() {
        let (f, _) = make_quadratic(3, 1.0, 4.0, 8).unwrap();
        let mut cfg = quick_cfg(3, 2, 50);
        cfg.batch = 2; // 5 queries per iteration -> 10 iterations
        let f = f.fresh();
        let trace = mines_run(&f, &DVector::zeros(3), &cfg).unwrap();
        assert_eq!(trace.records.len(), 10);
        assert_eq!(trace.total_queries, 50);
        assert_eq!(f.query_count(), 50);
        for (i, r) in trace.records.iter().enumerate() {
            assert_eq!(r.k, i + 1);
            assert_eq!(r.queries, (i as u64 + 1) * 5);
        }
    }

    #[test]
    fn mines_run_zero_iterations_on_tiny_budget() {
        let (f, _) = make_quadratic(3, 1.0, 4.0, 8).unwrap();
        let cfg = quick_cfg(3, 2, 2); // needs 3 per iteration
        let mu1 = DVector::from_row_slice(&[1.0, 1.0, 1.0]);
        let f1 = f.eval_untracked(&mu1);
        let trace = mines_run(&f, &mu1, &cfg).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.total_queries, 0);
        assert_eq!(trace.best_f, f1);
        assert_eq!(trace.final_f, f1);
    }

    #[test]
    fn mines_run_is_deterministic() {
        let (f, _) = make_quadratic(4, 1.0, 9.0, 3).unwrap();
        let cfg = quick_cfg(4, 123, 300);
        let mu1 = DVector::from_row_slice(&[0.5, 0.5, -0.5, 0.1]);
        let a = mines_run(&f.fresh(), &mu1, &cfg).unwrap();
        let b = mines_run(&f.fresh(), &mu1, &cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.best_f.to_bits(), b.best_f.to_bits());
        assert_eq!(a.final_f.to_bits(), b.final_f.to_bits());
    }

    #[test]
    fn mines_state_stays_feasible() {
        let (f, _) = make_quadratic(4, 1.0, 9.0, 3).unwrap();
        let cfg = quick_cfg(4, 7, 200);
        let mut state =
            SearchDistribution::new(DVector::zeros(4), SymMatrix::identity(4), cfg.alpha).unwrap();
        for k in 1..=60 {
            let step = mines_step(&state, &cfg, k, &f).unwrap();
            state = step.state;
            assert!(cfg.bounds.contains_inv(state.sigma_inv(), 1e-10).unwrap());
        }
    }

    #[test]
    fn mines_cov_error_is_recorded_and_decreases() {
        let (f, h) = make_quadratic(3, 1.0, 5.0, 6).unwrap();
        let mut cfg = MinesConfig::new(
            3,
            1e-2,
            ConstraintBox::new(1.0, 5.0).unwrap(),
            3 * 4000,
            11,
        );
        cfg.eta1 = StepSchedule::Constant(0.0); // freeze the mean
        let trace = mines_run(&f, &DVector::zeros(3), &cfg).unwrap();
        let first = trace.records.first().unwrap().cov_error.unwrap();
        let last = trace.records.last().unwrap().cov_error.unwrap();
        assert!(first > 0.0);
        assert!(last < 0.2 * first, "{last} vs {first}");
        // target is the projected Hessian, which equals H inside the box
        let target = cfg.bounds.project_inv(&h).unwrap();
        assert!(target.frobenius_dist(&h) < 1e-10);
    }

    #[test]
    fn mines_aborts_with_partial_trace_on_divergence() {
        // objective turns non-finite once |x| grows past a threshold
        let f = Objective::new(2, |x| {
            let n = x.norm_squared();
            if n > 1e4 {
                f64::INFINITY
            } else {
                n
            }
        });
        let mut cfg = quick_cfg(2, 9, 100_000);
        cfg.eta1 = StepSchedule::Constant(50.0); // wildly unstable on purpose
        cfg.alpha = 1.0;
        let out = mines_run(&f, &DVector::from_row_slice(&[1.0, 1.0]), &cfg);
        let failure = out.expect_err("divergence expected");
        assert!(!failure.trace.records.is_empty());
        assert!(matches!(
            failure.error,
            RunError::Estimator(EstimatorError::NonFiniteEval { .. }) | RunError::NonFinite { .. }
        ));
    }

    #[test]
    fn nes_constant_fitness_with_antithetic_batch_does_not_drift() {
        let f = Objective::new(2, |_| 1.5);
        let cfg = NesConfig {
            eta: 0.1,
            sigma_bar1: SymMatrix::identity(2),
            batch: 2,
            max_queries: 100,
            seed: 4,
        };
        let mu = DVector::from_row_slice(&[1.0, 2.0]);
        let eig = cfg.sigma_bar1.eig().unwrap();
        // hand-built antithetic pair
        let u = DVector::from_row_slice(&[0.3, -0.9]);
        let batch = DirectionBatch::from_dirs(vec![u.clone(), -u]);
        // recompute the step body with that batch
        let sqrt = eig.recompose_with(|l| l.sqrt());
        let mut shift = DVector::zeros(2);
        for dir in batch.dirs() {
            shift += sqrt.mul_vec(dir).scale(f.eval_untracked(&mu));
        }
        assert!(shift.norm() < 1e-14);
    }

    #[test]
    fn nes_single_step_matches_hand_oracle() {
        let (f, h) = make_quadratic(2, 1.0, 3.0, 5).unwrap();
        let cfg = NesConfig {
            eta: 0.05,
            sigma_bar1: SymMatrix::identity(2).scale(0.25),
            batch: 1,
            max_queries: 10,
            seed: 21,
        };
        let mu = DVector::from_row_slice(&[0.6, -0.1]);
        let eig = cfg.sigma_bar1.eig().unwrap();
        let (mu_next, eig_next, clamped) = nes_step(&mu, &eig, &cfg, 1, &f).unwrap();
        assert!(!clamped);

        let u = DirectionBatch::sample(2, 1, 21, 1).dirs()[0].clone();
        let su = u.scale(0.5); // sqrt(0.25 I) u
        let z = &mu + &su;
        let fz = 0.5 * z.dot(&(h.as_matrix() * &z));
        let mu_want = &mu - su.scale(cfg.eta * fz);
        let cov_want = DMatrix::identity(2, 2) * 0.25
            - (su.clone() * su.transpose() - DMatrix::identity(2, 2) * 0.25) * (cfg.eta * fz);
        assert!((mu_next - mu_want).norm() < 1e-10);
        assert!((eig_next.reconstruct().as_matrix() - cov_want).norm() < 1e-10);
    }

    #[test]
    fn nes_floors_covariance_when_pd_is_lost() {
        // enormous fitness forces the covariance update indefinite
        let f = Objective::new(2, |_| 1e6);
        let cfg = NesConfig {
            eta: 1.0,
            sigma_bar1: SymMatrix::identity(2),
            batch: 1,
            max_queries: 2,
            seed: 3,
        };
        let trace = nes_run(&f, &DVector::zeros(2), &cfg).unwrap();
        assert!(trace.records.iter().any(|r| r.pd_clamped));
    }

    #[test]
    fn nes_run_is_deterministic_and_budgeted() {
        let (f, _) = make_quadratic(3, 1.0, 2.0, 2).unwrap();
        let cfg = NesConfig {
            eta: 1e-3,
            sigma_bar1: SymMatrix::identity(3).scale(1e-2),
            batch: 4,
            max_queries: 41,
            seed: 8,
        };
        let mu1 = DVector::from_row_slice(&[0.2, 0.4, -0.6]);
        let a = nes_run(&f.fresh(), &mu1, &cfg).unwrap();
        let b = nes_run(&f.fresh(), &mu1, &cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len(), 10); // 41 / 4
        assert_eq!(a.total_queries, 40);
    }

    #[test]
    fn df_run_matches_pinned_mines_mean_iterates() {
        let (f, _) = make_quadratic(3, 1.0, 6.0, 4).unwrap();
        let seed = 55;
        let alpha = 0.05;
        let eta = 0.02;
        let df_cfg = DfConfig {
            alpha,
            eta,
            batch: 1,
            max_queries: 10_000,
            seed,
        };
        let mut mines_cfg = MinesConfig::new(
            3,
            alpha,
            ConstraintBox::new(1.0, 1.0).unwrap(), // pin sigma_inv = I
            10_000,
            seed,
        );
        mines_cfg.eta1 = StepSchedule::Constant(eta);

        let mut mu_df = DVector::from_row_slice(&[1.0, -1.0, 0.5]);
        let mut state =
            SearchDistribution::new(mu_df.clone(), SymMatrix::identity(3), alpha).unwrap();
        for k in 1..=10 {
            mu_df = df_step(&f, &mu_df, &df_cfg, k).unwrap();
            let step = mines_step(&state, &mines_cfg, k, &f).unwrap();
            state = step.state;
            assert!(
                (state.mu() - &mu_df).norm() <= 1e-10,
                "k = {k}: {}",
                (state.mu() - &mu_df).norm()
            );
        }
    }

    #[test]
    fn df_run_is_deterministic() {
        let (f, _) = make_quadratic(2, 1.0, 2.0, 0).unwrap();
        let cfg = DfConfig {
            alpha: 0.1,
            eta: 0.05,
            batch: 2,
            max_queries: 100,
            seed: 77,
        };
        let mu1 = DVector::from_row_slice(&[1.0, 1.0]);
        let a = df_run(&f.fresh(), &mu1, &cfg).unwrap();
        let b = df_run(&f.fresh(), &mu1, &cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len(), 25);
        assert_eq!(a.total_queries, 100);
    }

    #[test]
    fn algo_names_are_stable() {
        assert_eq!(Algo::Mines.to_string(), "mines");
        assert_eq!(Algo::Nes.to_string(), "nes");
        assert_eq!(Algo::Df.to_string(), "df");
        assert!(Algo::Df < Algo::Mines && Algo::Mines < Algo::Nes);
    }
}
