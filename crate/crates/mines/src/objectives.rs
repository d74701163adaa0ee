//! Benchmark objectives with exact gradient/Hessian oracles where available,
//! a controlled-conditioning rotated quadratic generator, a libsvm-format
//! dataset parser, and a regularized logistic-regression objective.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::spectral::{random_orthogonal, SymMatrix};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("quadratic spectrum needs 0 < sigma_min <= l_max (finite), got [{sigma_min}, {l_max}]")]
    BadSpectrum { sigma_min: f64, l_max: f64 },
    #[error("{name} requires dimension >= {min}, got {dim}")]
    BadDim {
        name: &'static str,
        min: usize,
        dim: usize,
    },
    #[error("regularizer beta must be nonnegative and finite, got {beta}")]
    BadBeta { beta: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
}

#[derive(Debug, Error)]
pub enum LibsvmError {
    #[error("line {line}: cannot parse label '{token}'")]
    BadLabel { line: usize, token: String },
    #[error("line {line}: label {value} does not map to -1/+1 (accepted: -1, 0, +1)")]
    UnmappableLabel { line: usize, value: f64 },
    #[error("line {line}: malformed feature token '{token}' (expected index:value)")]
    BadFeature { line: usize, token: String },
    #[error("line {line}: feature index {index} is not ascending and 1-based (previous {prev})")]
    NonAscendingIndex {
        line: usize,
        index: usize,
        prev: usize,
    },
    #[error("line {line}: feature index {index} exceeds the forced dimension {dim}")]
    IndexOutOfRange {
        line: usize,
        index: usize,
        dim: usize,
    },
}

type EvalFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type GradFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type HessFn = dyn Fn(&DVector<f64>) -> SymMatrix + Send + Sync;

/// Black-box objective: a value oracle plus optional exact gradient/Hessian
/// oracles used only for verification and diagnostics.
///
/// Every [`eval`](Self::eval) call increments a shared atomic query counter
/// by exactly one; the oracles and [`eval_untracked`](Self::eval_untracked)
/// do not touch it. Clones share the counter; [`fresh`](Self::fresh) gives a
/// handle with its own zeroed counter over the same functions.
#[derive(Clone)]
pub struct Objective {
    dim: usize,
    queries: Arc<AtomicU64>,
    eval_fn: Arc<EvalFn>,
    grad_fn: Option<Arc<GradFn>>,
    hess_fn: Option<Arc<HessFn>>,
    constant_hess: bool,
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("dim", &self.dim)
            .field("queries", &self.query_count())
            .field("has_grad", &self.grad_fn.is_some())
            .field("has_hess", &self.hess_fn.is_some())
            .finish()
    }
}

impl Objective {
    pub fn new(dim: usize, eval: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            queries: Arc::new(AtomicU64::new(0)),
            eval_fn: Arc::new(eval),
            grad_fn: None,
            hess_fn: None,
            constant_hess: false,
        }
    }

    pub fn with_grad(
        mut self,
        grad: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad_fn = Some(Arc::new(grad));
        self
    }

    pub fn with_hess(
        mut self,
        hess: impl Fn(&DVector<f64>) -> SymMatrix + Send + Sync + 'static,
    ) -> Self {
        self.hess_fn = Some(Arc::new(hess));
        self
    }

    /// Marks the Hessian oracle as state-independent (quadratics), letting
    /// run loops hoist its projection out of the iteration.
    pub fn with_constant_hess(mut self) -> Self {
        self.constant_hess = true;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Budgeted value query; increments the query counter by one.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        (self.eval_fn)(x)
    }

    /// Diagnostic evaluation (trace reporting); not counted as a query.
    pub fn eval_untracked(&self, x: &DVector<f64>) -> f64 {
        (self.eval_fn)(x)
    }

    pub fn grad(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.grad_fn.as_ref().map(|g| g(x))
    }

    pub fn hess(&self, x: &DVector<f64>) -> Option<SymMatrix> {
        self.hess_fn.as_ref().map(|h| h(x))
    }

    pub fn has_grad(&self) -> bool {
        self.grad_fn.is_some()
    }

    pub fn has_hess(&self) -> bool {
        self.hess_fn.is_some()
    }

    pub fn hess_is_constant(&self) -> bool {
        self.constant_hess
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Same objective functions, new zeroed query counter.
    pub fn fresh(&self) -> Self {
        Self {
            dim: self.dim,
            queries: Arc::new(AtomicU64::new(0)),
            eval_fn: Arc::clone(&self.eval_fn),
            grad_fn: self.grad_fn.clone(),
            hess_fn: self.hess_fn.clone(),
            constant_hess: self.constant_hess,
        }
    }
}

/// Rotated quadratic `f(x) = x^T H x / 2` with a log-uniform spectrum on
/// `[sigma_min, l_max]`, both endpoints pinned, so the condition number is
/// exactly `l_max / sigma_min`. Returns the objective (with exact oracles)
/// and the Hessian itself.
pub fn make_quadratic(
    dim: usize,
    sigma_min: f64,
    l_max: f64,
    seed: u64,
) -> Result<(Objective, SymMatrix), ConfigError> {
    if !(sigma_min > 0.0 && l_max >= sigma_min && l_max.is_finite()) {
        return Err(ConfigError::BadSpectrum { sigma_min, l_max });
    }
    if dim == 0 || (dim == 1 && sigma_min != l_max) {
        return Err(ConfigError::BadDim {
            name: "quadratic",
            min: 2,
            dim,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lambdas = vec![0.0; dim];
    lambdas[0] = l_max;
    lambdas[dim - 1] = sigma_min;
    let (lo, hi) = (sigma_min.ln(), l_max.ln());
    for l in lambdas.iter_mut().take(dim - 1).skip(1) {
        *l = rng.random_range(lo..=hi).exp();
    }
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let q = random_orthogonal(dim, &mut rng);
    let h = SymMatrix::symmetrize(
        &q * DMatrix::from_diagonal(&DVector::from_vec(lambdas)) * q.transpose(),
    );

    let h_eval = h.clone();
    let h_grad = h.clone();
    let h_hess = h.clone();
    let objective = Objective::new(dim, move |x| 0.5 * h_eval.quad_form(x))
        .with_grad(move |x| h_grad.mul_vec(x))
        .with_hess(move |_| h_hess.clone())
        .with_constant_hess();
    Ok((objective, h))
}

/// `f(x) = sqrt(sum x_i^2)`; non-smooth at the origin, so no oracles.
pub fn ssphere(dim: usize) -> Result<Objective, ConfigError> {
    if dim == 0 {
        return Err(ConfigError::BadDim {
            name: "ssphere",
            min: 1,
            dim,
        });
    }
    Ok(Objective::new(dim, |x| x.norm()))
}

/// `f(x) = sum_i |x_i|^(2 + 10 (i-1)/(n-1))` with 1-based `i`; the variable
/// exponents rule out closed-form oracles.
pub fn diffpow(dim: usize) -> Result<Objective, ConfigError> {
    if dim < 2 {
        return Err(ConfigError::BadDim {
            name: "diffpow",
            min: 2,
            dim,
        });
    }
    let n = dim as f64;
    Ok(Objective::new(dim, move |x| {
        x.iter()
            .enumerate()
            .map(|(i, xi)| xi.abs().powf(2.0 + 10.0 * i as f64 / (n - 1.0)))
            .sum()
    }))
}

/// Sparse binary-classification dataset: rows of `(index, value)` pairs with
/// 0-based ascending indices and labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Parses libsvm text: one `label idx:val idx:val ...` line per sample,
    /// 1-based strictly ascending indices. Labels -1/0 map to -1; +1/1 map
    /// to +1. The dimension is the largest index seen.
    pub fn parse_libsvm(text: &str) -> Result<Self, LibsvmError> {
        Self::parse_impl(text, None)
    }

    /// Same, but with the dimension forced (so train/test splits agree).
    pub fn parse_libsvm_with_dim(text: &str, dim: usize) -> Result<Self, LibsvmError> {
        Self::parse_impl(text, Some(dim))
    }

    fn parse_impl(text: &str, forced_dim: Option<usize>) -> Result<Self, LibsvmError> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut max_index = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let mut tokens = raw.split_whitespace();
            let Some(label_tok) = tokens.next() else {
                continue; // blank line
            };
            let value: f64 = label_tok.parse().map_err(|_| LibsvmError::BadLabel {
                line,
                token: label_tok.to_string(),
            })?;
            let label = if value == -1.0 || value == 0.0 {
                -1.0
            } else if value == 1.0 {
                1.0
            } else {
                return Err(LibsvmError::UnmappableLabel { line, value });
            };
            let mut row = Vec::new();
            let mut prev = 0usize;
            for tok in tokens {
                let (idx_str, val_str) =
                    tok.split_once(':').ok_or_else(|| LibsvmError::BadFeature {
                        line,
                        token: tok.to_string(),
                    })?;
                let index: usize = idx_str.parse().map_err(|_| LibsvmError::BadFeature {
                    line,
                    token: tok.to_string(),
                })?;
                let val: f64 = val_str.parse().map_err(|_| LibsvmError::BadFeature {
                    line,
                    token: tok.to_string(),
                })?;
                if index == 0 || index <= prev {
                    return Err(LibsvmError::NonAscendingIndex { line, index, prev });
                }
                if let Some(d) = forced_dim {
                    if index > d {
                        return Err(LibsvmError::IndexOutOfRange {
                            line,
                            index,
                            dim: d,
                        });
                    }
                }
                prev = index;
                max_index = max_index.max(index);
                row.push((index - 1, val));
            }
            rows.push(row);
            labels.push(label);
        }
        Ok(Self {
            dim: forced_dim.unwrap_or(max_index),
            rows,
            labels,
        })
    }

    /// Serializes back to libsvm text (1-based indices); inverse of
    /// [`parse_libsvm`](Self::parse_libsvm) up to label normalization.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (row, label) in self.rows.iter().zip(&self.labels) {
            out.push_str(if *label > 0.0 { "+1" } else { "-1" });
            for (idx, val) in row {
                out.push_str(&format!(" {}:{}", idx + 1, val));
            }
            out.push('\n');
        }
        out
    }

    /// Seeded synthetic binary classification data: two Gaussian clouds at
    /// `+-c` with unit-variance noise and exactly balanced labels. Rows are
    /// stored dense (every index present).
    pub fn synthetic(n: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
            .normalize()
            .scale(2.0);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            let row = (0..dim)
                .map(|j| {
                    let noise: f64 = rng.sample(StandardNormal);
                    (j, y * center[j] + noise)
                })
                .collect();
            rows.push(row);
            labels.push(y);
        }
        Self { dim, rows, labels }
    }

    fn sparse_dot(row: &[(usize, f64)], x: &DVector<f64>) -> f64 {
        row.iter().map(|&(i, v)| v * x[i]).sum()
    }

    /// Largest squared row norm, used for the logistic Hessian's upper bound.
    pub fn max_row_norm2(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v * v).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `ln(1 + e^t)` without overflow for large `|t|`.
fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1 / (1 + e^-t)` without overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Regularized logistic regression over a dataset:
///
/// `f(x) = (1/n) sum_i ln(1 + exp(-y_i <a_i, x>)) + (beta/2) |x|^2`
///
/// with exact gradient and Hessian oracles
/// (`H(x) = (1/n) sum_i s_i (1 - s_i) a_i a_i^T + beta I`, `s_i` the sigmoid
/// of the margin).
pub fn logistic_objective(data: &Dataset, beta: f64) -> Result<Objective, ConfigError> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(ConfigError::BadBeta { beta });
    }
    if data.n() == 0 {
        return Err(ConfigError::EmptyDataset);
    }
    let dim = data.dim();
    let n = data.n() as f64;
    let data = Arc::new(data.clone());

    let d_eval = Arc::clone(&data);
    let d_grad = Arc::clone(&data);
    let d_hess = Arc::clone(&data);
    let objective = Objective::new(dim, move |x| {
        let mut loss = 0.0;
        for (row, y) in d_eval.rows().iter().zip(d_eval.labels()) {
            let margin = y * Dataset::sparse_dot(row, x);
            loss += log1p_exp(-margin);
        }
        loss / n + 0.5 * beta * x.norm_squared()
    })
    .with_grad(move |x| {
        let mut g = x.scale(beta);
        for (row, y) in d_grad.rows().iter().zip(d_grad.labels()) {
            let margin = y * Dataset::sparse_dot(row, x);
            let w = -y * sigmoid(-margin) / n;
            for &(i, v) in row {
                g[i] += w * v;
            }
        }
        g
    })
    .with_hess(move |x| {
        let mut h = DMatrix::identity(dim, dim) * beta;
        for (row, y) in d_hess.rows().iter().zip(d_hess.labels()) {
            let margin = y * Dataset::sparse_dot(row, x);
            let s = sigmoid(margin);
            let w = s * (1.0 - s) / n;
            for &(i, vi) in row {
                for &(j, vj) in row {
                    h[(i, j)] += w * vi * vj;
                }
            }
        }
        SymMatrix::symmetrize(h)
    });
    Ok(objective)
}
