//! Zeroth-order optimization built around a mirror-descent natural evolution
//! strategy whose covariance state tracks the inverse Hessian of the objective.
//!
//! The crate provides:
//!
//! * [`spectral`] — symmetric-matrix primitives: eigendecomposition, SPD
//!   square root / inverse / log-determinant, the log-det Bregman divergence,
//!   and spectral projections onto matrix intervals.
//! * [`objectives`] — benchmark objectives (rotated quadratics, `ssphere`,
//!   `diffpow`, regularized logistic regression) with exact gradient/Hessian
//!   oracles where available, plus a libsvm-format dataset parser.
//! * [`estimators`] — seeded Gaussian direction batches and the stochastic
//!   estimators: the antithetic natural-gradient estimate of the mean update,
//!   the covariance-inverse mirror-gradient estimate, its quadratic closed
//!   form, and the plain derivative-free gradient estimate.
//! * [`optimizers`] — the mirror-NES loop with spectral projection and step
//!   schedules, a vanilla NES baseline, and a derivative-free baseline, all
//!   producing per-iteration run traces with an exact query ledger.
//! * [`verify`] — independent numerical oracles: Gaussian quadratic-form
//!   moments, Monte Carlo estimator checks with jackknife errors, power-law
//!   rate fitting, and the spectral sandwich test.

pub mod estimators;
pub mod objectives;
pub mod optimizers;
pub mod spectral;
pub mod verify;

pub use estimators::{DirectionBatch, SearchDistribution};
pub use objectives::{Dataset, Objective};
pub use optimizers::{Algo, IterRecord, MinesConfig, RunTrace};
pub use spectral::{ConstraintBox, EigenPair, SymMatrix};
