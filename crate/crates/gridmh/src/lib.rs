//! Bayesian inference for Gibbs random fields with intractable normalizing
//! constants, built around an offline pre-computation stage: sufficient
//! statistics are simulated once on a posterior-adapted parameter grid, and
//! approximate Metropolis chains then estimate every normalizing-constant
//! ratio from the stored statistics instead of fresh auxiliary simulation.
//!
//! The crate is organized as:
//! - [`models`]: the Gibbs random field families (Erdős–Rényi, Ising,
//!   autologistic, two ERGM variants, a toy Gaussian precision model),
//!   their sufficient statistics, auxiliary Gibbs samplers and exact
//!   normalizing constants where tractable.
//! - [`grid`]: Monte Carlo gradient/Hessian estimates of the log posterior,
//!   Robbins-Monro mode search, and the eigenbasis-aligned grid builder.
//! - [`precompute`]: the parallel offline sampling stage, the on-disk
//!   format, and geometric queries (eigen-coordinates, nearest grid point).
//! - [`estimators`]: One Pivot, Direct Path and Full Path estimators of
//!   `Z(θ)/Z(θ')` from pre-computed statistics.
//! - [`chains`]: exact Metropolis-Hastings, exchange, noisy MH,
//!   pre-computing Metropolis and pre-computing MCMC-ABC samplers.
//! - [`diagnostics`]: total-variation occupation curves, effective sample
//!   size, and the estimator bias/variance studies.
//! - [`studies`]: end-to-end desk-scale experiment pipelines used by the
//!   CLI.

pub mod chains;
pub mod diagnostics;
pub mod estimators;
pub mod grid;
mod linalg;
pub mod models;
pub mod precompute;
pub mod prior;
pub mod rngstream;
pub mod studies;

pub use chains::{ChainTrace, Proposal, Target};
pub use estimators::{EstimatorKind, GridPath, RatioEstimate};
pub use grid::Grid;
pub use models::{GrfModel, ModelState, SuffStats};
pub use precompute::PrecompData;
pub use prior::Prior;

/// Top-level error type shared by the library modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("state shape does not match model: {0}")]
    InvalidState(String),
    #[error("parameter dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("normalizing constant is intractable for this model")]
    Intractable,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("stochastic approximation diverged: |theta| exceeded {bound} at step {step}")]
    Diverged { bound: f64, step: usize },
    #[error("grid is disconnected: no path between grid points {from} and {to}")]
    DisconnectedGrid { from: usize, to: usize },
    #[error("ratio estimate is not finite ({0})")]
    NonFiniteEstimate(String),
    #[error("estimator failed at chain iteration {iter}: {source}")]
    ChainEstimator {
        iter: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("operation only supports d = 1 grids, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("need at least {need} values, got {got}")]
    TooFewValues { need: usize, got: usize },
    #[error("precomputed data file: {0}")]
    Precomp(#[from] precompute::FileError),
    #[error("model mismatch: precomputed data is for {file}, target is {target}")]
    ModelMismatch { file: String, target: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Serial fallback for the parallel maps when the `parallel` feature is off.
#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U + Sync + Send,
    T: Send,
    U: Send,
{
    items.into_iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U + Sync + Send,
    T: Send,
    U: Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}
