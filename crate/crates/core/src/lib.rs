//! OLS inference that remains valid when the number of nuisance covariates is a
//! non-negligible fraction of the sample size.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`design`] — prune collinear nuisance columns, build the residual-maker
//!    matrix `M` and its leverage diagnostics;
//! 2. [`regression`] — fit the partialled-out least-squares coefficients;
//! 3. [`variance`] — classical (`HO0`/`HO1`), leverage-weighted (`HC0`–`HC4`)
//!    and bias-corrected (`HCK`, via the Hadamard system `(M⊙M)ũ² = û²`)
//!    sandwich variance estimators;
//! 4. [`inference`] — normal-quantile and percentile-t bootstrap confidence
//!    intervals;
//! 5. [`dgp`] / [`montecarlo`] — simulation designs and a deterministic,
//!    thread-count-independent coverage harness.
//!
//! All randomness flows through a counter-based generator ([`rng::CounterRng`])
//! so results are byte-identical for a fixed seed regardless of parallelism.

pub mod design;
pub mod dgp;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod montecarlo;
pub mod normal;
pub mod regression;
pub mod rng;
pub mod variance;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
