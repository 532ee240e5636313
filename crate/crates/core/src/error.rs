//! Error taxonomy for the estimation pipeline.
//!
//! Variants are grouped by the stage that raises them; messages are written so
//! a CLI can surface them verbatim.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Input arrays contain NaN/Inf or have inconsistent shapes.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The dense n×n residual-maker matrix would exceed the configured cap.
    #[error("design too large: n = {n} rows exceeds the memory cap of {cap} (raise the cap to proceed)")]
    DesignTooLarge { n: usize, cap: usize },

    /// The regressors of interest are (numerically) collinear with the
    /// nuisance covariates; no coefficient is identified.
    #[error("regressors of interest are collinear with the nuisance covariates (min eigenvalue of the partialled Gram matrix = {min_eig:.3e})")]
    CollinearRegressors { min_eig: f64 },

    /// A leverage-weighted estimator hit an observation that is fit exactly
    /// by the nuisance covariates (M_ii = 0), so 1/M_ii^ξ is undefined.
    #[error("unit leverage observation(s) {indices:?}: these rows are fit exactly by the nuisance covariates, so leverage-weighted variance estimators are undefined")]
    UnitLeverage { indices: Vec<usize> },

    /// The bias-corrected estimator requires max leverage < 1/2.
    #[error("HCK infeasible: leverage statistic {mcal:.6} >= 1/2 (the Hadamard system is not guaranteed invertible; reduce covariates or use HC0/HO)")]
    HckInfeasible { mcal: f64 },

    /// A linear system factorization broke down (matrix singular to working
    /// precision). Carries the offending pivot value.
    #[error("{what} is numerically singular (pivot {pivot:.3e})")]
    SingularFactor { what: &'static str, pivot: f64 },

    /// A variance estimate came out non-positive, so no t-statistic or
    /// interval can be formed from it.
    #[error("negative variance estimate ({value:.3e}); interval undefined")]
    NegativeVariance { value: f64 },

    /// Argument outside its mathematical domain (e.g. quantile p ∉ (0,1)).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid simulation or estimator configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Percentile-t bootstrap failed (too many degenerate resamples).
    #[error("bootstrap failed: {0}")]
    BootstrapFailed(String),
}

impl Error {
    /// True for errors that describe a well-posed but infeasible request
    /// (reported as results), as opposed to unusable inputs.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::HckInfeasible { .. }
                | Error::UnitLeverage { .. }
                | Error::NegativeVariance { .. }
                | Error::SingularFactor { .. }
        )
    }

    /// Stable short key naming the failure class, for aggregating failure
    /// counts across replications.
    pub fn kind_key(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::DesignTooLarge { .. } => "design-too-large",
            Error::CollinearRegressors { .. } => "collinear",
            Error::UnitLeverage { .. } => "unit-leverage",
            Error::HckInfeasible { .. } => "hck-infeasible",
            Error::SingularFactor { .. } => "singular-factor",
            Error::NegativeVariance { .. } => "negative-variance",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::BootstrapFailed(_) => "bootstrap-failed",
        }
    }
}
