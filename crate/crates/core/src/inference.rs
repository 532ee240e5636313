//! Interval construction: Gaussian intervals from a sandwich variance, and a
//! pairs percentile-t bootstrap that re-runs the whole pipeline per resample.
//!
//! Intervals never panic on statistical pathologies. A nonpositive variance,
//! an infeasible design, or a degenerate bootstrap produces an
//! [`IntervalEstimate`] with `failed = true` and a reason; hard errors are
//! reserved for misuse (bad level, bad coordinate).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::design::{RegressionData, DEFAULT_MAX_N, DEFAULT_PIVOT_RTOL};
use crate::normal::normal_quantile;
use crate::regression::{fit_pipeline, PartialledFit};
use crate::rng::CounterRng;
use crate::variance::{compute_meat, sandwich, EstimatorKind, SandwichEstimate};
use crate::{Error, Result};

/// How an interval's critical values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Gaussian,
    Bootstrap,
}

impl CiMethod {
    pub fn name(self) -> &'static str {
        match self {
            CiMethod::Gaussian => "gaussian",
            CiMethod::Bootstrap => "bootstrap",
        }
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(CiMethod::Gaussian),
            "bootstrap" => Ok(CiMethod::Bootstrap),
            other => Err(Error::Config(format!(
                "unknown interval method '{other}' (expected gaussian or bootstrap)"
            ))),
        }
    }
}

/// One two-sided interval. When `failed`, the endpoints are NaN and `reason`
/// says why; such intervals never cover anything.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct IntervalEstimate {
    pub estimator: EstimatorKind,
    pub method: CiMethod,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub failed: bool,
    pub reason: Option<String>,
}

impl IntervalEstimate {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, value: f64) -> bool {
        !self.failed && self.lower <= value && value <= self.upper
    }

    fn failure(
        estimator: EstimatorKind,
        method: CiMethod,
        level: f64,
        reason: String,
    ) -> Self {
        IntervalEstimate {
            estimator,
            method,
            level,
            lower: f64::NAN,
            upper: f64::NAN,
            failed: true,
            reason: Some(reason),
        }
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level must be in (0,1), got {level}")));
    }
    Ok(())
}

/// Studentised statistic (β̂ⱼ − β₀)/se with se = √(Ω̂ⱼⱼ/n).
pub fn t_statistic(beta_hat_j: f64, beta0: f64, omega_jj: f64, n: usize) -> Result<f64> {
    if !(omega_jj > 0.0) {
        return Err(Error::NegativeVariance { value: omega_jj });
    }
    let se = (omega_jj / n as f64).sqrt();
    Ok((beta_hat_j - beta0) / se)
}

/// Gaussian interval β̂ⱼ ± z_{1−α/2}·√(Ω̂ⱼⱼ/n) from scalar inputs.
pub fn gaussian_interval(
    beta_hat_j: f64,
    omega_jj: f64,
    n: usize,
    level: f64,
    kind: EstimatorKind,
) -> Result<IntervalEstimate> {
    check_level(level)?;
    if n == 0 {
        return Err(Error::Config("empty sample".into()));
    }
    if !(omega_jj > 0.0) {
        return Ok(IntervalEstimate::failure(
            kind,
            CiMethod::Gaussian,
            level,
            format!("nonpositive variance estimate ({omega_jj:.3e})"),
        ));
    }
    let alpha = 1.0 - level;
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    let se = (omega_jj / n as f64).sqrt();
    Ok(IntervalEstimate {
        estimator: kind,
        method: CiMethod::Gaussian,
        level,
        lower: beta_hat_j - z * se,
        upper: beta_hat_j + z * se,
        failed: false,
        reason: None,
    })
}

/// Gaussian interval for coordinate `coord` of a fitted model.
pub fn gaussian_ci(
    fit: &PartialledFit,
    sw: &SandwichEstimate,
    level: f64,
    coord: usize,
) -> Result<IntervalEstimate> {
    if coord >= fit.d {
        return Err(Error::Config(format!("coordinate {coord} out of range (d = {})", fit.d)));
    }
    gaussian_interval(fit.beta_hat[coord], sw.omega[(coord, coord)], fit.n, level, sw.kind)
}

/// Linear-interpolation quantile (the common "type 7" convention) of an
/// already sorted slice.
fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
}

fn resample_rows(data: &RegressionData, rng: &mut CounterRng) -> RegressionData {
    let n = data.n();
    let d = data.d();
    let k = data.w.ncols();
    let mut y = Array1::zeros(n);
    let mut x = Array2::zeros((n, d));
    let mut w = Array2::zeros((n, k));
    for i in 0..n {
        let src = rng.next_index(n);
        y[i] = data.y[src];
        x.row_mut(i).assign(&data.x.row(src));
        w.row_mut(i).assign(&data.w.row(src));
    }
    RegressionData { y, x, w }
}

/// Pairs percentile-t bootstrap for coordinate `coord`.
///
/// Every resample repeats the full pipeline — prune, annihilate, fit, meat,
/// sandwich — so infeasible or degenerate resamples surface naturally; a
/// resample also fails if pruning keeps a different number of nuisance
/// columns than the original data. If more than 10% of resamples fail, the
/// interval as a whole is reported failed with a breakdown by cause.
///
/// Resampling is deterministic in (`seed`, resample index): results are
/// byte-identical regardless of thread count.
pub fn bootstrap_ci(
    data: &RegressionData,
    estimator: EstimatorKind,
    level: f64,
    b: usize,
    seed: u64,
    coord: usize,
) -> Result<IntervalEstimate> {
    check_level(level)?;
    if b == 0 {
        return Err(Error::Config("bootstrap needs at least one resample".into()));
    }
    if coord >= data.d() {
        return Err(Error::Config(format!("coordinate {coord} out of range (d = {})", data.d())));
    }

    let (fit, prune) = fit_pipeline(data, DEFAULT_MAX_N, DEFAULT_PIVOT_RTOL)?;
    let k_orig = prune.k_effective;
    let beta0 = fit.beta_hat[coord];

    let omega0 = match compute_meat(&fit, estimator) {
        Ok(meat) => sandwich(&fit, &meat).omega[(coord, coord)],
        Err(e) if e.is_infeasibility() => {
            return Ok(IntervalEstimate::failure(estimator, CiMethod::Bootstrap, level, e.to_string()))
        }
        Err(e) => return Err(e),
    };
    if !(omega0 > 0.0) {
        return Ok(IntervalEstimate::failure(
            estimator,
            CiMethod::Bootstrap,
            level,
            format!("nonpositive variance estimate ({omega0:.3e}) on the original sample"),
        ));
    }
    let se0 = (omega0 / fit.n as f64).sqrt();

    let draws: Vec<std::result::Result<f64, &'static str>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = CounterRng::stream(seed, r as u64);
            let star = resample_rows(data, &mut rng);
            let (fit_s, prune_s) =
                fit_pipeline(&star, DEFAULT_MAX_N, DEFAULT_PIVOT_RTOL).map_err(|e| e.kind_key())?;
            if prune_s.k_effective != k_orig {
                return Err("prune-rank-changed");
            }
            let meat_s = compute_meat(&fit_s, estimator).map_err(|e| e.kind_key())?;
            let omega_s = sandwich(&fit_s, &meat_s).omega[(coord, coord)];
            t_statistic(fit_s.beta_hat[coord], beta0, omega_s, fit_s.n).map_err(|e| e.kind_key())
        })
        .collect();

    let mut t_stats: Vec<f64> = Vec::with_capacity(b);
    let mut failures: BTreeMap<&'static str, usize> = BTreeMap::new();
    for d in draws {
        match d {
            Ok(t) => t_stats.push(t),
            Err(key) => *failures.entry(key).or_insert(0) += 1,
        }
    }
    let n_failed = b - t_stats.len();
    if 10 * n_failed > b {
        let detail: Vec<String> =
            failures.iter().map(|(k, c)| format!("{k}: {c}")).collect();
        return Ok(IntervalEstimate::failure(
            estimator,
            CiMethod::Bootstrap,
            level,
            format!(
                "{n_failed}/{b} resamples failed (over the 10% budget) [{}]",
                detail.join(", ")
            ),
        ));
    }

    t_stats.sort_unstable_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let q_lo = quantile_type7(&t_stats, alpha / 2.0);
    let q_hi = quantile_type7(&t_stats, 1.0 - alpha / 2.0);

    Ok(IntervalEstimate {
        estimator,
        method: CiMethod::Bootstrap,
        level,
        lower: beta0 - q_hi * se0,
        upper: beta0 - q_lo * se0,
        failed: false,
        reason: None,
    })
}
