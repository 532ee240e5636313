//! Seeded data generators for the simulation study: a dummy-design with rare
//! indicators ("model 1"), a one-way fixed-effects panel, and a partially
//! linear model approximated by a power-series basis.
//!
//! Each generator is split into a *design draw* (regressors, conditional
//! mean, per-observation error scale) and a *realisation* (adding fresh
//! noise), so a simulation can hold the design fixed across replications when
//! asked to. All randomness flows through [`CounterRng`] streams; equal specs
//! and seeds reproduce byte-identical data on any thread count.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::design::{unit_dummies, RegressionData};
use crate::normal::normal_cdf;
use crate::rng::CounterRng;
use crate::{Error, Result};

/// Draw budget for variance-constant calibration; keeps the relative Monte
/// Carlo error of the constants at ~0.05%.
pub const DEFAULT_CALIBRATION_DRAWS: usize = 10_000_000;

/// Calibration is numerical integration, not sampling variety: a fixed
/// internal seed makes the constants a pure function of (K, threshold,
/// draws).
const CALIBRATION_SEED: u64 = 271_828_182_845;

/// Clamp to [−2, 2] (endpoints included), the trimming used in the
/// heteroskedastic variance maps.
pub fn hetero_trim(a: f64) -> f64 {
    a.clamp(-2.0, 2.0)
}

/// E[min(|Z|, 2)²] for standard normal Z, in closed form:
/// 7 − 6Φ(2) − 4φ(2).
pub fn trimmed_square_moment() -> f64 {
    let phi2 = (-2.0_f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
    7.0 - 6.0 * normal_cdf(2.0) - 4.0 * phi2
}

/// P(v ≥ threshold) for standard normal v: the activation probability of
/// each dummy entry.
pub fn dummy_activation_probability(threshold: f64) -> f64 {
    1.0 - normal_cdf(threshold)
}

/// Rare-dummy design: y = β·x + γ′w + u with w an n×K matrix of independent
/// indicators 1(v ≥ threshold). The heteroskedastic branch scales x by
/// √(ϰᵥ(1+s²)) and u by √(ϰᵤ(1+(t(x)+s)²)) where s is the row sum of w, so
/// both keep unit unconditional variance.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Model1Spec {
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    /// Nuisance coefficients; empty means all zero.
    pub gamma: Vec<f64>,
    pub hetero: bool,
    pub dummy_threshold: f64,
    pub seed: u64,
}

impl Model1Spec {
    /// β = 1, γ = 0, threshold 2.5 — the simulation-study defaults.
    pub fn baseline(n: usize, k: usize, hetero: bool, seed: u64) -> Self {
        Model1Spec { n, k, beta: 1.0, gamma: vec![], hetero, dummy_threshold: 2.5, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("model1: n must be positive".into()));
        }
        if self.k >= self.n {
            return Err(Error::Config(format!(
                "model1: need K < n, got K = {}, n = {}",
                self.k, self.n
            )));
        }
        if !self.dummy_threshold.is_finite() {
            return Err(Error::Config("model1: dummy threshold must be finite".into()));
        }
        if !self.gamma.is_empty() && self.gamma.len() != self.k {
            return Err(Error::Config(format!(
                "model1: gamma has length {}, expected {} (or empty for zero)",
                self.gamma.len(),
                self.k
            )));
        }
        if !(self.beta.is_finite() && self.gamma.iter().all(|g| g.is_finite())) {
            return Err(Error::Config("model1: coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// One-way fixed-effects panel: Y_it = α_i + β·X_it + U_it, absorbed through
/// one dummy per unit (K = N, K/n = 1/T).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PanelSpec {
    pub n_units: usize,
    pub t_periods: usize,
    pub beta: f64,
    /// Unit intercepts; empty means all zero (they are absorbed either way).
    pub alpha: Vec<f64>,
    pub hetero: bool,
    pub seed: u64,
}

impl PanelSpec {
    pub fn baseline(n_units: usize, t_periods: usize, hetero: bool, seed: u64) -> Self {
        PanelSpec { n_units, t_periods, beta: 1.0, alpha: vec![], hetero, seed }
    }

    pub fn n(&self) -> usize {
        self.n_units * self.t_periods
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 {
            return Err(Error::Config("panel: need at least one unit".into()));
        }
        if self.t_periods < 2 {
            return Err(Error::Config(format!(
                "panel: need T ≥ 2 periods, got {}",
                self.t_periods
            )));
        }
        if !self.alpha.is_empty() && self.alpha.len() != self.n_units {
            return Err(Error::Config(format!(
                "panel: alpha has length {}, expected {} (or empty for zero)",
                self.alpha.len(),
                self.n_units
            )));
        }
        if !(self.beta.is_finite() && self.alpha.iter().all(|a| a.is_finite())) {
            return Err(Error::Config("panel: coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Smooth functions of z̄ (the coordinate mean of z) available to the
/// partially linear generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothFn {
    ExpMean,
    SinPiMean,
    QuadraticMean,
}

impl SmoothFn {
    pub fn name(self) -> &'static str {
        match self {
            SmoothFn::ExpMean => "exp-mean",
            SmoothFn::SinPiMean => "sin-pi-mean",
            SmoothFn::QuadraticMean => "quadratic-mean",
        }
    }

    pub fn eval(self, zbar: f64) -> f64 {
        match self {
            SmoothFn::ExpMean => zbar.exp(),
            SmoothFn::SinPiMean => (std::f64::consts::PI * zbar).sin(),
            SmoothFn::QuadraticMean => zbar * zbar,
        }
    }
}

impl fmt::Display for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmoothFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp-mean" => Ok(SmoothFn::ExpMean),
            "sin-pi-mean" => Ok(SmoothFn::SinPiMean),
            "quadratic-mean" => Ok(SmoothFn::QuadraticMean),
            other => Err(Error::Config(format!(
                "unknown smooth function '{other}' (expected exp-mean, sin-pi-mean, or quadratic-mean)"
            ))),
        }
    }
}

/// Partially linear model y = β·x + g(z) + ε with z uniform on [−1,1]^dim_z
/// and the nuisance block W holding every monomial in z of total degree ≤
/// `degree` (intercept included).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlmSpec {
    pub n: usize,
    pub dim_z: usize,
    pub degree: usize,
    pub beta: f64,
    pub g: SmoothFn,
    pub seed: u64,
}

impl PlmSpec {
    pub fn baseline(n: usize, dim_z: usize, degree: usize, seed: u64) -> Self {
        PlmSpec { n, dim_z, degree, beta: 1.0, g: SmoothFn::SinPiMean, seed }
    }

    /// Number of monomials of total degree ≤ `degree` in `dim_z` variables:
    /// C(degree + dim_z, dim_z).
    pub fn basis_dim(&self) -> usize {
        binomial(self.degree + self.dim_z, self.dim_z)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dim_z == 0 {
            return Err(Error::Config("plm: n and dim_z must be positive".into()));
        }
        let k = self.basis_dim();
        if k >= self.n {
            return Err(Error::Config(format!(
                "plm: basis dimension {k} must stay below n = {} (lower the degree or dim_z)",
                self.n
            )));
        }
        if !self.beta.is_finite() {
            return Err(Error::Config("plm: beta must be finite".into()));
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(acc).unwrap_or(usize::MAX)
}

/// Normalisation constants of the heteroskedastic branch, with the Monte
/// Carlo standard errors of their estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceConstants {
    /// 1/E[1 + (t(x) + ι′w)²]
    pub kappa_u: f64,
    /// 1/E[1 + (ι′w)²]
    pub kappa_v: f64,
    pub se_kappa_u: f64,
    pub se_kappa_v: f64,
}

/// One draw from Binomial(k, p) by CDF inversion; consumes exactly one
/// uniform, cheap when k·p is small.
fn sample_binomial(rng: &mut CounterRng, k: usize, p: f64) -> usize {
    if k == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return k;
    }
    let u = rng.next_uniform();
    let ratio = p / (1.0 - p);
    let mut pmf = (1.0 - p).powi(k as i32);
    let mut cdf = pmf;
    let mut s = 0usize;
    while u > cdf && s < k {
        pmf *= (k - s) as f64 / (s + 1) as f64 * ratio;
        s += 1;
        cdf += pmf;
    }
    s
}

/// Estimate ϰᵤ and ϰᵥ for a given dummy count and threshold by seeded Monte
/// Carlo integration (two independent passes of `draws` each: first the dummy
/// row-sum moment for ϰᵥ, then the trimmed-x moment for ϰᵤ).
pub fn calibrate_variance_constants_with(
    k: usize,
    threshold: f64,
    draws: usize,
    seed: u64,
) -> Result<VarianceConstants> {
    if draws < 2 {
        return Err(Error::Config("calibration needs at least 2 draws".into()));
    }
    if !threshold.is_finite() {
        return Err(Error::Config("calibration threshold must be finite".into()));
    }
    let p = dummy_activation_probability(threshold);
    let nf = draws as f64;

    // pass 1: m = 1 + s², s ~ Binomial(k, p)
    let mut rng_s = CounterRng::stream(seed, 0);
    let (mut sum_m, mut sum_m2) = (0.0, 0.0);
    for _ in 0..draws {
        let s = sample_binomial(&mut rng_s, k, p) as f64;
        let m = 1.0 + s * s;
        sum_m += m;
        sum_m2 += m * m;
    }
    let mean_v = sum_m / nf;
    let var_v = (sum_m2 / nf - mean_v * mean_v).max(0.0);
    let se_mean_v = (var_v / nf).sqrt();
    let kappa_v = 1.0 / mean_v;
    let se_kappa_v = se_mean_v / (mean_v * mean_v);

    // pass 2: m = 1 + (t(x) + s)² with x = √(ϰᵥ(1+s²))·η
    let mut rng_u = CounterRng::stream(seed, 1);
    let (mut sum_u, mut sum_u2) = (0.0, 0.0);
    for _ in 0..draws {
        let s = sample_binomial(&mut rng_u, k, p) as f64;
        let x = (kappa_v * (1.0 + s * s)).sqrt() * rng_u.next_normal();
        let m = 1.0 + (hetero_trim(x) + s) * (hetero_trim(x) + s);
        sum_u += m;
        sum_u2 += m * m;
    }
    let mean_u = sum_u / nf;
    let var_u = (sum_u2 / nf - mean_u * mean_u).max(0.0);
    let se_mean_u = (var_u / nf).sqrt();
    let kappa_u = 1.0 / mean_u;
    let se_kappa_u = se_mean_u / (mean_u * mean_u);

    Ok(VarianceConstants { kappa_u, kappa_v, se_kappa_u, se_kappa_v })
}

/// Calibration at the default budget and internal seed: a pure function of
/// (K, threshold).
pub fn default_calibration(k: usize, threshold: f64) -> Result<VarianceConstants> {
    calibrate_variance_constants_with(k, threshold, DEFAULT_CALIBRATION_DRAWS, CALIBRATION_SEED)
}

/// Calibration at the default draw budget. Only meaningful for the
/// heteroskedastic branch.
pub fn calibrate_variance_constants(spec: &Model1Spec) -> Result<VarianceConstants> {
    spec.validate()?;
    if !spec.hetero {
        return Err(Error::Config(
            "variance constants are defined by the heteroskedastic branch (hetero = false)".into(),
        ));
    }
    default_calibration(spec.k, spec.dummy_threshold)
}

/// A drawn design: everything but the error realisation. `sigma` holds the
/// per-observation error standard deviation (all ones when homoskedastic).
#[derive(Debug, Clone)]
pub struct DesignDraw {
    pub x: Array2<f64>,
    pub w: Array2<f64>,
    /// E[y | x, w].
    pub mean: Array1<f64>,
    pub sigma: Array1<f64>,
    pub true_beta: f64,
    pub hetero: bool,
}

impl DesignDraw {
    /// Add fresh noise: y = mean + sigma ⊙ ε with ε standard normal.
    pub fn realize(&self, rng: &mut CounterRng) -> RegressionData {
        let n = self.mean.len();
        let y = Array1::from_shape_fn(n, |i| self.mean[i] + self.sigma[i] * rng.next_normal());
        RegressionData { y, x: self.x.clone(), w: self.w.clone(), }
    }

    pub fn sigma_sq(&self) -> Option<Array1<f64>> {
        self.hetero.then(|| self.sigma.mapv(|s| s * s))
    }
}

/// Generated data plus the ground truth needed to score an interval.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub data: RegressionData,
    pub true_beta: f64,
    /// Per-observation error variances; None for homoskedastic branches.
    pub sigma_sq: Option<Array1<f64>>,
}

/// Draw the rare-dummy design. `constants` are required only by the
/// heteroskedastic branch; passing None calibrates at the default budget
/// (expensive — reuse [`VarianceConstants`] across draws where possible).
pub fn draw_model1_design(
    spec: &Model1Spec,
    constants: Option<&VarianceConstants>,
    rng: &mut CounterRng,
) -> Result<DesignDraw> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k);

    let mut w = Array2::zeros((n, k));
    for j in 0..k {
        for i in 0..n {
            if rng.next_normal() >= spec.dummy_threshold {
                w[(i, j)] = 1.0;
            }
        }
    }
    let row_sum = Array1::from_shape_fn(n, |i| w.row(i).sum());

    let x = if spec.hetero {
        let owned;
        let c = match constants {
            Some(c) => c,
            None => {
                owned = calibrate_variance_constants(spec)?;
                &owned
            }
        };
        let draw = Array2::from_shape_fn((n, 1), |(i, _)| {
            let s = row_sum[i];
            (c.kappa_v * (1.0 + s * s)).sqrt() * rng.next_normal()
        });
        let sigma = Array1::from_shape_fn(n, |i| {
            let q = hetero_trim(draw[(i, 0)]) + row_sum[i];
            (c.kappa_u * (1.0 + q * q)).sqrt()
        });
        return assemble_model1(spec, draw, w, sigma, true);
    } else {
        Array2::from_shape_fn((n, 1), |_| rng.next_normal())
    };
    let sigma = Array1::from_elem(n, 1.0);
    assemble_model1(spec, x, w, sigma, false)
}

fn assemble_model1(
    spec: &Model1Spec,
    x: Array2<f64>,
    w: Array2<f64>,
    sigma: Array1<f64>,
    hetero: bool,
) -> Result<DesignDraw> {
    let n = spec.n;
    let mut mean = Array1::from_shape_fn(n, |i| spec.beta * x[(i, 0)]);
    if !spec.gamma.is_empty() {
        let gamma = Array1::from_vec(spec.gamma.clone());
        mean = mean + w.dot(&gamma);
    }
    Ok(DesignDraw { x, w, mean, sigma, true_beta: spec.beta, hetero })
}

/// Draw the fixed-effects panel design (X i.i.d. standard normal; the unit
/// dummies are deterministic). The heteroskedastic error scale is
/// ϰ(1 + t(Xᵢₜ)²) with ϰ = 1/(1 + E[t(Z)²]), keeping V[U] = 1.
pub fn draw_panel_design(spec: &PanelSpec, rng: &mut CounterRng) -> Result<DesignDraw> {
    spec.validate()?;
    let n = spec.n();
    let t = spec.t_periods;
    let w = unit_dummies(spec.n_units, t);
    let x = Array2::from_shape_fn((n, 1), |_| rng.next_normal());

    let mean = Array1::from_shape_fn(n, |i| {
        let a = if spec.alpha.is_empty() { 0.0 } else { spec.alpha[i / t] };
        a + spec.beta * x[(i, 0)]
    });
    let sigma = if spec.hetero {
        let kappa = 1.0 / (1.0 + trimmed_square_moment());
        Array1::from_shape_fn(n, |i| {
            let tx = hetero_trim(x[(i, 0)]);
            (kappa * (1.0 + tx * tx)).sqrt()
        })
    } else {
        Array1::from_elem(n, 1.0)
    };
    Ok(DesignDraw { x, w, mean, sigma, true_beta: spec.beta, hetero: spec.hetero })
}

/// Exponent tuples of all monomials in `dim` variables with total degree ≤
/// `max_deg`, ordered by total degree then reverse-lex — the intercept comes
/// first.
fn monomial_exponents(dim: usize, max_deg: usize) -> Vec<Vec<u32>> {
    fn fill(dim: usize, deg: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if dim == 1 {
            prefix.push(deg);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=deg).rev() {
            prefix.push(e);
            fill(dim - 1, deg - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(dim);
    for total in 0..=max_deg as u32 {
        fill(dim, total, &mut prefix, &mut out);
    }
    out
}

/// Draw the partially linear design: z uniform on [−1,1]^dim_z, W the
/// power-series basis, x = m(z̄) + ν with m(z̄) = z̄ + sin(πz̄)/2, and the
/// conditional mean β·x + g(z̄). Errors are homoskedastic standard normal.
pub fn draw_plm_design(spec: &PlmSpec, rng: &mut CounterRng) -> Result<DesignDraw> {
    spec.validate()?;
    let n = spec.n;
    let dz = spec.dim_z;

    let z = Array2::from_shape_fn((n, dz), |_| 2.0 * rng.next_uniform() - 1.0);
    let zbar = Array1::from_shape_fn(n, |i| z.row(i).sum() / dz as f64);

    let exps = monomial_exponents(dz, spec.degree);
    debug_assert_eq!(exps.len(), spec.basis_dim());
    let mut w = Array2::from_elem((n, exps.len()), 1.0);
    for (j, exp) in exps.iter().enumerate() {
        for i in 0..n {
            let mut v = 1.0;
            for (c, &e) in exp.iter().enumerate() {
                if e > 0 {
                    v *= z[(i, c)].powi(e as i32);
                }
            }
            w[(i, j)] = v;
        }
    }

    let x = Array2::from_shape_fn((n, 1), |(i, _)| {
        let m = zbar[i] + (std::f64::consts::PI * zbar[i]).sin() / 2.0;
        m + rng.next_normal()
    });
    let mean = Array1::from_shape_fn(n, |i| spec.beta * x[(i, 0)] + spec.g.eval(zbar[i]));
    let sigma = Array1::from_elem(n, 1.0);
    Ok(DesignDraw { x, w, mean, sigma, true_beta: spec.beta, hetero: false })
}

/// One-shot generation from a rare-dummy config (design stream 0, noise
/// stream 1 of `spec.seed`). The heteroskedastic branch calibrates constants at
/// the default budget; callers generating repeatedly should calibrate once
/// and use [`draw_model1_design`] + [`DesignDraw::realize`].
pub fn gen_model1(spec: &Model1Spec) -> Result<GeneratedData> {
    gen_model1_with(spec, None)
}

/// Like [`gen_model1`] with precomputed calibration constants.
pub fn gen_model1_with(
    spec: &Model1Spec,
    constants: Option<&VarianceConstants>,
) -> Result<GeneratedData> {
    let mut design_rng = CounterRng::stream(spec.seed, 0);
    let draw = draw_model1_design(spec, constants, &mut design_rng)?;
    let mut noise_rng = CounterRng::stream(spec.seed, 1);
    let data = draw.realize(&mut noise_rng);
    Ok(GeneratedData { data, true_beta: draw.true_beta, sigma_sq: draw.sigma_sq() })
}

/// One-shot generation from a panel spec.
pub fn gen_panel(spec: &PanelSpec) -> Result<GeneratedData> {
    let mut design_rng = CounterRng::stream(spec.seed, 0);
    let draw = draw_panel_design(spec, &mut design_rng)?;
    let mut noise_rng = CounterRng::stream(spec.seed, 1);
    let data = draw.realize(&mut noise_rng);
    Ok(GeneratedData { data, true_beta: draw.true_beta, sigma_sq: draw.sigma_sq() })
}

/// One-shot generation from a partially linear spec.
pub fn gen_plm(spec: &PlmSpec) -> Result<GeneratedData> {
    let mut design_rng = CounterRng::stream(spec.seed, 0);
    let draw = draw_plm_design(spec, &mut design_rng)?;
    let mut noise_rng = CounterRng::stream(spec.seed, 1);
    let data = draw.realize(&mut noise_rng);
    Ok(GeneratedData { data, true_beta: draw.true_beta, sigma_sq: draw.sigma_sq() })
}
