//! Variance estimation for the partialled coefficient: classical
//! homoskedastic estimates, the HC0–HC4 diagonal-weight family, and the
//! bias-corrected estimator that solves a linear system in the squared
//! annihilator.
//!
//! All estimators share the sandwich form Ω̂ = Γ̂⁻¹ Σ̂ Γ̂⁻¹ and differ only in
//! the meat Σ̂. The bias-corrected one ("HCK") replaces squared residuals ûᵢ²
//! with ũᵢ² solving (M⊙M) ũ² = û²; that system is solvable exactly when the
//! maximum leverage stays below 1/2, which is also where its conditioning is
//! controlled by the row-sum bound exposed in the diagnostics.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::design::AnnihilatorRep;
use crate::linalg::sym_eigenvalues;
use crate::regression::PartialledFit;
use crate::{Error, Result};

/// Below this, a diagonal entry of M is treated as unit leverage: the
/// observation is fitted exactly and leverage-exponent weights blow up.
pub const UNIT_LEVERAGE_TOL: f64 = 1e-12;

/// Eigenvalue slack for calling a computed meat/sandwich matrix PSD.
const PSD_SLACK: f64 = 1e-10;

/// Which variance estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EstimatorKind {
    Ho0,
    Ho1,
    Hc0,
    Hc1,
    Hc2,
    Hc3,
    Hc4,
    Hck,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 8] = [
        EstimatorKind::Ho0,
        EstimatorKind::Ho1,
        EstimatorKind::Hc0,
        EstimatorKind::Hc1,
        EstimatorKind::Hc2,
        EstimatorKind::Hc3,
        EstimatorKind::Hc4,
        EstimatorKind::Hck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ho0 => "HO0",
            EstimatorKind::Ho1 => "HO1",
            EstimatorKind::Hc0 => "HC0",
            EstimatorKind::Hc1 => "HC1",
            EstimatorKind::Hc2 => "HC2",
            EstimatorKind::Hc3 => "HC3",
            EstimatorKind::Hc4 => "HC4",
            EstimatorKind::Hck => "HCK",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "HO0" => Ok(EstimatorKind::Ho0),
            "HO1" => Ok(EstimatorKind::Ho1),
            "HC0" => Ok(EstimatorKind::Hc0),
            "HC1" => Ok(EstimatorKind::Hc1),
            "HC2" => Ok(EstimatorKind::Hc2),
            "HC3" => Ok(EstimatorKind::Hc3),
            "HC4" => Ok(EstimatorKind::Hc4),
            "HCK" => Ok(EstimatorKind::Hck),
            other => Err(Error::Config(format!(
                "unknown estimator '{other}' (expected one of HO0 HO1 HC0 HC1 HC2 HC3 HC4 HCK)"
            ))),
        }
    }
}

/// Estimator-specific byproducts worth reporting next to the meat.
#[derive(Debug, Clone, PartialEq)]
pub enum MeatAux {
    None,
    /// Homoskedastic: the scalar error-variance estimate and its divisor.
    Sigma2 { sigma2: f64, dof: f64 },
    /// Bias-corrected: sign diagnostics of the solved ũ² and the row-sum
    /// conditioning bound of the Hadamard system.
    Kappa { negative_u2: usize, min_u2: f64, varah_bound: f64 },
}

/// A meat matrix Σ̂ (d×d) plus a PSD verdict and auxiliary diagnostics.
#[derive(Debug, Clone)]
pub struct MeatEstimate {
    pub kind: EstimatorKind,
    pub sigma: Array2<f64>,
    pub psd: bool,
    pub aux: MeatAux,
}

/// Ω̂ = Γ̂⁻¹ Σ̂ Γ̂⁻¹, the variance of √n(β̂ − β).
#[derive(Debug, Clone)]
pub struct SandwichEstimate {
    pub kind: EstimatorKind,
    pub omega: Array2<f64>,
    pub psd: bool,
}

fn psd_verdict(a: &Array2<f64>) -> bool {
    let eigs = sym_eigenvalues(a);
    let trace: f64 = (0..a.nrows()).map(|i| a[(i, i)]).sum();
    eigs[0] >= -PSD_SLACK * trace
}

/// Σ = (1/n) Σᵢ sᵢ v̂ᵢ v̂ᵢ′ for per-observation scalars sᵢ.
fn scaled_gram(vhat: &Array2<f64>, s: &Array1<f64>) -> Array2<f64> {
    let (n, d) = vhat.dim();
    let mut sigma = Array2::zeros((d, d));
    for i in 0..n {
        let vi = vhat.row(i);
        let si = s[i];
        for a in 0..d {
            let f = si * vi[a];
            for b in a..d {
                sigma[(a, b)] += f * vi[b];
            }
        }
    }
    let nf = n as f64;
    for a in 0..d {
        for b in a..d {
            let v = sigma[(a, b)] / nf;
            sigma[(a, b)] = v;
            sigma[(b, a)] = v;
        }
    }
    sigma
}

/// Homoskedastic meat σ̂²Γ̂, with σ̂² = û′û/n (`dof_adjust = false`) or
/// û′û/(n − d − K) (`dof_adjust = true`).
pub fn meat_ho(fit: &PartialledFit, dof_adjust: bool) -> Result<MeatEstimate> {
    let n = fit.n as f64;
    let ssr = fit.uhat.dot(&fit.uhat);
    let dof = if dof_adjust { n - (fit.d + fit.annihilator.k_effective) as f64 } else { n };
    // fit construction guarantees n > d + K, so dof > 0 either way
    let sigma2 = ssr / dof;
    let sigma = fit.gamma.mapv(|g| sigma2 * g);
    let psd = psd_verdict(&sigma);
    let kind = if dof_adjust { EstimatorKind::Ho1 } else { EstimatorKind::Ho0 };
    Ok(MeatEstimate { kind, sigma, psd, aux: MeatAux::Sigma2 { sigma2, dof } })
}

/// Per-observation weight κᵢᵢ = Υᵢ · Mᵢᵢ^(−ξᵢ) for the diagonal HC family.
fn hc_weights(fit: &PartialledFit, kind: EstimatorKind) -> Result<Array1<f64>> {
    let n = fit.n;
    let k = fit.annihilator.k_effective;
    let m_diag = fit.annihilator.m_diag();

    let needs_leverage = matches!(kind, EstimatorKind::Hc2 | EstimatorKind::Hc3 | EstimatorKind::Hc4);
    if needs_leverage {
        let offenders: Vec<usize> =
            (0..n).filter(|&i| m_diag[i] <= UNIT_LEVERAGE_TOL).collect();
        if !offenders.is_empty() {
            return Err(Error::UnitLeverage { indices: offenders });
        }
    }

    let nf = n as f64;
    let w = match kind {
        EstimatorKind::Hc0 => Array1::from_elem(n, 1.0),
        EstimatorKind::Hc1 => {
            let dof = nf - (fit.d + k) as f64;
            Array1::from_elem(n, nf / dof)
        }
        EstimatorKind::Hc2 => m_diag.mapv(|m| 1.0 / m),
        EstimatorKind::Hc3 => m_diag.mapv(|m| 1.0 / (m * m)),
        EstimatorKind::Hc4 => {
            if k == 0 {
                Array1::from_elem(n, 1.0)
            } else {
                let kf = k as f64;
                m_diag.mapv(|m| {
                    let xi = (nf * m / kf).min(4.0);
                    m.powf(-xi)
                })
            }
        }
        other => {
            return Err(Error::Config(format!("{other} is not a diagonal-weight estimator")))
        }
    };
    Ok(w)
}

/// HC0–HC4 meat: Σ̂ = (1/n) Σᵢ κᵢᵢ ûᵢ² v̂ᵢv̂ᵢ′.
pub fn meat_hc_diag(fit: &PartialledFit, kind: EstimatorKind) -> Result<MeatEstimate> {
    let kappa = hc_weights(fit, kind)?;
    let s = Array1::from_shape_fn(fit.n, |i| kappa[i] * fit.uhat[i] * fit.uhat[i]);
    let sigma = scaled_gram(&fit.vhat, &s);
    let psd = psd_verdict(&sigma);
    Ok(MeatEstimate { kind, sigma, psd, aux: MeatAux::None })
}

/// Solve (M⊙M) ũ² = û² for the bias-corrected squared residuals.
///
/// Feasibility is the strict leverage condition 𝓜 < 1/2, under which M⊙M is
/// strictly diagonally dominant, hence positive definite; the factor is
/// computed once per design and cached. Individual ũᵢ² may legitimately come
/// out negative.
pub fn solve_kappa_system(rep: &AnnihilatorRep, u_sq: &Array1<f64>) -> Result<Array1<f64>> {
    if u_sq.len() != rep.n {
        return Err(Error::InvalidInput(format!(
            "û² has length {}, design has n = {}",
            u_sq.len(),
            rep.n
        )));
    }
    if !rep.hck_feasible() {
        return Err(Error::HckInfeasible { mcal: rep.mcal });
    }
    let chol = rep.hadamard_cholesky()?;
    Ok(chol.solve(u_sq))
}

/// Bias-corrected meat: Σ̂ = (1/n) Σᵢ ũᵢ² v̂ᵢv̂ᵢ′ with (M⊙M) ũ² = û².
pub fn meat_hck(fit: &PartialledFit) -> Result<MeatEstimate> {
    let u_sq = fit.uhat.mapv(|u| u * u);
    let u_tilde_sq = solve_kappa_system(&fit.annihilator, &u_sq)?;

    let negative_u2 = u_tilde_sq.iter().filter(|&&v| v < 0.0).count();
    let min_u2 = u_tilde_sq.iter().copied().fold(f64::INFINITY, f64::min);
    let sigma = scaled_gram(&fit.vhat, &u_tilde_sq);
    let psd = psd_verdict(&sigma);
    Ok(MeatEstimate {
        kind: EstimatorKind::Hck,
        sigma,
        psd,
        aux: MeatAux::Kappa { negative_u2, min_u2, varah_bound: fit.annihilator.varah_bound() },
    })
}

/// Dispatch on estimator kind.
pub fn compute_meat(fit: &PartialledFit, kind: EstimatorKind) -> Result<MeatEstimate> {
    match kind {
        EstimatorKind::Ho0 => meat_ho(fit, false),
        EstimatorKind::Ho1 => meat_ho(fit, true),
        EstimatorKind::Hck => meat_hck(fit),
        diag => meat_hc_diag(fit, diag),
    }
}

/// Wrap the meat in the sandwich: Ω̂ = Γ̂⁻¹ Σ̂ Γ̂⁻¹.
pub fn sandwich(fit: &PartialledFit, meat: &MeatEstimate) -> SandwichEstimate {
    let t1 = fit.gamma_solve_mat(&meat.sigma); // Γ⁻¹Σ
    let mut omega = fit.gamma_solve_mat(&t1.t().to_owned()).t().to_owned(); // Γ⁻¹ΣΓ⁻¹
    let d = omega.nrows();
    for a in 0..d {
        for b in (a + 1)..d {
            let v = 0.5 * (omega[(a, b)] + omega[(b, a)]);
            omega[(a, b)] = v;
            omega[(b, a)] = v;
        }
    }
    let psd = psd_verdict(&omega);
    SandwichEstimate { kind: meat.kind, omega, psd }
}

/// Convenience: meat + sandwich in one call.
pub fn estimate_variance(fit: &PartialledFit, kind: EstimatorKind) -> Result<SandwichEstimate> {
    let meat = compute_meat(fit, kind)?;
    Ok(sandwich(fit, &meat))
}
