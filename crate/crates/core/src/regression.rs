//! Partialled-out least squares: project the nuisance block away once, then
//! regress residualised `y` on residualised `x`.
//!
//! Identical to the long regression's coefficient on `x` (Frisch–Waugh), but
//! the partialled form exposes exactly the pieces the variance estimators
//! consume: v̂ = Mx, û = M(y − Xβ̂), Γ̂ = v̂′v̂/n.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::design::{annihilator, prune_collinear, AnnihilatorRep, PruneReport, RegressionData};
use crate::linalg::{sym_eigenvalues, Cholesky};
use crate::{Error, Result};

/// A fitted partialled regression, carrying the residualised design for
/// downstream variance estimation. The annihilator is shared, not copied.
#[derive(Debug, Clone)]
pub struct PartialledFit {
    pub beta_hat: Array1<f64>,
    /// Partialled regressors Mx, n×d.
    pub vhat: Array2<f64>,
    /// Residuals of the full regression, M(y − Xβ̂).
    pub uhat: Array1<f64>,
    /// Γ̂ = v̂′v̂/n.
    pub gamma: Array2<f64>,
    pub n: usize,
    pub d: usize,
    pub annihilator: Arc<AnnihilatorRep>,
    gamma_chol: Cholesky,
}

impl PartialledFit {
    /// Γ̂⁻¹, solved from the cached factor.
    pub fn gamma_inv(&self) -> Array2<f64> {
        self.gamma_chol.solve_mat(&Array2::eye(self.d))
    }

    /// Solve Γ̂ B = rhs for B.
    pub fn gamma_solve_mat(&self, rhs: &Array2<f64>) -> Array2<f64> {
        self.gamma_chol.solve_mat(rhs)
    }

    /// Assemble a fit from hand-picked pieces, recomputing only Γ̂. No
    /// orthogonality checks — for exercising downstream algebra on worked
    /// examples.
    #[cfg(test)]
    pub(crate) fn from_parts_unchecked(
        beta_hat: Array1<f64>,
        vhat: Array2<f64>,
        uhat: Array1<f64>,
        annihilator: Arc<AnnihilatorRep>,
    ) -> Self {
        let n = uhat.len();
        let d = vhat.ncols();
        let gamma = vhat.t().dot(&vhat).mapv(|v| v / n as f64);
        let gamma_chol =
            Cholesky::new(&gamma, "partialled Gram matrix").expect("worked example Gram is SPD");
        Self { beta_hat, vhat, uhat, gamma, n, d, annihilator, gamma_chol }
    }
}

/// Fit y on x after projecting out the (already pruned) nuisance block
/// represented by `rep`.
///
/// # Errors
/// - [`Error::InvalidInput`] on shape mismatch or when n ≤ d + K leaves no
///   residual degrees of freedom;
/// - [`Error::CollinearRegressors`] when the partialled regressors are
///   numerically dependent (e.g. a column of x lies in the span of w).
pub fn fit_partialled(
    data: &RegressionData,
    rep: &Arc<AnnihilatorRep>,
) -> Result<PartialledFit> {
    let n = data.n();
    let d = data.d();
    if rep.n != n {
        return Err(Error::InvalidInput(format!(
            "annihilator built for n = {}, data has n = {n}",
            rep.n
        )));
    }
    let k = rep.k_effective;
    if n <= d + k {
        return Err(Error::InvalidInput(format!(
            "no residual degrees of freedom: n = {n} ≤ d + K = {}",
            d + k
        )));
    }

    let m = rep.m();
    let vhat = m.dot(&data.x);
    let nf = n as f64;
    let gamma = vhat.t().dot(&vhat).mapv(|v| v / nf);

    let eigs = sym_eigenvalues(&gamma);
    let (min_eig, max_eig) = (eigs[0], eigs[d - 1]);
    // Two ways to lose identification: regressors collinear among themselves
    // after partialling (relative gate), or a regressor absorbed entirely by
    // the nuisance columns, which leaves Γ̂ tiny against the scale of X
    // (absolute gate — the relative one is vacuous at d = 1).
    let x_scale = (0..d)
        .map(|j| {
            let c = data.x.column(j);
            c.dot(&c) / nf
        })
        .fold(f64::MIN_POSITIVE, f64::max);
    if !(min_eig > 1e-12 * max_eig.max(f64::MIN_POSITIVE)) || !(min_eig > 1e-24 * x_scale) {
        return Err(Error::CollinearRegressors { min_eig });
    }
    let gamma_chol = Cholesky::new(&gamma, "partialled Gram matrix")?;

    let my = m.dot(&data.y);
    let rhs = vhat.t().dot(&my).mapv(|v| v / nf);
    let beta_hat = gamma_chol.solve(&rhs);

    // û = M(y − Xβ̂) = My − v̂β̂ (idempotence)
    let uhat = &my - &vhat.dot(&beta_hat);

    Ok(PartialledFit { beta_hat, vhat, uhat, gamma, n, d, annihilator: Arc::clone(rep), gamma_chol })
}

/// Prune → annihilate → fit in one call, for fresh data with no shared
/// design. Paths that reuse a design across replications should build the
/// [`AnnihilatorRep`] once and call [`fit_partialled`] instead.
pub fn fit_pipeline(
    data: &RegressionData,
    max_n: usize,
    pivot_rtol: f64,
) -> Result<(PartialledFit, PruneReport)> {
    let (w_pruned, prune) = prune_collinear(data.w.view(), pivot_rtol)?;
    let rep = Arc::new(annihilator(w_pruned.view(), max_n)?);
    let fit = fit_partialled(data, &rep)?;
    Ok((fit, prune))
}
