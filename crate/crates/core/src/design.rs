//! Design handling: collinearity pruning, the residual-maker matrix, and
//! leverage diagnostics.
//!
//! The covariates that are *not* of interest (the nuisance block `W`) enter
//! the rest of the pipeline only through the annihilator `M = I − W(W′W)⁻¹W′`,
//! built here as `I − QQ′` from a pivoted orthonormal basis of `W`. `M` is
//! materialised densely because the bias-corrected variance estimator needs
//! every squared entry; a configurable cap guards the O(n²) allocation.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::linalg::{Cholesky, PivotedQr};
use crate::{Error, Result};

/// Largest sample size for which the dense n×n annihilator is built by
/// default (n = 20 000 ⇒ ~3.2 GB); raise per call if you mean it.
pub const DEFAULT_MAX_N: usize = 20_000;

/// Default relative pivot threshold for dropping collinear columns.
pub const DEFAULT_PIVOT_RTOL: f64 = 1e-10;

/// One regression problem: outcome `y`, regressors of interest `x` (n×d),
/// nuisance covariates `w` (n×K, possibly zero columns).
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub y: Array1<f64>,
    pub x: Array2<f64>,
    pub w: Array2<f64>,
}

impl RegressionData {
    /// Validates shapes and finiteness. `w` may have zero columns.
    pub fn new(y: Array1<f64>, x: Array2<f64>, w: Array2<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty sample".into()));
        }
        if x.nrows() != n || w.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "row mismatch: y has {n}, x has {}, w has {}",
                x.nrows(),
                w.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidInput("x needs at least one column".into()));
        }
        for (name, it) in [
            ("y", y.iter().any(|v| !v.is_finite())),
            ("x", x.iter().any(|v| !v.is_finite())),
            ("w", w.iter().any(|v| !v.is_finite())),
        ] {
            if it {
                return Err(Error::InvalidInput(format!("{name} contains NaN or infinity")));
            }
        }
        Ok(Self { y, x, w })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }
}

/// What pruning did: which original columns survived, which were dropped, and
/// the pivot ratio that decided each column's fate (indexed by original
/// column; ratio 1.0 is the first pivot).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneReport {
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    pub pivot_ratios: Vec<f64>,
    pub k_input: usize,
    pub k_effective: usize,
}

/// Drop numerically dependent columns of `w`, preserving the original order
/// of the survivors.
///
/// Greedy largest-residual pivoting: a column is kept while its pivot
/// magnitude exceeds `rel_tol` times the first pivot. Dropping every column
/// (e.g. an all-zero `w`) is a valid outcome, not an error.
pub fn prune_collinear(w: ArrayView2<f64>, rel_tol: f64) -> Result<(Array2<f64>, PruneReport)> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("w contains NaN or infinity".into()));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::Config(format!("pivot tolerance must be positive, got {rel_tol}")));
    }
    let (n, k) = w.dim();
    if k == 0 {
        return Ok((
            w.to_owned(),
            PruneReport { kept: vec![], dropped: vec![], pivot_ratios: vec![], k_input: 0, k_effective: 0 },
        ));
    }

    let qr = PivotedQr::new(&w.to_owned());
    let rank = qr.rank(rel_tol);
    let p0 = qr.pivots.first().copied().unwrap_or(0.0);

    let mut pivot_ratios = vec![0.0; k];
    for (t, &orig) in qr.perm.iter().enumerate() {
        let p = qr.pivots.get(t).copied().unwrap_or(0.0);
        pivot_ratios[orig] = if p0 > 0.0 { p / p0 } else { 0.0 };
    }

    let mut kept: Vec<usize> = qr.perm[..rank].to_vec();
    kept.sort_unstable();
    let mut dropped: Vec<usize> = qr.perm[rank..].to_vec();
    dropped.sort_unstable();

    let mut pruned = Array2::zeros((n, kept.len()));
    for (dst, &src) in kept.iter().enumerate() {
        pruned.column_mut(dst).assign(&w.column(src));
    }
    let report =
        PruneReport { kept, dropped, pivot_ratios, k_input: k, k_effective: pruned.ncols() };
    Ok((pruned, report))
}

/// The annihilator of a full-column-rank nuisance block, with everything the
/// variance estimators need: the dense matrix, its diagonal, and the
/// feasibility statistic 𝓜 = 1 − min_i M_ii (max leverage).
#[derive(Debug)]
pub struct AnnihilatorRep {
    m: Array2<f64>,
    m_diag: Array1<f64>,
    pub n: usize,
    pub k_effective: usize,
    /// 1 − min_i M_ii.
    pub mcal: f64,
    hadamard: OnceLock<std::result::Result<Cholesky, Error>>,
}

impl AnnihilatorRep {
    pub fn m(&self) -> &Array2<f64> {
        &self.m
    }

    pub fn m_diag(&self) -> &Array1<f64> {
        &self.m_diag
    }

    /// Whether the Hadamard system (M⊙M)ũ² = û² is guaranteed solvable:
    /// strict diagonal dominance holds iff max leverage < 1/2.
    pub fn hck_feasible(&self) -> bool {
        self.mcal < 0.5
    }

    /// Row-sum bound on ‖(M⊙M)⁻¹‖∞; +∞ when infeasible.
    pub fn varah_bound(&self) -> f64 {
        if self.hck_feasible() {
            1.0 / (0.5 - self.mcal)
        } else {
            f64::INFINITY
        }
    }

    /// Cholesky factor of M⊙M, computed once per design and shared across
    /// replications/threads (concurrent readers, single writer).
    pub fn hadamard_cholesky(&self) -> Result<&Cholesky> {
        let entry = self.hadamard.get_or_init(|| {
            let n = self.n;
            let mut s = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    let v = self.m[(i, j)];
                    s[(i, j)] = v * v;
                }
            }
            Cholesky::new(&s, "Hadamard-squared annihilator")
        });
        match entry {
            Ok(ch) => Ok(ch),
            Err(e) => Err(e.clone()),
        }
    }
}

/// Build the annihilator representation for a pruned (full-column-rank) `w`.
///
/// # Errors
/// - [`Error::DesignTooLarge`] when `n` exceeds `max_n` (the n×n allocation
///   is the cost being guarded);
/// - [`Error::InvalidInput`] when `w` is still rank deficient at working
///   precision — prune first.
pub fn annihilator(w: ArrayView2<f64>, max_n: usize) -> Result<AnnihilatorRep> {
    let (n, k) = w.dim();
    if n == 0 {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    if n > max_n {
        return Err(Error::DesignTooLarge { n, cap: max_n });
    }
    if k > n {
        return Err(Error::InvalidInput(format!(
            "w has more columns ({k}) than rows ({n}); prune first"
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("w contains NaN or infinity".into()));
    }

    let mut m = Array2::eye(n);
    if k > 0 {
        let qr = PivotedQr::new(&w.to_owned());
        if qr.rank(1e-12) < k {
            return Err(Error::InvalidInput(format!(
                "w is rank deficient ({} of {k} independent columns); prune first",
                qr.rank(1e-12)
            )));
        }
        let q = qr.q_thin(k);
        // M = I − QQ′
        ndarray::linalg::general_mat_mul(-1.0, &q, &q.t(), 1.0, &mut m);
        // enforce exact symmetry (gemm rounding is not symmetric)
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    }

    let m_diag = Array1::from_shape_fn(n, |i| m[(i, i)]);
    let min_diag = m_diag.iter().copied().fold(f64::INFINITY, f64::min);
    let mcal = 1.0 - min_diag;

    Ok(AnnihilatorRep { m, m_diag, n, k_effective: k, mcal, hadamard: OnceLock::new() })
}

/// Feasibility and leverage summary of a design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub n: usize,
    pub k_effective: usize,
    /// Max leverage 𝓜 = 1 − min_i M_ii.
    pub mcal: f64,
    pub min_leverage: f64,
    pub max_leverage: f64,
    /// 1/(1/2 − 𝓜) when feasible; +∞ otherwise (serialised as null).
    pub varah_bound: f64,
    pub hck_feasible: bool,
}

/// Summarise the leverage distribution of a design. Leverage of row i is
/// h_i = 1 − M_ii ∈ [0, 1].
pub fn leverage_diagnostics(rep: &AnnihilatorRep) -> DiagnosticsSummary {
    let mut min_h = f64::INFINITY;
    let mut max_h = f64::NEG_INFINITY;
    for &mii in rep.m_diag().iter() {
        let h = 1.0 - mii;
        min_h = min_h.min(h);
        max_h = max_h.max(h);
    }
    DiagnosticsSummary {
        n: rep.n,
        k_effective: rep.k_effective,
        mcal: rep.mcal,
        min_leverage: min_h,
        max_leverage: max_h,
        varah_bound: rep.varah_bound(),
        hck_feasible: rep.hck_feasible(),
    }
}

/// One-way grouped dummies (unit indicators), the canonical balanced design:
/// `units` blocks of `periods` consecutive rows.
pub fn unit_dummies(units: usize, periods: usize) -> Array2<f64> {
    let n = units * periods;
    let mut w = Array2::zeros((n, units));
    for u in 0..units {
        for t in 0..periods {
            w[(u * periods + t, u)] = 1.0;
        }
    }
    w
}
