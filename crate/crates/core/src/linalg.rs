//! Dense kernels: column-pivoted Householder QR, Cholesky, and a Jacobi
//! eigenvalue sweep for small symmetric matrices.
//!
//! Pure Rust on purpose — no BLAS/LAPACK link, so numeric results cannot
//! depend on runtime thread counts or vendor kernels. Sizes here are modest
//! (pruning panels n×K, Hadamard systems up to the design cap), and every
//! kernel is oracle-tested.

use crate::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, s};

#[inline]
fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b)
}

/// Column-pivoted Householder QR of an n×k matrix.
///
/// Pivots greedily on the largest remaining residual column norm, which is
/// what makes the factor usable for rank decisions: `pivots[t]` is |r_tt| in
/// pivot order and is non-increasing.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Packed factors: R in the upper triangle, Householder vectors below.
    factors: Array2<f64>,
    /// Householder scalars.
    betas: Vec<f64>,
    /// `perm[t]` = original column index processed at pivot step t.
    pub perm: Vec<usize>,
    /// |r_tt| per pivot step (length min(n,k)).
    pub pivots: Vec<f64>,
    n: usize,
    k: usize,
}

impl PivotedQr {
    pub fn new(a: &Array2<f64>) -> Self {
        let (n, k) = a.dim();
        let steps = n.min(k);
        let mut f = a.clone();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut betas = vec![0.0; steps];
        let mut pivots = vec![0.0; steps];

        for t in 0..steps {
            // fresh residual norms (recomputing beats downdating for accuracy)
            let mut best = t;
            let mut best_norm = -1.0;
            for j in t..k {
                let nrm = dot(f.slice(s![t.., j]), f.slice(s![t.., j]));
                if nrm > best_norm {
                    best_norm = nrm;
                    best = j;
                }
            }
            if best != t {
                perm.swap(t, best);
                for i in 0..n {
                    f.swap((i, t), (i, best));
                }
            }

            // Householder reflector for column t, rows t..
            let alpha = best_norm.sqrt();
            pivots[t] = alpha;
            if alpha == 0.0 {
                betas[t] = 0.0;
                continue; // residual block is exactly zero; remaining pivots are 0
            }
            let x0 = f[(t, t)];
            let sign = if x0 >= 0.0 { 1.0 } else { -1.0 };
            let v0 = x0 + sign * alpha;
            // v = (v0, x_{t+1..n}); H = I - beta v v^T with beta = 2/(v'v)
            let vtv = v0 * v0 + dot(f.slice(s![t + 1.., t]), f.slice(s![t + 1.., t]));
            let beta = 2.0 / vtv;
            betas[t] = beta;

            // apply H to trailing columns (v stored implicitly: v0 plus f[t+1.., t])
            for j in (t + 1)..k {
                let mut w = v0 * f[(t, j)];
                w += dot(f.slice(s![t + 1.., t]), f.slice(s![t + 1.., j]));
                w *= beta;
                f[(t, j)] -= w * v0;
                let (col_t, mut col_j) = f.multi_slice_mut((s![t + 1.., t], s![t + 1.., j]));
                col_j.zip_mut_with(&col_t, |cj, &ct| *cj -= w * ct);
            }
            f[(t, t)] = -sign * alpha; // r_tt with the stable sign convention
            // rows below the diagonal keep v (normalized by v0 at use sites)
            let mut col = f.slice_mut(s![t + 1.., t]);
            col.mapv_inplace(|x| x / v0);
            betas[t] = beta * v0 * v0; // fold v0 into beta so stored v has v0 = 1
        }

        Self { factors: f, betas, perm, pivots, n, k }
    }

    /// Number of leading pivot steps with |r_tt| > rel_tol · |r_00|.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let p0 = self.pivots.first().copied().unwrap_or(0.0);
        if p0 == 0.0 {
            return 0;
        }
        self.pivots.iter().take_while(|&&p| p > rel_tol * p0).count()
    }

    /// Thin orthonormal basis for the span of the first `rank` pivot columns
    /// (n×rank, orthonormal columns).
    pub fn q_thin(&self, rank: usize) -> Array2<f64> {
        let n = self.n;
        let steps = self.n.min(self.k).min(rank);
        let mut q = Array2::zeros((n, rank));
        for j in 0..rank.min(n) {
            q[(j, j)] = 1.0;
        }
        // accumulate Q = H_0 · … · H_{steps-1} · E backwards
        for t in (0..steps).rev() {
            let beta = self.betas[t];
            if beta == 0.0 {
                continue;
            }
            for j in 0..rank {
                // w = beta * v' q_j over rows t.. ; v = (1, factors[t+1.., t])
                let mut w = q[(t, j)];
                w += dot(self.factors.slice(s![t + 1.., t]), q.slice(s![t + 1.., j]));
                w *= beta;
                q[(t, j)] -= w;
                let v = self.factors.slice(s![t + 1.., t]);
                let mut qa = q.slice_mut(s![t + 1.., j]);
                qa.zip_mut_with(&v, |qe, &ve| *qe -= w * ve);
            }
        }
        q
    }

    /// Upper-triangular R (steps×k, pivot-column order).
    pub fn r(&self) -> Array2<f64> {
        let steps = self.n.min(self.k);
        let mut r = Array2::zeros((steps, self.k));
        for i in 0..steps {
            for j in i..self.k {
                r[(i, j)] = self.factors[(i, j)];
            }
        }
        r
    }
}

/// Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    /// Factor `a = L·Lᵀ`. `what` names the matrix in the error on breakdown.
    pub fn new(a: &Array2<f64>, what: &'static str) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "Cholesky needs a square matrix");
        let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max);
        let breakdown = (n as f64) * f64::EPSILON * max_diag;

        let mut l = a.clone();
        for j in 0..n {
            let (head, mut tail) = l.view_mut().split_at(ndarray::Axis(0), j + 1);
            let row_j = head.row(j);
            let pivot = row_j[j] - dot(row_j.slice(s![..j]), row_j.slice(s![..j]));
            if !(pivot > breakdown) {
                return Err(Error::SingularFactor { what, pivot });
            }
            let ljj = pivot.sqrt();
            for mut row_i in tail.rows_mut() {
                let v = (row_i[j] - dot(row_i.slice(s![..j]), row_j.slice(s![..j]))) / ljj;
                row_i[j] = v;
            }
            // write the diagonal after the column update that read the old value
            let mut head = head;
            head[(j, j)] = ljj;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                l[(i, j)] = 0.0;
            }
        }
        Ok(Self { l })
    }

    /// Solve a·x = b.
    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        assert_eq!(b.len(), n);
        let mut x = b.clone();
        // forward: L y = b
        for i in 0..n {
            let acc = dot(self.l.slice(s![i, ..i]), x.slice(s![..i]));
            x[i] = (x[i] - acc) / self.l[(i, i)];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut acc = 0.0;
            for k in (i + 1)..n {
                acc += self.l[(k, i)] * x[k];
            }
            x[i] = (x[i] - acc) / self.l[(i, i)];
        }
        x
    }

    /// Solve against several right-hand sides (columns of b).
    pub fn solve_mat(&self, b: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(b.dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            let x = self.solve(&col.to_owned());
            out.column_mut(j).assign(&x);
        }
        out
    }

    pub fn lower(&self) -> &Array2<f64> {
        &self.l
    }
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi sweeps,
/// ascending. Intended for Gram/sandwich matrices (d ≤ ~20).
pub fn sym_eigenvalues(a: &Array2<f64>) -> Array1<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return Array1::zeros(0);
    }
    let mut m = a.clone();
    // enforce symmetry of the working copy (callers hold symmetric matrices
    // up to rounding)
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s_ = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s_ * mkq;
                    m[(k, q)] = s_ * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s_ * mqk;
                    m[(q, k)] = s_ * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    Array1::from(ev)
}
