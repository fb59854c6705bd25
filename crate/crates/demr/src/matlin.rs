//! Dense real-matrix kernels: SVD, symmetric eigendecomposition and
//! Gram-Schmidt orthonormalization.
//!
//! Everything is `f64`, row-major, and deliberately small-scale: the
//! factorizations use Jacobi iterations with fixed sweep order and a fixed
//! sign convention, so repeated calls on bit-identical inputs return
//! bit-identical factors. That determinism is what the rest of the crate
//! (and its reproducibility tests) is built on.

use thiserror::Error;

/// Sweep cap for the Jacobi iterations; convergence is quadratic, so runs
/// that need anything close to this are numerically broken inputs.
const MAX_SWEEPS: usize = 100;

/// Relative off-diagonal tolerance for the Jacobi iterations, scaled by the
/// squared Frobenius norm of the input.
const JACOBI_TOL: f64 = 1e-14;

/// Residual threshold under which a deflated Gram-Schmidt column counts as
/// linearly dependent.
const GS_DEGENERATE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MatError {
    #[error("jacobi iteration failed to converge within {MAX_SWEEPS} sweeps (residual {residual:.3e})")]
    NonConvergence { residual: f64 },
    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("degenerate input: column {column} has deflated norm {norm:.3e} < {GS_DEGENERATE:.0e}")]
    DegenerateInput { column: usize, norm: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("matrix entries must be finite")]
    NotFinite,
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    /// Build from a row-major buffer; length must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length mismatch");
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be >= 1");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix::from_vec(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`; both operands are traversed row-contiguously.
    pub fn matmul_transpose(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_transpose dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            for j in 0..other.rows {
                let brow = other.row(j);
                let mut acc = 0.0;
                for (&a, &b) in arow.iter().zip(brow.iter()) {
                    acc += a * b;
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        let data = self.data.iter().map(|a| a * factor).collect();
        Matrix::from_vec(self.rows, self.cols, data)
    }

    pub fn trace(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "trace of a non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `(M + M^T) / 2` for a square matrix.
    pub fn symmetrized(&self) -> Matrix {
        assert_eq!(self.rows, self.cols, "symmetrized needs a square matrix");
        let mut s = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                s[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    /// Deviation from orthonormal columns, `max |Q^T Q - I|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let gram = self.transpose().matmul(self);
        gram.max_abs_diff(&Matrix::identity(self.cols))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Thin SVD `A = U diag(s) V^T` with `k = min(rows, cols)` columns.
///
/// Singular values are non-increasing; the first nonzero entry of each
/// column of `U` is non-negative and `V` follows `U`'s sign choice.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    /// Reconstruction `U diag(s) V^T`.
    pub fn reconstruct(&self) -> Matrix {
        let k = self.s.len();
        let mut scaled = self.u.clone();
        for j in 0..k {
            for i in 0..scaled.rows() {
                scaled[(i, j)] *= self.s[j];
            }
        }
        scaled.matmul_transpose(&self.v)
    }
}

/// Symmetric eigendecomposition `S = Q diag(lambda) Q^T`, eigenvalues
/// non-increasing, same column sign convention as [`SvdResult`].
#[derive(Debug, Clone)]
pub struct SymEigResult {
    pub q: Matrix,
    pub lambda: Vec<f64>,
}

/// One-sided Jacobi SVD.
///
/// Columns of a working copy are rotated pairwise (fixed cyclic order)
/// until all pairs are orthogonal relative to the input's Frobenius norm.
/// Zero singular values get their `U` columns completed deterministically
/// from the standard basis so `U` is always orthonormal.
pub fn svd(a: &Matrix) -> Result<SvdResult, MatError> {
    if !a.is_finite() {
        return Err(MatError::NotFinite);
    }
    if a.rows() >= a.cols() {
        svd_tall(a)
    } else {
        // Work on the transpose and swap the factors back.
        let r = svd_tall(&a.transpose())?;
        Ok(SvdResult {
            u: r.v,
            s: r.s,
            v: r.u,
        })
    }
}

fn svd_tall(a: &Matrix) -> Result<SvdResult, MatError> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut v = Matrix::identity(cols);
    let fro = a.frobenius_norm();
    // Pair (i, j) counts as converged when |w_i . w_j| <= tol; the dot
    // product scales like ||A||^2, hence the squared norm here.
    let tol = JACOBI_TOL * fro * fro;

    let mut max_offdiag = 0.0_f64;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        max_offdiag = 0.0;
        let mut rotated = false;
        for i in 0..cols.saturating_sub(1) {
            for j in (i + 1)..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for r in 0..rows {
                    let wi = w[(r, i)];
                    let wj = w[(r, j)];
                    alpha += wi * wi;
                    beta += wj * wj;
                    gamma += wi * wj;
                }
                max_offdiag = max_offdiag.max(gamma.abs());
                if gamma.abs() <= tol || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let wi = w[(r, i)];
                    let wj = w[(r, j)];
                    w[(r, i)] = c * wi - s * wj;
                    w[(r, j)] = s * wi + c * wj;
                }
                for r in 0..cols {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)];
                    v[(r, i)] = c * vi - s * vj;
                    v[(r, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged && max_offdiag > tol {
        return Err(MatError::NonConvergence {
            residual: max_offdiag,
        });
    }

    // Column norms are the singular values; sort descending (stable).
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|r| w[(r, j)] * w[(r, j)]).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap().then(x.cmp(&y)));

    let mut u = Matrix::zeros(rows, cols);
    let mut s = vec![0.0; cols];
    let mut v_sorted = Matrix::zeros(cols, cols);
    // Columns with singular value at or below this fraction of the largest
    // are treated as numerically zero and rebuilt from the standard basis.
    let zero_tol = norms[order[0]] * 1e-13;
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = norms[src];
        for r in 0..cols {
            v_sorted[(r, dst)] = v[(r, src)];
        }
        if norms[src] > zero_tol && norms[src] > 0.0 {
            for r in 0..rows {
                u[(r, dst)] = w[(r, src)] / norms[src];
            }
        }
    }
    complete_zero_columns(&mut u, &s, zero_tol);
    fix_column_signs(&mut u, Some(&mut v_sorted));
    Ok(SvdResult { u, s, v: v_sorted })
}

/// Replace numerically-zero columns of `u` with standard-basis vectors
/// orthogonalized against the established columns. Deterministic: basis
/// candidates are tried in index order.
fn complete_zero_columns(u: &mut Matrix, s: &[f64], zero_tol: f64) {
    let (rows, cols) = (u.rows(), u.cols());
    for j in 0..cols {
        if s[j] > zero_tol && s[j] > 0.0 {
            continue;
        }
        let mut chosen: Option<Vec<f64>> = None;
        for cand in 0..rows {
            let mut v: Vec<f64> = (0..rows).map(|r| if r == cand { 1.0 } else { 0.0 }).collect();
            // Two deflation passes keep orthogonality near machine precision.
            for _ in 0..2 {
                for k in 0..cols {
                    if k == j {
                        continue;
                    }
                    let col_norm: f64 = (0..rows).map(|r| u[(r, k)] * u[(r, k)]).sum();
                    if col_norm < 0.5 {
                        continue; // not yet established
                    }
                    let dot: f64 = (0..rows).map(|r| u[(r, k)] * v[r]).sum();
                    for r in 0..rows {
                        v[r] -= dot * u[(r, k)];
                    }
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for x in &mut v {
                    *x /= norm;
                }
                chosen = Some(v);
                break;
            }
        }
        let v = chosen.expect("standard basis always completes an orthonormal set");
        for r in 0..rows {
            u[(r, j)] = v[r];
        }
    }
}

/// Sign convention: the first entry of each column of `u` with magnitude
/// above 1e-12 is made non-negative; `v`, when present, flips with `u`.
fn fix_column_signs(u: &mut Matrix, mut v: Option<&mut Matrix>) {
    for j in 0..u.cols() {
        let mut sign = 1.0;
        for i in 0..u.rows() {
            let x = u[(i, j)];
            if x.abs() > 1e-12 {
                if x < 0.0 {
                    sign = -1.0;
                }
                break;
            }
        }
        if sign < 0.0 {
            for i in 0..u.rows() {
                u[(i, j)] = -u[(i, j)];
            }
            if let Some(vm) = v.as_deref_mut() {
                for i in 0..vm.rows() {
                    vm[(i, j)] = -vm[(i, j)];
                }
            }
        }
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// The caller symmetrizes first; asymmetry beyond `1e-9 * max|S|` is
/// rejected. Eigenvalues come back in descending order.
pub fn sym_eig(s: &Matrix) -> Result<SymEigResult, MatError> {
    if !s.is_finite() {
        return Err(MatError::NotFinite);
    }
    if s.rows() != s.cols() {
        return Err(MatError::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", s.rows(), s.cols()),
        });
    }
    let n = s.rows();
    let scale = s.max_abs();
    let asymmetry = s.max_abs_diff(&s.transpose());
    if asymmetry > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(MatError::NotSymmetric { asymmetry });
    }

    let mut b = s.symmetrized();
    let mut q = Matrix::identity(n);
    let fro = b.frobenius_norm();
    let tol = JACOBI_TOL * fro;

    let mut max_offdiag = 0.0_f64;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        max_offdiag = 0.0;
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for r in (p + 1)..n {
                let bpr = b[(p, r)];
                max_offdiag = max_offdiag.max(bpr.abs());
                if bpr.abs() <= tol {
                    continue;
                }
                rotated = true;
                let theta = (b[(r, r)] - b[(p, p)]) / (2.0 * bpr);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for k in 0..n {
                    let bkp = b[(k, p)];
                    let bkr = b[(k, r)];
                    b[(k, p)] = c * bkp - sn * bkr;
                    b[(k, r)] = sn * bkp + c * bkr;
                }
                for k in 0..n {
                    let bpk = b[(p, k)];
                    let brk = b[(r, k)];
                    b[(p, k)] = c * bpk - sn * brk;
                    b[(r, k)] = sn * bpk + c * brk;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - sn * qkr;
                    q[(k, r)] = sn * qkp + c * qkr;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged && max_offdiag > tol {
        return Err(MatError::NonConvergence {
            residual: max_offdiag,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| b[(i, i)]).collect();
    order.sort_by(|&x, &y| diag[y].partial_cmp(&diag[x]).unwrap().then(x.cmp(&y)));

    let mut q_sorted = Matrix::zeros(n, n);
    let mut lambda = vec![0.0; n];
    for (dst, &src) in order.iter().enumerate() {
        lambda[dst] = diag[src];
        for r in 0..n {
            q_sorted[(r, dst)] = q[(r, src)];
        }
    }
    fix_column_signs(&mut q_sorted, None);
    Ok(SymEigResult {
        q: q_sorted,
        lambda,
    })
}

/// Modified Gram-Schmidt with a re-orthogonalization pass.
///
/// Columns must be linearly independent: a deflated column with norm below
/// 1e-12 is a [`MatError::DegenerateInput`]. The first output column is the
/// normalized first input column.
pub fn gram_schmidt(cols: &Matrix) -> Result<Matrix, MatError> {
    if !cols.is_finite() {
        return Err(MatError::NotFinite);
    }
    let (n, k) = (cols.rows(), cols.cols());
    let mut q = Matrix::zeros(n, k);
    for j in 0..k {
        let mut v = cols.col(j);
        for _ in 0..2 {
            for i in 0..j {
                let dot: f64 = (0..n).map(|r| q[(r, i)] * v[r]).sum();
                for r in 0..n {
                    v[r] -= dot * q[(r, i)];
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < GS_DEGENERATE {
            return Err(MatError::DegenerateInput { column: j, norm });
        }
        for r in 0..n {
            q[(r, j)] = v[r] / norm;
        }
    }
    Ok(q)
}
