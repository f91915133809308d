//! Small dense matrices and the symmetric eigensolver behind per-slice PCA.
//!
//! Matrices here are tiny (J is the number of sensor channels, typically
//! under 32) but there is one per second of the day, so the code favours a
//! flat row-major buffer and allocation-free inner loops over generality.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Maximum number of cyclic Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 100;

/// Convergence threshold on the off-diagonal Frobenius norm, relative to ‖S‖_F.
pub const JACOBI_TOL: f64 = 1e-12;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
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

    /// Builds a matrix from a row-major buffer.
    ///
    /// # Panics
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from equally sized rows.
    ///
    /// # Panics
    ///
    /// Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
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

    /// # Panics
    ///
    /// Panics if the inner dimensions disagree.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions disagree");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                let src = rhs.row(l);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Largest absolute elementwise difference; `INFINITY` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix.
///
/// Invariants:
/// - `eigenvalues` sorted descending,
/// - columns of `vectors` orthonormal and aligned with `eigenvalues`,
/// - the largest-magnitude entry of each column is non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenResult {
    /// Replaces negative eigenvalues with zero. Meant for PSD inputs
    /// (correlation matrices) where negatives are pure roundoff.
    pub fn clamp_nonnegative(&mut self) {
        for l in &mut self.eigenvalues {
            if *l < 0.0 {
                *l = 0.0;
            }
        }
    }

    /// `max |VᵀV - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let vtv = self.vectors.transpose().matmul(&self.vectors);
        vtv.max_abs_diff(&Matrix::identity(vtv.rows()))
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.vectors.rows();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            for (c, l) in self.eigenvalues.iter().enumerate() {
                scaled[(i, c)] *= l;
            }
        }
        scaled.matmul(&self.vectors.transpose())
    }
}

/// Sample correlation matrix `XᵀX / (I-1)` of an already standardized matrix.
///
/// Columns belonging to inactive variables are all zero after
/// standardization, so their rows and columns (diagonal included) come out
/// zero as well.
///
/// # Panics
///
/// Panics if `xhat` has fewer than two rows.
pub fn correlation_matrix(xhat: &Matrix) -> Matrix {
    let n = xhat.rows();
    assert!(n >= 2, "need at least two rows");
    let j = xhat.cols();
    let mut s = Matrix::zeros(j, j);
    for i in 0..n {
        let row = xhat.row(i);
        for a in 0..j {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            for b in a..j {
                s[(a, b)] += ra * row[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..j {
        for b in a..j {
            let v = s[(a, b)] / denom;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    s
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Converges when the off-diagonal Frobenius norm falls below
/// `JACOBI_TOL * ‖S‖_F`; fails with [`Error::EigenNotConverged`] after
/// [`MAX_SWEEPS`] sweeps. Eigenvalues are returned as computed (no clamping),
/// so indefinite inputs are handled too.
pub fn symmetric_eigen(s: &Matrix) -> Result<EigenResult> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch {
            what: "symmetric_eigen (square input)",
            expected: s.rows(),
            found: s.cols(),
        });
    }
    let n = s.rows();
    let mut a = s.clone();
    let mut v = Matrix::identity(n);
    let tol = JACOBI_TOL * s.frobenius_norm();

    let mut converged = false;
    let mut off = off_diagonal_norm(&a);
    for _ in 0..MAX_SWEEPS {
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        off = off_diagonal_norm(&a);
    }
    if !converged && off > tol {
        return Err(Error::EigenNotConverged {
            sweeps: MAX_SWEEPS,
            off_norm: off,
        });
    }

    // Descending by value; equal values keep their diagonal order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]).then(x.cmp(&y)));

    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (c, &src) in order.iter().enumerate() {
        let sign = sign_of_dominant(&v, src);
        for r in 0..n {
            vectors[(r, c)] = sign * v[(r, src)];
        }
    }
    Ok(EigenResult {
        eigenvalues,
        vectors,
    })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Applies the rotation that annihilates `a[p][q]`, accumulating it into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = a.rows();
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// +1 or -1 such that the largest-magnitude entry of column `col` becomes
/// non-negative. Near-ties (within 1e-9 relative) resolve to the lowest row.
fn sign_of_dominant(v: &Matrix, col: usize) -> f64 {
    let max = (0..v.rows()).map(|r| v[(r, col)].abs()).fold(0.0, f64::max);
    let cutoff = max * (1.0 - 1e-9);
    let lead = (0..v.rows())
        .map(|r| v[(r, col)])
        .find(|x| x.abs() >= cutoff)
        .unwrap_or(0.0);
    if lead < 0.0 {
        -1.0
    } else {
        1.0
    }
}
