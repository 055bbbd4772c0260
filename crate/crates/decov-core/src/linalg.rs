//! Minimal dense linear algebra on row-major `f64` matrices.
//!
//! The problem sizes in this crate are small (tens to a few hundred rows), so
//! a straightforward dense implementation with partial-pivot LU is both
//! adequate and easy to audit. Nothing here allocates beyond the matrices
//! themselves.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Dense row-major matrix of `f64`.
///
/// # Examples
///
/// ```
/// use decov_core::linalg::Mat;
/// let a = Mat::from_rows(2, 2, &[1.0, 2.0, 3.0, 4.0]);
/// let b = a.matmul(&Mat::eye(2));
/// assert_eq!(a, b);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Identity matrix of order `n`.
    pub fn eye(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from row-major data; `data.len()` must be `rows*cols`.
    pub fn from_rows(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "shape mismatch");
        Mat { rows, cols, data: data.to_vec() }
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major backing slice.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable row-major backing slice.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Element at (`r`, `c`).
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Sets element (`r`, `c`).
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Adds `v` to element (`r`, `c`).
    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    /// One row as a slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Transpose.
    pub fn t(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let mut acc = 0.0;
            for (a, b) in self.row(r).iter().zip(x.iter()) {
                acc += a * b;
            }
            out[r] = acc;
        }
        out
    }

    /// Elementwise sum.
    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    /// Elementwise difference `self - other`.
    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    /// Scalar multiple.
    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|a| a * s).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    /// Symmetric part `(M + Mᵀ)/2`; requires a square matrix.
    pub fn symmetrize(&self) -> Mat {
        assert_eq!(self.rows, self.cols, "symmetrize needs a square matrix");
        let mut out = self.clone();
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                let v = 0.5 * (self.get(r, c) + self.get(c, r));
                out.set(r, c, v);
                out.set(c, r, v);
            }
        }
        out
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| if v.abs() > m { v.abs() } else { m })
    }

    /// Squared Frobenius norm.
    pub fn fro_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Mean absolute entry (0 for an empty matrix).
    pub fn mean_abs(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v.abs()).sum::<f64>() / self.data.len() as f64
    }

    /// Submatrix with the given row and column index sets.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Mat {
        let mut out = Mat::zeros(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for (ci, &c) in cols.iter().enumerate() {
                out.set(ri, ci, self.get(r, c));
            }
        }
        out
    }

    /// LU factorization with partial pivoting. Returns `(lu, perm, sign)`
    /// where `lu` packs L (unit diagonal, below) and U (on and above the
    /// diagonal) and `perm` is the row permutation applied.
    fn lu(&self) -> Result<(Mat, Vec<usize>)> {
        if self.rows != self.cols {
            return Err(Error::InvalidParameter("lu: matrix must be square"));
        }
        let n = self.rows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // Pivot: largest |entry| in column k at or below the diagonal.
            let mut piv = k;
            let mut best = lu.get(k, k).abs();
            for r in (k + 1)..n {
                let v = lu.get(r, k).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-300 {
                return Err(Error::Singular("lu: zero pivot"));
            }
            if piv != k {
                for c in 0..n {
                    let a = lu.get(k, c);
                    let b = lu.get(piv, c);
                    lu.set(k, c, b);
                    lu.set(piv, c, a);
                }
                perm.swap(k, piv);
            }
            let d = lu.get(k, k);
            for r in (k + 1)..n {
                let f = lu.get(r, k) / d;
                lu.set(r, k, f);
                if f != 0.0 {
                    for c in (k + 1)..n {
                        let v = lu.get(r, c) - f * lu.get(k, c);
                        lu.set(r, c, v);
                    }
                }
            }
        }
        Ok((lu, perm))
    }

    /// Solves `self * x = b` for a single right-hand side.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let (lu, perm) = self.lu()?;
        Ok(lu_solve(&lu, &perm, b))
    }

    /// Solves `self * X = B` column by column.
    pub fn solve_mat(&self, b: &Mat) -> Result<Mat> {
        if self.rows != b.rows {
            return Err(Error::InvalidParameter("solve_mat: row mismatch"));
        }
        let (lu, perm) = self.lu()?;
        let n = self.rows;
        let mut out = Mat::zeros(n, b.cols);
        let mut col = vec![0.0; n];
        for c in 0..b.cols {
            for r in 0..n {
                col[r] = b.get(r, c);
            }
            let x = lu_solve(&lu, &perm, &col);
            for r in 0..n {
                out.set(r, c, x[r]);
            }
        }
        Ok(out)
    }

    /// Matrix inverse via LU.
    ///
    /// # Examples
    ///
    /// ```
    /// use decov_core::linalg::Mat;
    /// let a = Mat::from_rows(2, 2, &[4.0, 1.0, 1.0, 3.0]);
    /// let inv = a.inv().unwrap();
    /// let prod = a.matmul(&inv);
    /// assert!((prod.get(0, 0) - 1.0).abs() < 1e-12);
    /// assert!(prod.get(0, 1).abs() < 1e-12);
    /// ```
    pub fn inv(&self) -> Result<Mat> {
        self.solve_mat(&Mat::eye(self.rows))
    }

    /// Cholesky factor `L` (lower triangular, `L Lᵀ = self`) of a symmetric
    /// positive-definite matrix.
    ///
    /// Fails with a singularity error when a pivot is not strictly positive,
    /// which doubles as a positive-definiteness test.
    pub fn cholesky(&self) -> Result<Mat> {
        assert_eq!(self.rows, self.cols, "cholesky needs a square matrix");
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = self.get(i, j);
                for k in 0..j {
                    acc -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if acc <= 0.0 {
                        return Err(Error::Singular("matrix is not positive definite"));
                    }
                    l.set(i, j, libm::sqrt(acc));
                } else {
                    l.set(i, j, acc / l.get(j, j));
                }
            }
        }
        Ok(l)
    }
}

/// Forward/back substitution for a packed LU factorization.
fn lu_solve(lu: &Mat, perm: &[usize], b: &[f64]) -> Vec<f64> {
    let n = perm.len();
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    // L y = Pb (unit lower triangular).
    for r in 1..n {
        let mut acc = x[r];
        for c in 0..r {
            acc -= lu.get(r, c) * x[c];
        }
        x[r] = acc;
    }
    // U x = y.
    for r in (0..n).rev() {
        let mut acc = x[r];
        for c in (r + 1)..n {
            acc -= lu.get(r, c) * x[c];
        }
        x[r] = acc / lu.get(r, r);
    }
    x
}

/// Largest eigenvalue of the symmetric positive semidefinite matrix `m`,
/// estimated by power iteration.
///
/// `iters` fixed-point steps from a deterministic start vector; adequate for
/// the step-size bounds used by the recovery solver (which then pads the
/// estimate by a safety factor).
pub fn power_lambda_max(m: &Mat, iters: usize) -> f64 {
    assert_eq!(m.rows(), m.cols());
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic, generically non-orthogonal start.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 0.37).collect();
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    for x in v.iter_mut() {
        *x /= norm;
    }
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = m.matvec(&v);
        let norm = libm::sqrt(w.iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w;
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_recovers_known_solution() {
        let a = Mat::from_rows(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let x_true = [1.0, -2.0, 0.5];
        let b = a.matvec(&x_true);
        let x = a.solve(&b).unwrap();
        for (xi, ti) in x.iter().zip(x_true.iter()) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_detected() {
        let a = Mat::from_rows(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(a.solve(&[1.0, 1.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn inverse_roundtrip() {
        let a = Mat::from_rows(3, 3, &[4.0, 1.0, 0.2, 1.0, 3.0, 0.5, 0.2, 0.5, 2.0]);
        let inv = a.inv().unwrap();
        let prod = a.matmul(&inv).sub(&Mat::eye(3));
        assert!(prod.max_abs() < 1e-12);
    }

    #[test]
    fn power_iteration_finds_dominant_eigenvalue() {
        // Symmetric with spectrum {3, 1}.
        let a = Mat::from_rows(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let l = power_lambda_max(&a, 200);
        assert!((l - 3.0).abs() < 1e-9);
    }

    #[test]
    fn select_extracts_submatrix() {
        let a = Mat::from_rows(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let s = a.select(&[0, 2], &[1]);
        assert_eq!(s, Mat::from_rows(2, 1, &[2.0, 8.0]));
    }
}
