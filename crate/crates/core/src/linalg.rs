//! Dense row-major matrices plus the factorization kernels the fitting code
//! relies on: least squares via QR, thin QR orthonormalization, and the
//! Kronecker and Hadamard products.

use nalgebra::DMatrix;
use thiserror::Error;

/// Relative tolerance on the QR diagonal used to declare a matrix rank
/// deficient: a pivot below `RANK_REL_TOL * max_pivot` counts as zero.
pub const RANK_REL_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },
}

/// Dense matrix with row-major storage. Every entry is finite; constructors
/// that accept external data return an error on NaN or infinity, internal
/// constructors assert it.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, validating length and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: if cols == 0 { 0 } else { pos / cols },
                col: if cols == 0 { 0 } else { pos % cols },
                value: data[pos],
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from slices of rows, which must all have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(LinalgError::ShapeMismatch(format!(
                "ragged rows: expected {ncols} entries, got {}",
                bad.len()
            )));
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_vec(nrows, ncols, data)
    }

    /// Builds a matrix entry by entry. Panics on a non-finite value, since
    /// the generator is under the caller's control.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite entry {v} at ({i}, {j})");
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Single-column matrix holding `values`.
    pub fn column_vector(values: &[f64]) -> Result<Self, LinalgError> {
        Self::from_vec(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        assert!(value.is_finite(), "non-finite entry {value} at ({row}, {col})");
        self.data[row * self.cols + col] = value;
    }

    /// Row `i` as a slice of length `cols`.
    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.rows, "row index out of bounds");
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` copied into a fresh vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        assert!(j < self.cols, "column index out of bounds");
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Row-major view of the underlying storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Matrix product; panics if the inner dimensions differ.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out = &mut data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Matrix {
            rows: self.rows,
            cols: other.cols,
            data,
        }
    }

    /// Entrywise difference; panics if shapes differ.
    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub: shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Entrywise sum; panics if shapes differ.
    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add: shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| factor * self.get(i, j))
    }

    /// Largest absolute entry, or 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Column-stacked vectorization: entry `j * rows + i` is `self[(i, j)]`.
    pub fn vectorize(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        Matrix::from_fn(indices.len(), self.cols, |i, j| self.get(indices[i], j))
    }

    /// New matrix made of the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        assert!(k <= self.cols, "leading_columns: {k} > {}", self.cols);
        Matrix::from_fn(self.rows, k, |i, j| self.get(i, j))
    }
}

pub(crate) fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_iterator(m.rows, m.cols, m.data.iter().copied())
}

pub(crate) fn from_na(d: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)])
}

/// Checks the diagonal of an upper-triangular factor against `RANK_REL_TOL`.
fn check_full_rank(r: &DMatrix<f64>, what: &str) -> Result<(), LinalgError> {
    let k = r.nrows().min(r.ncols());
    let mut max_pivot: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;
    for i in 0..k {
        let p = r[(i, i)].abs();
        max_pivot = max_pivot.max(p);
        min_pivot = min_pivot.min(p);
    }
    if k == 0 || max_pivot == 0.0 || min_pivot <= RANK_REL_TOL * max_pivot {
        return Err(LinalgError::RankDeficient(format!(
            "{what}: pivot ratio {:.3e} at tolerance {RANK_REL_TOL:.0e}",
            if max_pivot == 0.0 { 0.0 } else { min_pivot / max_pivot }
        )));
    }
    Ok(())
}

/// Solves `min_C ||X C - Y||_F` for full-column-rank `X` (N x m) and `Y`
/// (N x q), returning the `m x q` coefficient matrix. Uses a QR
/// factorization of `X` followed by back substitution.
pub fn solve_least_squares(x: &Matrix, y: &Matrix) -> Result<Matrix, LinalgError> {
    if x.rows != y.rows {
        return Err(LinalgError::ShapeMismatch(format!(
            "X has {} rows but Y has {}",
            x.rows, y.rows
        )));
    }
    if x.rows < x.cols {
        return Err(LinalgError::RankDeficient(format!(
            "least squares needs at least {} rows, got {}",
            x.cols, x.rows
        )));
    }
    if x.cols == 0 {
        return Err(LinalgError::RankDeficient("design has no columns".into()));
    }
    let qr = to_na(x).qr();
    let r = qr.r();
    check_full_rank(&r, "least-squares design")?;
    let qty = qr.q().transpose() * to_na(y);
    let m = x.cols;
    let q = y.cols;
    let mut data = vec![0.0; m * q];
    for col in 0..q {
        for i in (0..m).rev() {
            let mut s = qty[(i, col)];
            for j in i + 1..m {
                s -= r[(i, j)] * data[j * q + col];
            }
            data[i * q + col] = s / r[(i, i)];
        }
    }
    Matrix::from_vec(m, q, data)
}

/// Thin QR factorization of a full-column-rank `q x d` matrix with `d <= q`.
/// Returns `(Q, R)` where `Q` is `q x d` with orthonormal columns, `R` is
/// `d x d` upper triangular with a positive diagonal, and `Q R` reproduces
/// the input.
pub fn qr_orthonormalize(h: &Matrix) -> Result<(Matrix, Matrix), LinalgError> {
    if h.cols > h.rows {
        return Err(LinalgError::RankDeficient(format!(
            "cannot orthonormalize {} columns over {} rows",
            h.cols, h.rows
        )));
    }
    if h.cols == 0 {
        return Err(LinalgError::RankDeficient("no columns to orthonormalize".into()));
    }
    let qr = to_na(h).qr();
    let mut q = qr.q();
    let mut r = qr.r();
    check_full_rank(&r, "orthonormalization input")?;
    // Fix signs so the R diagonal is positive, making the factorization
    // unique for a full-rank input.
    for j in 0..h.cols {
        if r[(j, j)] < 0.0 {
            for i in 0..h.rows {
                q[(i, j)] = -q[(i, j)];
            }
            for k in j..h.cols {
                r[(j, k)] = -r[(j, k)];
            }
        }
    }
    Ok((from_na(&q), from_na(&r)))
}

/// Kronecker product: for `a` (p x q) and `b` (m x n), the result is
/// `pm x qn` with block `(i, j)` equal to `a[(i, j)] * b`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows * b.rows, a.cols * b.cols, |i, j| {
        a.get(i / b.rows, j / b.cols) * b.get(i % b.rows, j % b.cols)
    })
}

/// Entrywise (Hadamard) product of two equally shaped matrices.
pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(LinalgError::ShapeMismatch(format!(
            "hadamard: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(Matrix::from_fn(a.rows, a.cols, |i, j| a.get(i, j) * b.get(i, j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn from_vec_rejects_non_finite() {
        let err = Matrix::from_vec(2, 2, vec![1.0, 2.0, f64::NAN, 4.0]).unwrap_err();
        match err {
            LinalgError::NonFinite { row, col, .. } => assert_eq!((row, col), (1, 0)),
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(matches!(
            Matrix::from_vec(2, 2, vec![1.0; 3]),
            Err(LinalgError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn matmul_small() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b);
        // [1 2 3; 4 5 6] * [7 8; 9 10; 11 12] = [58 64; 139 154]
        assert_eq!(c.as_slice(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn vectorize_is_column_stacked() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.vectorize(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn least_squares_line_fit() {
        // X = [1 0; 1 1; 1 2], y = (1, 2, 4): intercept 5/6, slope 3/2.
        let x = Matrix::from_vec(3, 2, vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
        let y = Matrix::column_vector(&[1.0, 2.0, 4.0]).unwrap();
        let c = solve_least_squares(&x, &y).unwrap();
        assert_abs_diff_eq!(c.get(0, 0), 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.get(1, 0), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_detects_rank_deficiency() {
        let x = Matrix::from_vec(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        let y = Matrix::column_vector(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            solve_least_squares(&x, &y),
            Err(LinalgError::RankDeficient(_))
        ));
    }

    #[test]
    fn least_squares_shape_mismatch() {
        let x = Matrix::zeros(3, 2);
        let y = Matrix::zeros(4, 1);
        assert!(matches!(
            solve_least_squares(&x, &y),
            Err(LinalgError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn qr_known_factors() {
        // H = [1 1; 1 2; 1 3]: Q = [1/s3 -1/s2; 1/s3 0; 1/s3 1/s2],
        // R = [s3 2*s3; 0 s2] with s3 = sqrt(3), s2 = sqrt(2).
        let h = Matrix::from_vec(3, 2, vec![1.0, 1.0, 1.0, 2.0, 1.0, 3.0]).unwrap();
        let (q, r) = qr_orthonormalize(&h).unwrap();
        let s3 = 3.0_f64.sqrt();
        let s2 = 2.0_f64.sqrt();
        assert_abs_diff_eq!(q.get(0, 0), 1.0 / s3, epsilon = 1e-12);
        assert_abs_diff_eq!(q.get(0, 1), -1.0 / s2, epsilon = 1e-12);
        assert_abs_diff_eq!(q.get(1, 1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.get(2, 1), 1.0 / s2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.get(0, 0), s3, epsilon = 1e-12);
        assert_abs_diff_eq!(r.get(0, 1), 2.0 * s3, epsilon = 1e-12);
        assert_abs_diff_eq!(r.get(1, 1), s2, epsilon = 1e-12);
        assert_abs_diff_eq!(r.get(1, 0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kronecker_two_by_two() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let k = kronecker(&a, &b);
        let expected = [
            0.0, 1.0, 0.0, 2.0, //
            1.0, 0.0, 2.0, 0.0, //
            0.0, 3.0, 0.0, 4.0, //
            3.0, 0.0, 4.0, 0.0,
        ];
        assert_eq!(k.as_slice(), &expected);
    }

    #[test]
    fn hadamard_rejects_shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(3, 2);
        assert!(matches!(hadamard(&a, &b), Err(LinalgError::ShapeMismatch(_))));
    }

    #[test]
    fn hadamard_entrywise() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let h = hadamard(&a, &b).unwrap();
        assert_eq!(h.as_slice(), &[5.0, 12.0, 21.0, 32.0]);
    }
}
