//! Exact small dense matrix algebra.
//!
//! Every generating-function expression in this crate is a product, sum or
//! inverse of square matrices whose dimension is the number of composite
//! channel states: 1 for a memoryless channel, 2 for a single Gilbert-Elliott
//! link and 4 for the forward × reverse composite. Storage is therefore a
//! fixed inline array and every operation is a plain value computation.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 4;

/// Pivot magnitude below which a matrix is declared singular.
pub const PIVOT_THRESHOLD: f64 = 1e-13;

/// Errors reported by matrix operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    /// The matrix is not invertible at working precision.
    #[error("matrix is singular (pivot magnitude {pivot:.3e} below threshold)")]
    Singular { pivot: f64 },
    /// A constructor received an entry list of the wrong length or dimension.
    #[error("invalid matrix shape: {0}")]
    Shape(String),
    /// A constructor received a NaN or infinite entry.
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
}

/// Square real matrix of dimension 1 to [`MAX_DIM`], stored row-major.
#[derive(Clone, Copy, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: [f64; MAX_DIM * MAX_DIM],
}

impl Matrix {
    /// All-zero matrix.
    ///
    /// # Panics
    /// If `dim` is zero or exceeds [`MAX_DIM`].
    pub fn zeros(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "matrix dimension {dim} outside 1..={MAX_DIM}"
        );
        Matrix {
            dim,
            data: [0.0; MAX_DIM * MAX_DIM],
        }
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// 1×1 matrix holding `x`.
    pub fn scalar(x: f64) -> Self {
        let mut m = Self::zeros(1);
        m.set(0, 0, x);
        m
    }

    /// Diagonal matrix with the given diagonal.
    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Build from row slices; every row must have as many entries as there are rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, MatrixError> {
        let dim = rows.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(MatrixError::Shape(format!(
                "{dim} rows, expected 1..={MAX_DIM}"
            )));
        }
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(MatrixError::Shape(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(MatrixError::NonFinite { row: i, col: j });
                }
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    /// Dimension (number of rows = number of columns).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry at row `i`, column `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i * self.dim + j]
    }

    /// Overwrite entry at row `i`, column `j`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i * self.dim + j] = v;
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.data[..self.dim * self.dim]
    }

    /// Multiply every entry by `s`.
    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        for v in &mut m.data[..self.dim * self.dim] {
            *v *= s;
        }
        m
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Largest absolute entry of `self − other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        (*self - *other).max_abs()
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.is_finite())
    }

    /// Row sums (`self · 1`).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).sum())
            .collect()
    }

    /// Row vector times matrix (`v · self`).
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "vector length must match dimension");
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| v[i] * self.get(i, j)).sum())
            .collect()
    }

    /// The scalar `v · self · 1`.
    pub fn sandwich(&self, v: &[f64]) -> f64 {
        self.left_mul(v).iter().sum()
    }

    /// Transpose.
    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.set(j, i, self.get(i, j));
            }
        }
        m
    }

    fn check_dims(&self, other: &Matrix) {
        assert_eq!(
            self.dim, other.dim,
            "matrix dimension mismatch: {} vs {}",
            self.dim, other.dim
        );
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect();
        write!(f, "Matrix{rows:?}")
    }
}

impl Add for Matrix {
    type Output = Matrix;
    fn add(self, rhs: Matrix) -> Matrix {
        self.check_dims(&rhs);
        let mut m = self;
        for (a, b) in m.data.iter_mut().zip(rhs.data.iter()) {
            *a += b;
        }
        m
    }
}

impl AddAssign for Matrix {
    fn add_assign(&mut self, rhs: Matrix) {
        *self = *self + rhs;
    }
}

impl Sub for Matrix {
    type Output = Matrix;
    fn sub(self, rhs: Matrix) -> Matrix {
        self.check_dims(&rhs);
        let mut m = self;
        for (a, b) in m.data.iter_mut().zip(rhs.data.iter()) {
            *a -= b;
        }
        m
    }
}

impl Neg for Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl Mul for Matrix {
    type Output = Matrix;
    fn mul(self, rhs: Matrix) -> Matrix {
        self.check_dims(&rhs);
        let n = self.dim;
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] += a * rhs.get(k, j);
                }
            }
        }
        m
    }
}

impl Mul<f64> for Matrix {
    type Output = Matrix;
    fn mul(self, rhs: f64) -> Matrix {
        self.scale(rhs)
    }
}

impl Mul<Matrix> for f64 {
    type Output = Matrix;
    fn mul(self, rhs: Matrix) -> Matrix {
        rhs.scale(self)
    }
}

/// Kronecker product: entry `(i·b.dim + k, j·b.dim + l)` equals `a[i,j]·b[k,l]`.
///
/// # Panics
/// If the product dimension exceeds [`MAX_DIM`].
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.dim * b.dim;
    let mut m = Matrix::zeros(n);
    for i in 0..a.dim {
        for j in 0..a.dim {
            let aij = a.get(i, j);
            for k in 0..b.dim {
                for l in 0..b.dim {
                    m.set(i * b.dim + k, j * b.dim + l, aij * b.get(k, l));
                }
            }
        }
    }
    m
}

/// Kronecker product of two row vectors.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn inverse(a: &Matrix) -> Result<Matrix, MatrixError> {
    let n = a.dim;
    let mut work = *a;
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| work.get(x, col).abs().total_cmp(&work.get(y, col).abs()))
            .unwrap_or(col);
        let pivot = work.get(pivot_row, col);
        if !(pivot.abs() >= PIVOT_THRESHOLD) {
            return Err(MatrixError::Singular { pivot: pivot.abs() });
        }
        if pivot_row != col {
            for j in 0..n {
                let (w1, w2) = (work.get(col, j), work.get(pivot_row, j));
                work.set(col, j, w2);
                work.set(pivot_row, j, w1);
                let (v1, v2) = (inv.get(col, j), inv.get(pivot_row, j));
                inv.set(col, j, v2);
                inv.set(pivot_row, j, v1);
            }
        }
        let scale = 1.0 / pivot;
        for j in 0..n {
            work.set(col, j, work.get(col, j) * scale);
            inv.set(col, j, inv.get(col, j) * scale);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = work.get(row, col);
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                work.set(row, j, work.get(row, j) - factor * work.get(col, j));
                inv.set(row, j, inv.get(row, j) - factor * inv.get(col, j));
            }
        }
    }
    Ok(inv)
}

/// `(I − a)⁻¹`, the gain of a self-loop with branch gain `a`.
pub fn loop_gain(a: &Matrix) -> Result<Matrix, MatrixError> {
    inverse(&(Matrix::identity(a.dim) - *a))
}

/// `aⁿ` by repeated squaring; `a⁰ = I`.
pub fn matpow(a: &Matrix, n: u32) -> Matrix {
    let mut result = Matrix::identity(a.dim);
    let mut base = *a;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base;
        }
        e >>= 1;
        if e > 0 {
            base = base * base;
        }
    }
    result
}

/// Finite geometric sum `Σ_{j=0}^{n−1} aʲ`; the zero matrix when `n = 0`.
pub fn geom_sum(a: &Matrix, n: u32) -> Matrix {
    let mut sum = Matrix::zeros(a.dim);
    let mut term = Matrix::identity(a.dim);
    for _ in 0..n {
        sum += term;
        term = term * *a;
    }
    sum
}
