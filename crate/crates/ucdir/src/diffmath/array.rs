//! Dense row-major `f64` storage shared by the tape and the numeric code.

use std::fmt;

/// Shape of a [`DenseArray`]. Scalars are vectors of length 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Vector(n) => n,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_scalar(&self) -> bool {
        matches!(*self, Shape::Vector(1))
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Vector(n) => write!(f, "({n},)"),
            Shape::Matrix(r, c) => write!(f, "({r}, {c})"),
        }
    }
}

/// A dense array of `f64` values with either vector or row-major matrix shape.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseArray {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseArray {
    pub fn vector(data: Vec<f64>) -> Self {
        let shape = Shape::Vector(data.len());
        DenseArray { shape, data }
    }

    /// Builds a matrix from row-major data. Panics if the length disagrees,
    /// which is a programming error rather than a runtime condition.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match {rows}x{cols}",
            data.len()
        );
        DenseArray {
            shape: Shape::Matrix(rows, cols),
            data,
        }
    }

    pub fn scalar(v: f64) -> Self {
        DenseArray::vector(vec![v])
    }

    pub fn zeros(shape: Shape) -> Self {
        DenseArray {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    /// Stacks equal-length rows into a matrix. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows in from_rows");
            data.extend_from_slice(row);
        }
        DenseArray::matrix(rows.len(), cols, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn as_scalar(&self) -> Option<f64> {
        if self.shape.is_scalar() {
            Some(self.data[0])
        } else {
            None
        }
    }

    /// Rows of the array: a vector counts as a single row.
    pub fn rows(&self) -> usize {
        match self.shape {
            Shape::Vector(_) => 1,
            Shape::Matrix(r, _) => r,
        }
    }

    /// Entries per row.
    pub fn cols(&self) -> usize {
        match self.shape {
            Shape::Vector(n) => n,
            Shape::Matrix(_, c) => c,
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        DenseArray {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &DenseArray, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        DenseArray {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += alpha * other`, elementwise.
    pub fn add_scaled(&mut self, other: &DenseArray, alpha: f64) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add_assign(&mut self, other: &DenseArray) {
        self.add_scaled(other, 1.0);
    }

    pub fn dot(&self, other: &DenseArray) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// `(m x k) . (k x n)` with a fixed i-l-j loop order for determinism.
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for l in 0..k {
            let av = a[i * k + l];
            let brow = &b[l * n..(l + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `(m x n) . (k x n)^T`, i.e. pairwise row dot products; result is `m x k`.
pub(crate) fn matmul_abt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &b[j * n..(j + 1) * n];
            let mut acc = 0.0;
            for (av, bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            out[i * k + j] = acc;
        }
    }
    out
}

/// `(m x k)^T . (m x n)`; result is `k x n`.
pub(crate) fn matmul_atb(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    let mut out = vec![0.0; k * n];
    for l in 0..m {
        let arow = &a[l * k..(l + 1) * k];
        let brow = &b[l * n..(l + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}
