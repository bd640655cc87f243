//! Row-major dense matrices and the affine kernels every layer is built on.
//!
//! A batch of vectors is a matrix with one row per sample. Every kernel
//! computes each output row from that row's inputs alone, with a fixed
//! summation order, so a row's result does not depend on which other rows
//! share the batch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Stacks equal-length rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row_vector(v: &[f64]) -> Self {
        Matrix {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
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

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn gather(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (dst, &src) in idx.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    /// Writes the rows of `src` back to positions `idx`.
    pub fn scatter(&mut self, idx: &[usize], src: &Matrix) {
        debug_assert_eq!(idx.len(), src.rows);
        for (i, &dst) in idx.iter().enumerate() {
            self.row_mut(dst).copy_from_slice(src.row(i));
        }
    }

    /// Adds the rows of `src` into positions `idx`.
    pub fn scatter_add(&mut self, idx: &[usize], src: &Matrix) {
        for (i, &dst) in idx.iter().enumerate() {
            axpy(1.0, src.row(i), self.row_mut(dst));
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Dot product with four interleaved accumulators combined in a fixed order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let split = n - n % 4;
    let mut acc = [0.0f64; 4];
    for (ca, cb) in a[..split].chunks_exact(4).zip(b[..split].chunks_exact(4)) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in split..n {
        s += a[i] * b[i];
    }
    s
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Borrowed view of a weight matrix stored as a flat row-major slice.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl<'a> MatRef<'a> {
    pub fn new(rows: usize, cols: usize, data: &'a [f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} values cannot view as {rows}x{cols}",
                data.len()
            )));
        }
        Ok(MatRef { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

impl<'a> From<&'a Matrix> for MatRef<'a> {
    fn from(m: &'a Matrix) -> Self {
        MatRef {
            rows: m.rows,
            cols: m.cols,
            data: &m.data,
        }
    }
}

/// Batched affine map: row `b` of the output is `W·x_b + bias`.
pub fn affine(x: &Matrix, w: MatRef<'_>, bias: Option<&[f64]>) -> Result<Matrix> {
    if x.cols != w.cols {
        return Err(Error::dim(format!(
            "input width {} does not match weight columns {}",
            x.cols, w.cols
        )));
    }
    if let Some(b) = bias {
        if b.len() != w.rows {
            return Err(Error::dim(format!(
                "bias length {} does not match weight rows {}",
                b.len(),
                w.rows
            )));
        }
    }
    let mut y = Matrix::zeros(x.rows, w.rows);
    for r in 0..x.rows {
        let xr = x.row(r);
        let yr = y.row_mut(r);
        for (i, yi) in yr.iter_mut().enumerate() {
            *yi = dot(w.row(i), xr);
        }
        if let Some(b) = bias {
            for (yi, bi) in yr.iter_mut().zip(b) {
                *yi += bi;
            }
        }
    }
    Ok(y)
}

/// Backward pass of [`affine`]. Accumulates `dW += dYᵀX` and `db += Σ dY`
/// (rows summed in order) and returns `dX = dY·W`.
pub fn affine_backward(
    x: &Matrix,
    w: MatRef<'_>,
    dy: &Matrix,
    dw: &mut [f64],
    db: Option<&mut [f64]>,
) -> Matrix {
    debug_assert_eq!(dy.rows, x.rows);
    debug_assert_eq!(dy.cols, w.rows);
    debug_assert_eq!(dw.len(), w.rows * w.cols);
    let mut dx = Matrix::zeros(x.rows, w.cols);
    for r in 0..x.rows {
        let xr = x.row(r);
        let dyr = dy.row(r);
        let dxr = dx.row_mut(r);
        for (i, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            axpy(g, w.row(i), dxr);
            axpy(g, xr, &mut dw[i * w.cols..(i + 1) * w.cols]);
        }
    }
    if let Some(db) = db {
        for r in 0..dy.rows {
            for (bi, g) in db.iter_mut().zip(dy.row(r)) {
                *bi += g;
            }
        }
    }
    dx
}
