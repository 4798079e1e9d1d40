//! Dense row-major `f64` matrices and vectors.
//!
//! The public operations (`matvec`, `add`, `outer`, `transpose_matvec`) check shapes and
//! allocate their result. The `*_into` / `*_assign` kernels are what the trainer uses in
//! its inner loops; they write into caller-owned buffers and only `debug_assert` shapes.

use std::ops::{Deref, DerefMut};

use crate::error::{PnnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector(data)
    }
}

impl From<&[f64]> for Vector {
    fn from(data: &[f64]) -> Self {
        Vector(data.to_vec())
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Row-major matrix; entry `(i, j)` lives at `data[i * cols + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(PnnError::InvalidArgument(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(PnnError::InvalidArgument(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(PnnError::InvalidArgument("ragged matrix rows".into()));
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    /// Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be at least 1x1");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
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

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `out[i] = Σ_j self[i,j] · x[j]`, summed in ascending `j` from `0.0`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            let mut sum = 0.0;
            for (w, v) in row.iter().zip(x) {
                sum += w * v;
            }
            *o = sum;
        }
    }

    /// `out[j] = Σ_i self[i,j] · v[i]`, summed in ascending `i` from `0.0`.
    ///
    /// The accumulation order matches `matvec` on the explicit transpose, so the two agree
    /// bit for bit.
    pub fn transpose_matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for (row, &vi) in self.data.chunks_exact(self.cols).zip(v) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * vi;
            }
        }
    }

    /// `self += a ⊗ b`.
    pub fn add_outer_assign(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (row, &ai) in self.data.chunks_exact_mut(self.cols).zip(a) {
            if ai == 0.0 {
                continue;
            }
            for (m, bj) in row.iter_mut().zip(b) {
                *m += ai * bj;
            }
        }
    }
}

pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vector> {
    if m.cols != v.len() {
        return Err(PnnError::DimensionMismatch {
            op: "matvec",
            left: m.shape(),
            right: (v.len(), 1),
        });
    }
    let mut out = Vector::zeros(m.rows);
    m.matvec_into(v, &mut out);
    Ok(out)
}

pub fn transpose_matvec(m: &Matrix, v: &[f64]) -> Result<Vector> {
    if m.rows != v.len() {
        return Err(PnnError::DimensionMismatch {
            op: "transpose_matvec",
            left: m.shape(),
            right: (v.len(), 1),
        });
    }
    let mut out = Vector::zeros(m.cols);
    m.transpose_matvec_into(v, &mut out);
    Ok(out)
}

pub fn add(a: &[f64], b: &[f64]) -> Result<Vector> {
    if a.len() != b.len() {
        return Err(PnnError::DimensionMismatch {
            op: "add",
            left: (a.len(), 1),
            right: (b.len(), 1),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>().into())
}

pub fn add_assign(acc: &mut [f64], x: &[f64]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

pub fn outer(a: &[f64], b: &[f64]) -> Result<Matrix> {
    if a.is_empty() || b.is_empty() {
        return Err(PnnError::InvalidArgument(
            "outer product of an empty vector".into(),
        ));
    }
    let mut m = Matrix::zeros(a.len(), b.len());
    m.add_outer_assign(a, b);
    Ok(m)
}
