//! Dense row-major matrices with 32-bit storage and 64-bit accumulation.
//!
//! Everything downstream (weights, activations, scores) is carried by the two
//! types in this module. Values are immutable once built: reshaping helpers
//! such as [`DenseMatrix::delete_row`] return new values.

use std::ops::{Deref, Index};

use crate::error::{Error, Result};

/// Row-major 2-D array of `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

/// 1-D vector of `f64` values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::new",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix::new"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for
    /// literals in tests and examples.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), cols, data).expect("finite literal")
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f32) {
        self.data[i * self.cols + j] = v;
    }

    /// `out[i] = sum_j m[i,j] * v[j]`, accumulated in 64-bit.
    pub fn matvec(&self, v: &[f64]) -> Result<DenseVector> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec",
                expected: self.cols,
                got: v.len(),
            });
        }
        let out = (0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect::<Vec<_>>();
        DenseVector::new(out)
    }

    /// Column-wise sums of absolute values (out-strength of each input node).
    pub fn col_abs_sums(&self) -> DenseVector {
        let mut out = vec![0.0f64; self.cols];
        for i in 0..self.rows {
            for (acc, &w) in out.iter_mut().zip(self.row(i)) {
                *acc += (w as f64).abs();
            }
        }
        DenseVector(out)
    }

    /// Row-wise sums of absolute values.
    pub fn row_abs_sums(&self) -> DenseVector {
        DenseVector(
            (0..self.rows)
                .map(|i| self.row(i).iter().map(|&w| (w as f64).abs()).sum())
                .collect(),
        )
    }

    pub fn delete_row(&self, i: usize) -> Result<Self> {
        if i >= self.rows {
            return Err(Error::IndexOutOfRange {
                what: "matrix rows",
                index: i,
                len: self.rows,
            });
        }
        let mut data = Vec::with_capacity((self.rows - 1) * self.cols);
        data.extend_from_slice(&self.data[..i * self.cols]);
        data.extend_from_slice(&self.data[(i + 1) * self.cols..]);
        Ok(Self {
            rows: self.rows - 1,
            cols: self.cols,
            data,
        })
    }

    pub fn delete_col(&self, j: usize) -> Result<Self> {
        if j >= self.cols {
            return Err(Error::IndexOutOfRange {
                what: "matrix columns",
                index: j,
                len: self.cols,
            });
        }
        let data = (0..self.rows)
            .flat_map(|i| {
                let row = self.row(i);
                row[..j].iter().chain(&row[j + 1..]).copied()
            })
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols - 1,
            data,
        })
    }

    /// Keeps only the listed rows (in the given order).
    pub fn select_rows(&self, keep: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(keep.len() * self.cols);
        for &i in keep {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange {
                    what: "matrix rows",
                    index: i,
                    len: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            rows: keep.len(),
            cols: self.cols,
            data,
        })
    }

    /// Keeps only the listed columns (in the given order).
    pub fn select_cols(&self, keep: &[usize]) -> Result<Self> {
        if let Some(&j) = keep.iter().find(|&&j| j >= self.cols) {
            return Err(Error::IndexOutOfRange {
                what: "matrix columns",
                index: j,
                len: self.cols,
            });
        }
        let data = (0..self.rows)
            .flat_map(|i| {
                let row = self.row(i);
                keep.iter().map(move |&j| row[j])
            })
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: keep.len(),
            data,
        })
    }

    /// Returns a copy scaled by `c`.
    pub fn scaled(&self, c: f32) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }
}

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseVector::new"));
        }
        Ok(Self(data))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn delete(&self, i: usize) -> Result<Self> {
        if i >= self.0.len() {
            return Err(Error::IndexOutOfRange {
                what: "vector",
                index: i,
                len: self.0.len(),
            });
        }
        let mut v = self.0.clone();
        v.remove(i);
        Ok(Self(v))
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for DenseMatrix {
    type Output = [f32];

    fn index(&self, i: usize) -> &[f32] {
        self.row(i)
    }
}

impl From<Vec<f64>> for DenseVector {
    /// Unchecked conversion for values produced by finite arithmetic.
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub(crate) fn dot(row: &[f32], v: &[f64]) -> f64 {
    row.iter().zip(v).map(|(&a, &b)| a as f64 * b).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sum of absolute differences; the convergence metric of the power iterations.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
