use crate::error::{Error, Result};

use super::DenseMatrix;

/// Compressed sparse row matrix, used for adjacency-by-dense products.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Columns within a row must be
    /// strictly increasing.
    pub fn from_row_entries(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (r, entries) in rows.iter().enumerate() {
            let mut prev = None;
            for &(c, v) in entries {
                if c >= cols || prev.is_some_and(|p| c <= p) {
                    return Err(Error::ShapeMismatch(format!(
                        "row {r}: column {c} out of order or out of range"
                    )));
                }
                prev = Some(c);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let rows = (0..m.rows())
            .map(|r| {
                m.row(r)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self::from_row_entries(m.cols(), rows).expect("dense rows are ordered")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `self * rhs`.
    pub fn mul_dense(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if rhs.rows() != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "sparse {}x{} times dense {:?}",
                self.rows,
                self.cols,
                rhs.shape()
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols());
        for r in 0..self.rows {
            let out_row = out.row_mut(r);
            for (c, v) in self.row_entries(r) {
                for (o, x) in out_row.iter_mut().zip(rhs.row(c)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * rhs`, without materializing the transpose.
    pub fn t_mul_dense(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if rhs.rows() != self.rows {
            return Err(Error::ShapeMismatch(format!(
                "sparse transpose {}x{} times dense {:?}",
                self.cols,
                self.rows,
                rhs.shape()
            )));
        }
        let mut out = DenseMatrix::zeros(self.cols, rhs.cols());
        for r in 0..self.rows {
            let src = rhs.row(r);
            for (c, v) in self.row_entries(r) {
                for (o, x) in out.row_mut(c).iter_mut().zip(src) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }
}
