use crate::error::Result;

use super::{CsrMatrix, DenseMatrix};

/// A square `n x n` operator applied to node-feature matrices.
pub trait Propagate {
    fn nodes(&self) -> usize;

    /// `self * x`
    fn propagate(&self, x: &DenseMatrix) -> Result<DenseMatrix>;

    /// `selfᵀ * x`
    fn propagate_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix>;
}

impl Propagate for CsrMatrix {
    fn nodes(&self) -> usize {
        self.rows()
    }

    fn propagate(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.mul_dense(x)
    }

    fn propagate_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.t_mul_dense(x)
    }
}

impl Propagate for DenseMatrix {
    fn nodes(&self) -> usize {
        self.rows()
    }

    fn propagate(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.matmul(x)
    }

    fn propagate_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.t_matmul(x)
    }
}

/// Propagation matrix stored sparse or dense depending on its fill.
#[derive(Debug, Clone, PartialEq)]
pub enum Propagation {
    Sparse(CsrMatrix),
    Dense(DenseMatrix),
}

impl Propagation {
    /// Graphs with more than this fraction of nonzeros use dense GEMM.
    pub const DENSE_FILL: f64 = 0.15;

    pub fn from_csr(m: CsrMatrix) -> Self {
        let cells = (m.rows() * m.cols()).max(1) as f64;
        if m.nnz() as f64 / cells > Self::DENSE_FILL {
            Propagation::Dense(m.to_dense())
        } else {
            Propagation::Sparse(m)
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Propagation::Sparse(m) => m.to_dense(),
            Propagation::Dense(m) => m.clone(),
        }
    }
}

impl Propagate for Propagation {
    fn nodes(&self) -> usize {
        match self {
            Propagation::Sparse(m) => m.nodes(),
            Propagation::Dense(m) => m.nodes(),
        }
    }

    fn propagate(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Propagation::Sparse(m) => m.propagate(x),
            Propagation::Dense(m) => m.propagate(x),
        }
    }

    fn propagate_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Propagation::Sparse(m) => m.propagate_transpose(x),
            Propagation::Dense(m) => m.propagate_transpose(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_sparse_agree() {
        let dense = DenseMatrix::from_fn(6, 6, |i, j| if (i * 5 + j) % 4 == 0 { 0.25 + i as f64 } else { 0.0 });
        let x = DenseMatrix::from_fn(6, 3, |i, j| i as f64 - j as f64 * 0.7);
        let sparse = Propagation::Sparse(CsrMatrix::from_dense(&dense));
        let full = Propagation::Dense(dense.clone());
        assert!(sparse.propagate(&x).unwrap().max_abs_diff(&full.propagate(&x).unwrap()) < 1e-12);
        assert!(
            sparse.propagate_transpose(&x).unwrap().max_abs_diff(&full.propagate_transpose(&x).unwrap())
                < 1e-12
        );
        assert!(matches!(Propagation::from_csr(CsrMatrix::from_dense(&dense)), Propagation::Dense(_)));
        let eye = CsrMatrix::from_dense(&DenseMatrix::identity(20));
        assert!(matches!(Propagation::from_csr(eye), Propagation::Sparse(_)));
    }
}
