//! `L(C) = -(1/2m) Tr(Cᵀ B C) + (√k / n) ‖Σᵢ Cᵢ‖ - 1`
//!
//! The first term is the negative relaxed modularity, the second penalizes
//! assignments that put every node in the same cluster. Both functions take a
//! plain matrix so they can be probed away from the simplex (finite
//! differences); training passes [`SoftAssignment`](crate::SoftAssignment)
//! matrices.

use crate::graph::{modularity_quadratic, PatchGraph};
use crate::nn::DenseMatrix;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    /// `(1/2m) Tr(Cᵀ B C)`
    pub modularity: f64,
    /// `(√k / n) ‖colsums‖ - 1`
    pub regularizer: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        -self.modularity + self.regularizer
    }
}

pub fn loss_terms(g: &PatchGraph, c: &DenseMatrix) -> LossTerms {
    LossTerms {
        modularity: modularity_quadratic(g, c),
        regularizer: collapse_regularizer(c),
    }
}

pub fn loss_value(g: &PatchGraph, c: &DenseMatrix) -> f64 {
    loss_terms(g, c).total()
}

pub fn collapse_regularizer(c: &DenseMatrix) -> f64 {
    let (n, k) = c.shape();
    let norm = c.col_sums().iter().map(|s| s * s).sum::<f64>().sqrt();
    (k as f64).sqrt() / n as f64 * norm - 1.0
}

/// `dL/dC = -(1/m) (A C - d (dᵀC) / 2m) + (√k / n) 1 sᵀ / ‖s‖` with `s` the
/// column sums. The regularizer part is taken as zero when `s = 0`.
pub fn loss_grad(g: &PatchGraph, c: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, k) = c.shape();
    let m = g.edge_count();
    let two_m = 2.0 * m;
    let mut grad = g.adjacency_times(c)?;
    let dc = g.degree_weighted_col_sums(c);
    for (i, &d) in g.degrees().iter().enumerate() {
        let d = d as f64;
        for (v, dcj) in grad.row_mut(i).iter_mut().zip(&dc) {
            *v = -(*v - d * dcj / two_m) / m;
        }
    }

    let sums = c.col_sums();
    let norm = sums.iter().map(|s| s * s).sum::<f64>().sqrt();
    if norm > 0.0 {
        let coef = (k as f64).sqrt() / n as f64 / norm;
        for r in 0..n {
            for (v, s) in grad.row_mut(r).iter_mut().zip(&sums) {
                *v += coef * s;
            }
        }
    }
    Ok(grad)
}
