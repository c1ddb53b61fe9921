//! Patch features, the thresholded-similarity patch graph, its normalized
//! adjacency and modularity.
//!
//! The modularity matrix `B = A - d dᵀ / 2m` is never formed densely: every
//! quantity that needs it is computed as a sparse product with `A` plus a
//! rank-one correction through the degree vector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{CsrMatrix, DenseMatrix};

/// Rows with a norm below this are rejected by [`normalize_features`].
pub const MIN_ROW_NORM: f64 = 1e-12;

/// Per-patch feature vectors on a `grid_h x grid_w` patch lattice, stored in
/// raster order (left to right, top to bottom).
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatureGrid {
    grid_h: usize,
    grid_w: usize,
    data: DenseMatrix,
    pub source_image_w: u32,
    pub source_image_h: u32,
    pub patch_size: u32,
}

impl PatchFeatureGrid {
    pub fn new(
        grid_h: usize,
        grid_w: usize,
        data: DenseMatrix,
        source_image_w: u32,
        source_image_h: u32,
        patch_size: u32,
    ) -> Result<Self> {
        if grid_h == 0 || grid_w == 0 || data.cols() == 0 {
            return Err(Error::InvalidFeatures(format!(
                "grid {grid_h}x{grid_w} with dimension {} is empty",
                data.cols()
            )));
        }
        if data.rows() != grid_h * grid_w {
            return Err(Error::InvalidFeatures(format!(
                "{} feature rows for a {grid_h}x{grid_w} grid",
                data.rows()
            )));
        }
        if let Some(pos) = data.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidFeatures(format!(
                "non-finite value at row {}, column {}",
                pos / data.cols(),
                pos % data.cols()
            )));
        }
        Ok(Self {
            grid_h,
            grid_w,
            data,
            source_image_w,
            source_image_h,
            patch_size,
        })
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn num_patches(&self) -> usize {
        self.data.rows()
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.data
    }
}

/// Scales every feature row to unit Euclidean norm.
pub fn normalize_features(f: &PatchFeatureGrid) -> Result<PatchFeatureGrid> {
    let mut data = f.data.clone();
    for r in 0..data.rows() {
        let row = data.row_mut(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < MIN_ROW_NORM {
            return Err(Error::ZeroFeatureRow(r));
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(PatchFeatureGrid { data, ..f.clone() })
}

/// Whether the diagonal of the thresholded similarity matrix is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelfLoops {
    /// Simple graph for modularity; the GCN re-adds the identity in
    /// [`normalized_adjacency`].
    #[default]
    Strip,
    /// Keep `A_ii = 1` everywhere (degrees, edge count and GCN propagation).
    Keep,
}

impl fmt::Display for SelfLoops {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelfLoops::Strip => "strip",
            SelfLoops::Keep => "keep",
        })
    }
}

impl FromStr for SelfLoops {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "strip" => Ok(SelfLoops::Strip),
            "keep" => Ok(SelfLoops::Keep),
            other => Err(format!("unknown self-loop mode {other:?} (expected strip or keep)")),
        }
    }
}

/// Undirected 0/1 patch graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGraph {
    neighbors: Vec<Vec<usize>>,
    degrees: Vec<usize>,
    edge_count: f64,
    self_loops: SelfLoops,
}

impl PatchGraph {
    /// Builds a graph from undirected edges. Duplicate edges are merged;
    /// `(i, i)` pairs are only accepted with [`SelfLoops::Keep`].
    pub fn from_edges(n: usize, edges: &[(usize, usize)], self_loops: SelfLoops) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::ShapeMismatch(format!("edge ({i}, {j}) with {n} nodes")));
            }
            if i == j {
                if self_loops == SelfLoops::Strip {
                    return Err(Error::ShapeMismatch(format!("self loop at node {i}")));
                }
                neighbors[i].push(i);
            } else {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self::from_neighbors(neighbors, self_loops))
    }

    fn from_neighbors(neighbors: Vec<Vec<usize>>, self_loops: SelfLoops) -> Self {
        let degrees: Vec<usize> = neighbors.iter().map(Vec::len).collect();
        let edge_count = degrees.iter().sum::<usize>() as f64 / 2.0;
        Self {
            neighbors,
            degrees,
            edge_count,
            self_loops,
        }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    /// Row sums of the adjacency matrix.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// `m = ½ Σᵢⱼ Aᵢⱼ`. Only non-integral when self loops are kept.
    pub fn edge_count(&self) -> f64 {
        self.edge_count
    }

    pub fn self_loops(&self) -> SelfLoops {
        self.self_loops
    }

    /// Sorted neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn adjacency_dense(&self) -> DenseMatrix {
        let n = self.n();
        let mut a = DenseMatrix::zeros(n, n);
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                a[(i, j)] = 1.0;
            }
        }
        a
    }

    /// `A * x` using the neighbor lists.
    pub fn adjacency_times(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.n() {
            return Err(Error::ShapeMismatch(format!(
                "adjacency of {} nodes times {:?}",
                self.n(),
                x.shape()
            )));
        }
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        for (i, list) in self.neighbors.iter().enumerate() {
            let row = out.row_mut(i);
            for &j in list {
                for (o, v) in row.iter_mut().zip(x.row(j)) {
                    *o += v;
                }
            }
        }
        Ok(out)
    }

    /// `dᵀ x` as a row of length `x.cols()`.
    pub fn degree_weighted_col_sums(&self, x: &DenseMatrix) -> Vec<f64> {
        let mut out = vec![0.0; x.cols()];
        for (i, &d) in self.degrees.iter().enumerate() {
            let d = d as f64;
            for (o, v) in out.iter_mut().zip(x.row(i)) {
                *o += d * v;
            }
        }
        out
    }
}

/// Thresholds cosine similarity: `A_ij = 1` iff `f_i · f_j > tau` (strict), with
/// the diagonal removed.
pub fn build_adjacency(f: &PatchFeatureGrid, tau: f64) -> Result<PatchGraph> {
    build_adjacency_with(f, tau, SelfLoops::Strip)
}

/// [`build_adjacency`] with explicit control over the diagonal. Rows of `f`
/// are expected to be unit length already.
pub fn build_adjacency_with(f: &PatchFeatureGrid, tau: f64, self_loops: SelfLoops) -> Result<PatchGraph> {
    if !(tau > -1.0 && tau < 1.0) {
        return Err(Error::InvalidConfig(format!("tau {tau} outside (-1, 1)")));
    }
    let gram = f.data.matmul_t(&f.data)?;
    let n = f.num_patches();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            gram.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &s)| s > tau && (i != j || self_loops == SelfLoops::Keep))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let graph = PatchGraph::from_neighbors(neighbors, self_loops);
    let off_diagonal = graph
        .neighbors
        .iter()
        .enumerate()
        .any(|(i, list)| list.iter().any(|&j| j != i));
    if !off_diagonal {
        return Err(Error::EmptyGraph { tau });
    }
    Ok(graph)
}

/// Symmetric degree normalization used for GCN propagation.
///
/// With [`SelfLoops::Strip`] this is `D̃^-½ (A + I) D̃^-½`, `D̃` being the degree
/// matrix of `A + I`. With [`SelfLoops::Keep`] the diagonal is already in `A`
/// and the result is `D^-½ A D^-½`.
pub fn normalized_adjacency(g: &PatchGraph) -> CsrMatrix {
    let add_identity = g.self_loops == SelfLoops::Strip;
    let deg: Vec<f64> = g
        .degrees
        .iter()
        .map(|&d| d as f64 + if add_identity { 1.0 } else { 0.0 })
        .collect();
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let rows = g
        .neighbors
        .iter()
        .enumerate()
        .map(|(i, list)| {
            let mut cols: Vec<usize> = list.clone();
            if add_identity {
                let pos = cols.binary_search(&i).unwrap_err();
                cols.insert(pos, i);
            }
            cols.into_iter()
                .map(|j| (j, inv_sqrt[i] * inv_sqrt[j]))
                .collect()
        })
        .collect();
    CsrMatrix::from_row_entries(g.n(), rows).expect("neighbor lists are sorted")
}

/// Relaxed modularity `(1/2m) Tr(Cᵀ B C)` for any `n x k` matrix `C`, computed
/// as `(1/2m) [Tr(Cᵀ A C) - ‖dᵀ C‖² / 2m]`.
///
/// # Panics
/// If the graph has no edges or `C` has the wrong row count.
pub fn modularity_quadratic(g: &PatchGraph, c: &DenseMatrix) -> f64 {
    assert_eq!(c.rows(), g.n(), "assignment rows must match node count");
    let two_m = 2.0 * g.edge_count;
    assert!(two_m > 0.0, "modularity is undefined on a graph without edges");
    let mut trace = 0.0;
    for (i, list) in g.neighbors.iter().enumerate() {
        let ci = c.row(i);
        for &j in list {
            trace += ci.iter().zip(c.row(j)).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let dc = g.degree_weighted_col_sums(c);
    let null = dc.iter().map(|v| v * v).sum::<f64>() / two_m;
    (trace - null) / two_m
}

/// Modularity of a hard partition by the pairwise definition
/// `(1/2m) Σᵢⱼ [Aᵢⱼ - dᵢdⱼ/2m] δ(cᵢ, cⱼ)`, evaluated over all `n²` pairs.
///
/// # Panics
/// If the graph has no edges or `labels.len() != n`.
pub fn modularity_hard(g: &PatchGraph, labels: &[usize]) -> f64 {
    let n = g.n();
    assert_eq!(labels.len(), n, "one label per node");
    assert!(g.edge_count > 0.0, "modularity is undefined on a graph without edges");
    // integer accumulation, so the only rounding is in the final divisions
    let two_m: u64 = g.degrees.iter().map(|&d| d as u64).sum();
    let (mut edges, mut degree_products) = (0u64, 0u128);
    for i in 0..n {
        let di = g.degrees[i] as u128;
        for j in 0..n {
            if labels[i] != labels[j] {
                continue;
            }
            edges += u64::from(g.has_edge(i, j));
            degree_products += di * g.degrees[j] as u128;
        }
    }
    let two_m = two_m as f64;
    (edges as f64 - degree_products as f64 / two_m) / two_m
}

/// One-hot encoding of `labels` with `k` columns.
pub fn one_hot(labels: &[usize], k: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(labels.len(), k);
    for (i, &l) in labels.iter().enumerate() {
        m[(i, l)] = 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;

    fn grid(rows: &[Vec<f64>]) -> PatchFeatureGrid {
        let data = DenseMatrix::from_rows(rows).unwrap();
        PatchFeatureGrid::new(1, rows.len(), data, 8 * rows.len() as u32, 8, 8).unwrap()
    }

    fn two_triangles() -> PatchGraph {
        PatchGraph::from_edges(
            6,
            &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)],
            SelfLoops::Strip,
        )
        .unwrap()
    }

    #[test]
    fn normalize_scales_to_unit() {
        let f = grid(&[vec![3.0, 4.0], vec![1.0, 0.0]]);
        let n = normalize_features(&f).unwrap();
        assert!((n.data()[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((n.data()[(0, 1)] - 0.8).abs() < 1e-15);
        let again = normalize_features(&n).unwrap();
        assert!(again.data().max_abs_diff(n.data()) < 1e-12);
    }

    #[test]
    fn normalize_random_rows_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..384).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let n = normalize_features(&grid(&rows)).unwrap();
        for r in 0..4 {
            let norm = n.data().row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn normalize_rejects_zero_row() {
        let f = grid(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(normalize_features(&f), Err(Error::ZeroFeatureRow(1))));
    }

    #[test]
    fn feature_grid_rejects_bad_shapes() {
        let data = DenseMatrix::zeros(3, 2);
        assert!(PatchFeatureGrid::new(2, 2, data.clone(), 1, 1, 1).is_err());
        assert!(PatchFeatureGrid::new(0, 3, data, 1, 1, 1).is_err());
        let nan = DenseMatrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        assert!(PatchFeatureGrid::new(1, 1, nan, 1, 1, 1).is_err());
    }

    #[test]
    fn adjacency_of_orthogonal_groups() {
        let f = grid(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let g = build_adjacency(&f, 0.5).unwrap();
        let expected =
            DenseMatrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0; 3]])
                .unwrap();
        assert_eq!(g.adjacency_dense(), expected);
        assert_eq!(g.degrees(), &[1, 1, 0]);
        assert_eq!(g.edge_count(), 1.0);
    }

    #[test]
    fn adjacency_threshold_is_strict() {
        // cos = 0.5 exactly between rows 0 and 1
        let f = grid(&[vec![1.0, 0.0], vec![0.5, 0.75f64.sqrt()], vec![1.0, 0.0]]);
        let g = build_adjacency(&f, 0.5).unwrap();
        assert!(!g.has_edge(0, 1));
        assert!(g.has_edge(0, 2));
    }

    #[test]
    fn adjacency_empty_when_threshold_too_high() {
        let f = normalize_features(&grid(&[vec![1.0, 0.1], vec![0.1, 1.0], vec![1.0, 1.0]])).unwrap();
        assert!(matches!(build_adjacency(&f, 0.99), Err(Error::EmptyGraph { .. })));
    }

    #[test]
    fn adjacency_keep_mode_has_diagonal() {
        let f = grid(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let g = build_adjacency_with(&f, 0.5, SelfLoops::Keep).unwrap();
        assert!(g.has_edge(2, 2));
        assert_eq!(g.degrees(), &[2, 2, 1]);
        assert_eq!(g.edge_count(), 2.5);
    }

    #[test]
    fn rejects_tau_out_of_range() {
        let f = grid(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert!(matches!(build_adjacency(&f, 1.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn normalized_adjacency_examples() {
        let pair = PatchGraph::from_edges(2, &[(0, 1)], SelfLoops::Strip).unwrap();
        let a = normalized_adjacency(&pair).to_dense();
        assert!(a.as_slice().iter().all(|v| (v - 0.5).abs() < 1e-15));

        let isolated = PatchGraph::from_edges(3, &[(0, 1)], SelfLoops::Strip).unwrap();
        let a = normalized_adjacency(&isolated).to_dense();
        assert_eq!(a.row(2), &[0.0, 0.0, 1.0]);

        let path = PatchGraph::from_edges(3, &[(0, 1), (1, 2)], SelfLoops::Strip).unwrap();
        let a = normalized_adjacency(&path).to_dense();
        let dt = [2.0f64, 3.0, 2.0];
        for i in 0..3 {
            for j in 0..3 {
                let connected = i == j || (i as i64 - j as i64).abs() == 1;
                let expected = if connected { 1.0 / (dt[i] * dt[j]).sqrt() } else { 0.0 };
                assert!((a[(i, j)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_triangle_modularity() {
        let g = two_triangles();
        assert_eq!(g.edge_count(), 6.0);
        let labels = [0, 0, 0, 1, 1, 1];
        assert!((modularity_hard(&g, &labels) - 0.5).abs() < 1e-12);
        assert!((modularity_quadratic(&g, &one_hot(&labels, 2)) - 0.5).abs() < 1e-12);
        assert!(modularity_hard(&g, &[0; 6]).abs() < 1e-12);
        let ones = DenseMatrix::from_fn(6, 1, |_, _| 1.0);
        assert!(modularity_quadratic(&g, &ones).abs() < 1e-12);
    }

    #[test]
    fn path_graph_forms_agree() {
        let g = PatchGraph::from_edges(3, &[(0, 1), (1, 2)], SelfLoops::Strip).unwrap();
        let labels = [0, 0, 1];
        // m = 2, d = (1, 2, 1). Same-cluster pairs: (0,0),(0,1),(1,0),(1,1),(2,2).
        let two_m = 4.0;
        let oracle = ((0.0 - 1.0 / two_m)
            + 2.0 * (1.0 - 2.0 / two_m)
            + (0.0 - 4.0 / two_m)
            + (0.0 - 1.0 / two_m))
            / two_m;
        assert!((modularity_hard(&g, &labels) - oracle).abs() < 1e-15);
        assert!((modularity_quadratic(&g, &one_hot(&labels, 2)) - oracle).abs() < 1e-12);
    }
}
