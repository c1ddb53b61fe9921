//! Two GCN layers followed by a fully connected softmax head:
//!
//! ```text
//! H1 = σ(Â X W0 + b0)
//! H2 = σ(Â H1 W1 + b1)
//! C  = softmax(H2 Wh + bh)
//! ```
//!
//! The backward pass is written out by hand for exactly this architecture.
//! It uses `Âᵀ` explicitly, so it stays correct for non-symmetric
//! propagation matrices.

use crate::error::{Error, Result};
use crate::nn::{self, softmax_rows, Activation, DenseMatrix, Propagate};

pub const INPUT_DIM: usize = 384;
pub const HIDDEN_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w0: DenseMatrix,
    pub b0: Vec<f64>,
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w_head: DenseMatrix,
    pub b_head: Vec<f64>,
    pub activation: Activation,
}

/// Gradients with the same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub w0: DenseMatrix,
    pub b0: Vec<f64>,
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w_head: DenseMatrix,
    pub b_head: Vec<f64>,
}

impl ModelParams {
    /// Glorot-uniform weights (drawn in the order W0, W1, Wh from one stream
    /// seeded by `seed`) and zero biases.
    pub fn init(input_dim: usize, hidden: usize, k: usize, activation: Activation, seed: u64) -> Self {
        let mut rng = nn::rng_from_seed(seed);
        Self {
            w0: nn::glorot_uniform_with_rng(input_dim, hidden, &mut rng),
            b0: vec![0.0; hidden],
            w1: nn::glorot_uniform_with_rng(hidden, hidden, &mut rng),
            b1: vec![0.0; hidden],
            w_head: nn::glorot_uniform_with_rng(hidden, k, &mut rng),
            b_head: vec![0.0; k],
            activation,
        }
    }

    pub fn zeros(input_dim: usize, hidden: usize, k: usize, activation: Activation) -> Self {
        Self {
            w0: DenseMatrix::zeros(input_dim, hidden),
            b0: vec![0.0; hidden],
            w1: DenseMatrix::zeros(hidden, hidden),
            b1: vec![0.0; hidden],
            w_head: DenseMatrix::zeros(hidden, k),
            b_head: vec![0.0; k],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w0.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.cols()
    }

    pub fn k(&self) -> usize {
        self.w_head.cols()
    }

    /// Element count of each tensor in [`Self::tensors`] order.
    pub fn tensor_sizes(&self) -> [usize; 6] {
        self.tensors().map(<[f64]>::len)
    }

    pub fn num_params(&self) -> usize {
        self.tensor_sizes().iter().sum()
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.w0.as_slice(),
            &self.b0,
            self.w1.as_slice(),
            &self.b1,
            self.w_head.as_slice(),
            &self.b_head,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w0.as_mut_slice(),
            &mut self.b0,
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w_head.as_mut_slice(),
            &mut self.b_head,
        ]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Overwrites every parameter from a flat vector in [`Self::tensors`] order.
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

impl ModelGradients {
    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.w0.as_slice(),
            &self.b0,
            self.w1.as_slice(),
            &self.b1,
            self.w_head.as_slice(),
            &self.b_head,
        ]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

/// Row-stochastic `n x k` cluster assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment(DenseMatrix);

impl SoftAssignment {
    pub const ROW_SUM_TOL: f64 = 1e-9;

    pub fn new(m: DenseMatrix) -> Result<Self> {
        if m.cols() == 0 {
            return Err(Error::ShapeMismatch("assignment with zero clusters".into()));
        }
        for r in 0..m.rows() {
            let row = m.row(r);
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::ShapeMismatch(format!("row {r} has entries outside [0, 1]")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > Self::ROW_SUM_TOL {
                return Err(Error::ShapeMismatch(format!("row {r} sums to {total}")));
            }
        }
        Ok(Self(m))
    }

    /// Every row equal to `1/k`.
    pub fn uniform(n: usize, k: usize) -> Self {
        Self(DenseMatrix::from_fn(n, k, |_, _| 1.0 / k as f64))
    }

    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::ShapeMismatch(format!("label {bad} with k = {k}")));
        }
        Ok(Self(crate::graph::one_hot(labels, k)))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn k(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.0
    }

    pub fn column(&self, cluster: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.0[(i, cluster)]).collect()
    }
}

/// Intermediates kept from [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<'a, P: Propagate + ?Sized> {
    params: &'a ModelParams,
    a_hat: &'a P,
    x: &'a DenseMatrix,
    z1: DenseMatrix,
    h1: DenseMatrix,
    z2: DenseMatrix,
    h2: DenseMatrix,
    c: DenseMatrix,
}

impl<P: Propagate + ?Sized> ForwardCache<'_, P> {
    /// Pre-activations of the two hidden layers.
    pub fn preactivations(&self) -> (&DenseMatrix, &DenseMatrix) {
        (&self.z1, &self.z2)
    }

    pub fn hidden1(&self) -> &DenseMatrix {
        &self.h1
    }

    pub fn hidden2(&self) -> &DenseMatrix {
        &self.h2
    }
}

pub fn forward<'a, P: Propagate + ?Sized>(
    params: &'a ModelParams,
    a_hat: &'a P,
    x: &'a DenseMatrix,
) -> Result<(SoftAssignment, ForwardCache<'a, P>)> {
    let n = x.rows();
    if a_hat.nodes() != n {
        return Err(Error::ShapeMismatch(format!(
            "propagation matrix over {} nodes for {n} feature rows",
            a_hat.nodes()
        )));
    }
    if x.cols() != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "features have dimension {}, model expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    let act = params.activation;

    let mut z1 = a_hat.propagate(&x.matmul(&params.w0)?)?;
    z1.add_row_vector(&params.b0)?;
    let h1 = act.apply_matrix(&z1);

    let mut z2 = a_hat.propagate(&h1.matmul(&params.w1)?)?;
    z2.add_row_vector(&params.b1)?;
    let h2 = act.apply_matrix(&z2);

    let mut logits = h2.matmul(&params.w_head)?;
    logits.add_row_vector(&params.b_head)?;
    let c = softmax_rows(&logits);

    let assignment = SoftAssignment(c.clone());
    Ok((
        assignment,
        ForwardCache {
            params,
            a_hat,
            x,
            z1,
            h1,
            z2,
            h2,
            c,
        },
    ))
}

/// Gradients of a scalar loss with respect to every parameter, given
/// `dL/dC`.
pub fn backward<P: Propagate + ?Sized>(cache: &ForwardCache<'_, P>, dl_dc: &DenseMatrix) -> Result<ModelGradients> {
    if dl_dc.shape() != cache.c.shape() {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient {:?} for assignment {:?}",
            dl_dc.shape(),
            cache.c.shape()
        )));
    }
    let p = cache.params;
    let act = p.activation;

    // softmax: dZ = C ⊙ (G - rowsum(G ⊙ C))
    let mut d_logits = dl_dc.clone();
    for r in 0..d_logits.rows() {
        let c_row = cache.c.row(r);
        let dot: f64 = d_logits.row(r).iter().zip(c_row).map(|(g, c)| g * c).sum();
        for (g, c) in d_logits.row_mut(r).iter_mut().zip(c_row) {
            *g = c * (*g - dot);
        }
    }
    let d_w_head = cache.h2.t_matmul(&d_logits)?;
    let d_b_head = d_logits.col_sums();

    let d_h2 = d_logits.matmul_t(&p.w_head)?;
    let d_z2 = d_h2.hadamard(&act.derivative_matrix(&cache.z2))?;
    let at_d_z2 = cache.a_hat.propagate_transpose(&d_z2)?;
    let d_w1 = cache.h1.t_matmul(&at_d_z2)?;
    let d_b1 = d_z2.col_sums();

    let d_h1 = at_d_z2.matmul_t(&p.w1)?;
    let d_z1 = d_h1.hadamard(&act.derivative_matrix(&cache.z1))?;
    let at_d_z1 = cache.a_hat.propagate_transpose(&d_z1)?;
    let d_w0 = cache.x.t_matmul(&at_d_z1)?;
    let d_b0 = d_z1.col_sums();

    Ok(ModelGradients {
        w0: d_w0,
        b0: d_b0,
        w1: d_w1,
        b1: d_b1,
        w_head: d_w_head,
        b_head: d_b_head,
    })
}

/// Per-row argmax; ties go to the lower cluster index.
pub fn hard_labels(c: &SoftAssignment) -> Vec<usize> {
    let m = c.matrix();
    (0..m.rows())
        .map(|r| {
            let mut best = 0;
            for (j, &v) in m.row(r).iter().enumerate().skip(1) {
                if v > m[(r, best)] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
