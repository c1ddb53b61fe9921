//! Small dense numerical kernel used by the model: row-major matrices, a CSR
//! matrix for adjacency products, activations, Glorot initialization, Adam
//! and a finite-difference gradient checker.

mod activation;
mod adam;
mod gradcheck;
mod init;
mod matrix;
mod propagate;
mod sparse;

pub use activation::Activation;
pub use adam::{adam_step, AdamConfig, AdamState, DecayMode};
pub use gradcheck::{
    finite_difference_check, finite_difference_check_with, GradCheckReport, Stencil, MAGNITUDE_FLOOR, MAX_CHECKED_COORDS,
};
pub use init::{derive_seed, glorot_uniform, glorot_uniform_with_rng, rng_from_seed, Rng};
pub use matrix::{softmax_rows, DenseMatrix};
pub use propagate::{Propagate, Propagation};
pub use sparse::CsrMatrix;
