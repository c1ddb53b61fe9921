//! Unsupervised binary segmentation of images from frozen vision-transformer
//! patch features.
//!
//! Each image is handled on its own: patch features become the nodes of a
//! thresholded-similarity graph, a two-layer graph convolutional network with a
//! softmax head is trained from scratch on that single graph by maximizing a
//! relaxed modularity objective (with a collapse regularizer), and the
//! resulting soft assignment is turned into a pixel mask.
//!
//! The crate is organized by stage:
//!
//! - [`graph`]: feature normalization, adjacency construction, normalized
//!   adjacency and modularity.
//! - [`nn`]: dense matrices, activations, initialization, softmax, Adam and a
//!   finite-difference gradient checker.
//! - [`model`]: the fixed GCN architecture with its hand-written backward pass.
//! - [`loss`]: negative relaxed modularity plus collapse regularizer.
//! - [`pipeline`]: the per-image training loop and mask production.
//! - [`io`]: the binary feature-file format, mask files and dataset layout.
//! - [`eval`]: IoU / mIoU and dataset reports.
//! - [`synthetic`]: planted-partition instances with known ground truth.
//! - [`selfcheck`]: the embedded verification battery.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod loss;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod selfcheck;
pub mod synthetic;

pub use error::{Error, Result};
pub use eval::{evaluate_dataset, iou_per_class, miou, EvalReport};
pub use graph::{PatchFeatureGrid, PatchGraph, SelfLoops};
pub use model::{ModelParams, SoftAssignment};
pub use nn::{Activation, DenseMatrix};
pub use pipeline::{segment_features, SegmentationMask, TrainConfig};
