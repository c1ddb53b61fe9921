//! Embedded verification battery behind `patchseg selfcheck`.
//!
//! Each check compares the implementation against an independent oracle
//! (pairwise sums, finite differences, hand-computed fixtures, planted
//! ground truth) and reports a single pass/fail row.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::eval::miou;
use crate::graph::{
    build_adjacency, modularity_hard, modularity_quadratic, normalize_features, normalized_adjacency, one_hot,
    PatchFeatureGrid, PatchGraph, SelfLoops,
};
use crate::io::{decode_features, encode_features};
use crate::loss::collapse_regularizer;
use crate::model::{forward, hard_labels, ModelParams};
use crate::nn::{
    derive_seed, finite_difference_check_with, rng_from_seed, Activation, DenseMatrix, GradCheckReport,
    Propagation, Stencil,
};
use crate::pipeline::{model_loss, model_loss_grad, segment_features, SegmentationMask, TrainConfig};
use crate::synthetic::{planted_instance, PlantedSpec};

/// Input width of the small gradient-check models.
pub const GRADCHECK_INPUT_DIM: usize = 24;
/// Hidden width of the small gradient-check models.
pub const GRADCHECK_HIDDEN_DIM: usize = 32;
pub const GRADCHECK_STEP: f64 = 1e-4;
pub const GRADCHECK_TOL: f64 = 1e-5;
/// Minimum distance of every hidden pre-activation from 0 in a sampled
/// gradient instance, so no probe of the stencil crosses the ReLU/SELU kink.
pub const KINK_MARGIN: f64 = 4.0 * GRADCHECK_STEP;
const MAX_SAMPLING_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct Battery {
    pub results: Vec<CheckResult>,
}

impl Battery {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn table(&self) -> String {
        let width = self.results.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  result  time     detail", "check");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{:<width$}  {:<6}  {:>6.2}s  {}",
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.elapsed.as_secs_f64(),
                r.detail
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SelfcheckOptions {
    /// Multiplier applied to analytic gradients before checking; anything
    /// other than 1.0 must make the gradient row fail.
    pub gradient_scale: f64,
    pub planted_instances: usize,
}

impl Default for SelfcheckOptions {
    fn default() -> Self {
        Self {
            gradient_scale: 1.0,
            planted_instances: 3,
        }
    }
}

pub fn run() -> Battery {
    run_with(&SelfcheckOptions::default())
}

pub fn run_with(opts: &SelfcheckOptions) -> Battery {
    let mut battery = Battery::default();
    let mut add = |name: &str, f: &dyn Fn() -> Result<(bool, String)>| {
        let start = Instant::now();
        let (passed, detail) = match f() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        battery.results.push(CheckResult {
            name: name.to_owned(),
            passed,
            detail,
            elapsed: start.elapsed(),
        });
    };
    add("modularity forms agree", &check_modularity_forms);
    add("two-triangle modularity", &check_two_triangles);
    add("regularizer endpoints", &check_regularizer);
    add("model gradients", &|| check_gradients(opts.gradient_scale));
    add("planted recovery", &|| check_planted(opts.planted_instances));
    add("feature file golden bytes", &check_golden_bytes);
    add("miou fixture", &check_miou_fixture);
    battery
}

/// Erdős–Rényi graph on `n` nodes with edge probability `p`; `None` if it
/// came out edgeless.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Option<PatchGraph> {
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    PatchGraph::from_edges(n, &edges, SelfLoops::Strip).ok().filter(|g| g.edge_count() > 0.0)
}

fn check_modularity_forms() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut graphs = 0;
    for seed in 0..40u64 {
        let n = 2 + (seed as usize % 7);
        let Some(g) = random_graph(n, 0.5, seed) else { continue };
        graphs += 1;
        for bits in 0u32..(1 << n) {
            let labels: Vec<usize> = (0..n).map(|i| ((bits >> i) & 1) as usize).collect();
            let q = modularity_quadratic(&g, &one_hot(&labels, 2));
            worst = worst.max((q - modularity_hard(&g, &labels)).abs());
        }
    }
    Ok((worst <= 1e-12, format!("{graphs} graphs, max diff {worst:.2e}")))
}

fn check_two_triangles() -> Result<(bool, String)> {
    let edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)];
    let g = PatchGraph::from_edges(6, &edges, SelfLoops::Strip)?;
    let split = modularity_quadratic(&g, &one_hot(&[0, 0, 0, 1, 1, 1], 2));
    let merged = modularity_quadratic(&g, &one_hot(&[0; 6], 2));
    let ok = (split - 0.5).abs() <= 1e-12 && merged.abs() <= 1e-12;
    Ok((ok, format!("split {split}, merged {merged}")))
}

fn check_regularizer() -> Result<(bool, String)> {
    let (n, k) = (12, 3);
    let uniform = DenseMatrix::from_fn(n, k, |_, _| 1.0 / k as f64);
    let collapsed = one_hot(&vec![0; n], k);
    let lo = collapse_regularizer(&uniform);
    let hi = collapse_regularizer(&collapsed);
    let expected_hi = (k as f64).sqrt() - 1.0;
    let ok = lo.abs() <= 1e-12 && (hi - expected_hi).abs() <= 1e-12;
    Ok((ok, format!("uniform {lo:.2e}, collapsed {hi:.6}")))
}

/// A small random graph with a freshly initialized model on it.
#[derive(Debug, Clone)]
pub struct GradientInstance {
    pub params: ModelParams,
    pub graph: PatchGraph,
    pub a_hat: Propagation,
    pub x: DenseMatrix,
}

impl GradientInstance {
    /// `n` nodes with Gaussian features of width `input_dim`, thresholded at
    /// cosine 0, and a Glorot model whose biases are also randomized so their
    /// gradients are exercised.
    pub fn with_dims(
        seed: u64,
        n: usize,
        input_dim: usize,
        hidden_dim: usize,
        k: usize,
        activation: Activation,
    ) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let data = DenseMatrix::from_fn(n, input_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f = normalize_features(&PatchFeatureGrid::new(1, n, data, n as u32, 1, 1)?)?;
        let graph = build_adjacency(&f, 0.0)?;
        let a_hat = Propagation::from_csr(normalized_adjacency(&graph));
        let mut params = ModelParams::init(input_dim, hidden_dim, k, activation, seed ^ 0x5eed);
        for (i, t) in params.tensors_mut().into_iter().enumerate() {
            if i % 2 == 1 {
                t.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
            }
        }
        Ok(Self {
            params,
            graph,
            a_hat,
            x: f.data().clone(),
        })
    }

    pub fn new(seed: u64, n: usize, k: usize, activation: Activation) -> Result<Self> {
        Self::with_dims(seed, n, GRADCHECK_INPUT_DIM, GRADCHECK_HIDDEN_DIM, k, activation)
    }

    /// Smallest `|z|` over both hidden layers' pre-activations.
    pub fn min_preactivation(&self) -> Result<f64> {
        let (_, cache) = forward(&self.params, &self.a_hat, &self.x)?;
        let (z1, z2) = cache.preactivations();
        Ok(z1.as_slice().iter().chain(z2.as_slice()).fold(f64::INFINITY, |m, z| m.min(z.abs())))
    }

    /// First instance in the seed stream derived from `seed` (and edgeless
    /// draws skipped) whose pre-activations all clear [`KINK_MARGIN`].
    pub fn away_from_kinks(
        seed: u64,
        n: usize,
        input_dim: usize,
        hidden_dim: usize,
        k: usize,
        activation: Activation,
    ) -> Result<Self> {
        let mut last_err = None;
        for attempt in 0..MAX_SAMPLING_ATTEMPTS {
            let s = if attempt == 0 { seed } else { derive_seed(seed, &format!("attempt-{attempt}")) };
            match Self::with_dims(s, n, input_dim, hidden_dim, k, activation) {
                Ok(inst) if inst.min_preactivation()? >= KINK_MARGIN => return Ok(inst),
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| {
            Error::InvalidConfig(format!("no instance with pre-activations clear of {KINK_MARGIN} found"))
        }))
    }

    pub fn check(&self, gradient_scale: f64, seed: u64) -> Result<GradCheckReport> {
        let mut analytic = model_loss_grad(&self.params, &self.graph, &self.a_hat, &self.x)?;
        analytic.iter_mut().for_each(|g| *g *= gradient_scale);
        let mut probe = self.params.clone();
        let loss = |flat: &[f64]| {
            probe.load_flat(flat).expect("flat length matches");
            model_loss(&probe, &self.graph, &self.a_hat, &self.x).expect("finite forward")
        };
        Ok(finite_difference_check_with(
            loss,
            &self.params.flatten(),
            &analytic,
            GRADCHECK_STEP,
            GRADCHECK_TOL,
            seed,
            Stencil::FourPoint,
        ))
    }
}

fn check_gradients(gradient_scale: f64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut runs = 0;
    for (a, act) in Activation::ALL.iter().enumerate() {
        for k in [2, 3] {
            let seed = 1000 + 10 * a as u64 + k as u64;
            let inst = GradientInstance::away_from_kinks(
                seed,
                10 + k,
                GRADCHECK_INPUT_DIM,
                GRADCHECK_HIDDEN_DIM,
                k,
                *act,
            )?;
            let report = inst.check(gradient_scale, seed)?;
            worst = worst.max(report.max_rel_err);
            runs += 1;
        }
    }
    Ok((worst <= GRADCHECK_TOL, format!("{runs} models, max rel err {worst:.2e}")))
}

fn check_planted(instances: usize) -> Result<(bool, String)> {
    let cfg = TrainConfig::default();
    let mut total = 0.0;
    let mut min_acc = 1.0f64;
    let mut decreased = true;
    for seed in 0..instances as u64 {
        let inst = planted_instance(&PlantedSpec::default(), seed);
        let (mask, outcome) = segment_features(&inst.features, &cfg, Some(&inst.image), None)?;
        total += miou(&mask, &inst.mask)?;
        decreased &= outcome.final_loss < outcome.initial_loss();
        let labels = hard_labels(&outcome.assignment);
        let agree = labels.iter().zip(&inst.patch_labels).filter(|(a, b)| a == b).count();
        min_acc = min_acc.min(agree.max(labels.len() - agree) as f64 / labels.len() as f64);
    }
    let mean = total / instances.max(1) as f64;
    Ok((
        min_acc >= 0.99 && decreased,
        format!(
            "{instances} instances, patch accuracy min {min_acc:.4}, loss decreased: {decreased}, pixel miou {mean:.4}"
        ),
    ))
}

/// Expected encoding of the 1x1 grid with features [1.0, -2.5] from an 8x8
/// source with patch size 8.
pub const GOLDEN_FEATURE_BYTES: [u8; 40] = [
    b'U', b'N', b'S', b'G', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 8, 0, 0, 0, 8, 0, 0, 0, 8, 0, 0, 0,
    0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x20, 0xC0,
];

pub fn golden_feature_grid() -> PatchFeatureGrid {
    PatchFeatureGrid::new(1, 1, DenseMatrix::from_rows(&[vec![1.0, -2.5]]).expect("one row"), 8, 8, 8).expect("valid grid")
}

fn check_golden_bytes() -> Result<(bool, String)> {
    let bytes = encode_features(&golden_feature_grid());
    let round_trip = decode_features(&GOLDEN_FEATURE_BYTES)?;
    let mut rejected = 0;
    for pos in 0..8 {
        for bit in 0..8 {
            let mut corrupt = GOLDEN_FEATURE_BYTES;
            corrupt[pos] ^= 1 << bit;
            rejected += decode_features(&corrupt).is_err() as usize;
        }
    }
    let ok = bytes == GOLDEN_FEATURE_BYTES
        && round_trip.data().as_slice() == [1.0, -2.5]
        && rejected == 64;
    Ok((ok, format!("encode matches: {}, {rejected}/64 header corruptions rejected", bytes == GOLDEN_FEATURE_BYTES)))
}

fn check_miou_fixture() -> Result<(bool, String)> {
    let gt = SegmentationMask::new(2, 2, vec![1, 1, 0, 0])?;
    let pred = SegmentationMask::new(2, 2, vec![1, 0, 0, 0])?;
    let v = miou(&pred, &gt)?;
    Ok(((v - 7.0 / 12.0).abs() <= 1e-15, format!("miou {v:.6}")))
}
