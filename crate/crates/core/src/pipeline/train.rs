use crate::error::{Error, Result};
use crate::graph::{build_adjacency_with, normalize_features, normalized_adjacency, PatchFeatureGrid, PatchGraph};
use crate::loss::{loss_grad, loss_value};
use crate::model::{backward, forward, ModelParams, SoftAssignment, HIDDEN_DIM};
use crate::nn::{adam_step, derive_seed, AdamState, DenseMatrix, Propagate, Propagation};

use super::TrainConfig;

/// Result of fitting a fresh model to one image.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub assignment: SoftAssignment,
    pub params: ModelParams,
    /// Loss at the start of each epoch, before that epoch's update.
    pub loss_trace: Vec<f64>,
    /// Loss after the last update.
    pub final_loss: f64,
    /// Adam steps taken by the kept run.
    pub steps: u64,
    /// Initialization seed of the kept run.
    pub seed: u64,
    /// Index of the kept run among the restarts.
    pub restart: usize,
}

impl TrainOutcome {
    pub fn initial_loss(&self) -> f64 {
        self.loss_trace[0]
    }
}

/// Graph and propagation matrix for one image, shared by all restarts.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub features: PatchFeatureGrid,
    pub graph: PatchGraph,
    pub a_hat: Propagation,
}

pub fn prepare_graph(f: &PatchFeatureGrid, cfg: &TrainConfig) -> Result<PreparedGraph> {
    let features = normalize_features(f)?;
    let graph = build_adjacency_with(&features, cfg.tau, cfg.self_loops)?;
    let a_hat = Propagation::from_csr(normalized_adjacency(&graph));
    Ok(PreparedGraph {
        features,
        graph,
        a_hat,
    })
}

/// Seed for restart `r`: the configured seed itself for the first run,
/// derived seeds afterwards.
pub fn restart_seed(base: u64, r: usize) -> u64 {
    if r == 0 {
        base
    } else {
        derive_seed(base, &format!("restart-{r}"))
    }
}

/// Trains a Glorot-initialized model full-batch on the image's own graph, one
/// Adam step per epoch. With several restarts, the run with the lowest final
/// loss is returned (first one wins ties).
pub fn train_image(f: &PatchFeatureGrid, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let prepared = prepare_graph(f, cfg)?;
    train_prepared(&prepared, cfg)
}

pub fn train_prepared(prepared: &PreparedGraph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut best: Option<TrainOutcome> = None;
    for r in 0..cfg.restarts {
        let outcome = train_once(prepared, cfg, restart_seed(cfg.seed, r), r)?;
        if best.as_ref().is_none_or(|b| outcome.final_loss < b.final_loss) {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn train_once(prepared: &PreparedGraph, cfg: &TrainConfig, seed: u64, restart: usize) -> Result<TrainOutcome> {
    let x = prepared.features.data();
    let graph = &prepared.graph;
    let a_hat = &prepared.a_hat;

    let mut params = ModelParams::init(x.cols(), HIDDEN_DIM, cfg.k, cfg.activation, seed);
    let mut state = AdamState::new(cfg.adam(), &params.tensor_sizes());
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let grads = {
            let (c, cache) = forward(&params, a_hat, x)?;
            let loss = loss_value(graph, c.matrix());
            if !loss.is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            trace.push(loss);
            backward(&cache, &loss_grad(graph, c.matrix())?)?
        };
        let grad_tensors = grads.tensors();
        adam_step(&mut params.tensors_mut(), &grad_tensors, &mut state)?;
        if !params.is_finite() {
            return Err(Error::DivergedLoss { epoch });
        }
    }

    let (assignment, _) = forward(&params, a_hat, x)?;
    let final_loss = loss_value(graph, assignment.matrix());
    if !final_loss.is_finite() {
        return Err(Error::DivergedLoss { epoch: cfg.epochs });
    }
    Ok(TrainOutcome {
        assignment,
        params,
        loss_trace: trace,
        final_loss,
        steps: state.step_count(),
        seed,
        restart,
    })
}

/// Full-model loss as a function of flat parameters, for gradient checks.
pub fn model_loss<P: Propagate + ?Sized>(params: &ModelParams, graph: &PatchGraph, a_hat: &P, x: &DenseMatrix) -> Result<f64> {
    let (c, _) = forward(params, a_hat, x)?;
    Ok(loss_value(graph, c.matrix()))
}

/// Analytic gradient of [`model_loss`] in [`ModelParams::flatten`] order.
pub fn model_loss_grad<P: Propagate + ?Sized>(params: &ModelParams, graph: &PatchGraph, a_hat: &P, x: &DenseMatrix) -> Result<Vec<f64>> {
    let (c, cache) = forward(params, a_hat, x)?;
    Ok(backward(&cache, &loss_grad(graph, c.matrix())?)?.flatten())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{planted_instance, PlantedSpec};

    fn small_instance(seed: u64) -> PatchFeatureGrid {
        planted_instance(&PlantedSpec { grid_h: 10, grid_w: 10, dim: 32, ..PlantedSpec::default() }, seed).features
    }

    #[test]
    fn one_epoch_takes_one_step() {
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        let out = train_image(&small_instance(1), &cfg).unwrap();
        assert_eq!(out.steps, 1);
        assert_eq!(out.loss_trace.len(), 1);
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        assert!(matches!(train_image(&small_instance(1), &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn empty_graph_propagates() {
        let cfg = TrainConfig { tau: 0.9999, ..Default::default() };
        let f = small_instance(2);
        assert!(matches!(train_image(&f, &cfg), Err(Error::EmptyGraph { .. })));
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let cfg = TrainConfig { epochs: 20, ..Default::default() };
        let f = small_instance(3);
        let a = train_image(&f, &cfg).unwrap();
        let b = train_image(&f, &cfg).unwrap();
        let bits = |t: &[f64]| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.loss_trace), bits(&b.loss_trace));
        assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
    }

    #[test]
    fn restarts_keep_lowest_final_loss() {
        let f = small_instance(4);
        let cfg = TrainConfig { epochs: 10, restarts: 3, ..Default::default() };
        let best = train_image(&f, &cfg).unwrap();
        let prepared = prepare_graph(&f, &cfg).unwrap();
        for r in 0..3 {
            let single = train_once(&prepared, &cfg, restart_seed(cfg.seed, r), r).unwrap();
            assert!(best.final_loss <= single.final_loss);
        }
    }
}
