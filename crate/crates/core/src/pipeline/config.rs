use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SelfLoops;
use crate::nn::{Activation, AdamConfig, DecayMode};

/// Post-processing applied to the upsampled mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefineMode {
    None,
    /// Color-weighted 3x3 majority vote, see [`refine_edges`](super::refine_edges).
    #[default]
    Smooth,
}

impl fmt::Display for RefineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefineMode::None => "none",
            RefineMode::Smooth => "smooth",
        })
    }
}

impl FromStr for RefineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(RefineMode::None),
            "smooth" => Ok(RefineMode::Smooth),
            other => Err(format!("unknown refine mode {other:?} (expected none or smooth)")),
        }
    }
}

/// Per-image training and post-processing settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub tau: f64,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub decay_mode: DecayMode,
    pub k: usize,
    pub activation: Activation,
    pub seed: u64,
    pub restarts: usize,
    pub refine: RefineMode,
    pub self_loops: SelfLoops,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            epochs: 100,
            lr: 1e-3,
            weight_decay: 1e-2,
            decay_mode: DecayMode::Weight,
            k: 2,
            activation: Activation::Silu,
            seed: 0,
            restarts: 1,
            refine: RefineMode::Smooth,
            self_loops: SelfLoops::Strip,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.epochs < 1 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("learning rate {} must be positive", self.lr));
        }
        if !(self.tau > -1.0 && self.tau < 1.0) {
            return fail(format!("tau {} outside (-1, 1)", self.tau));
        }
        if self.k < 2 {
            return fail(format!("k = {} but at least 2 clusters are needed", self.k));
        }
        if self.restarts < 1 {
            return fail("restarts must be at least 1".into());
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight decay {} must be non-negative", self.weight_decay));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            decay: self.weight_decay,
            decay_mode: self.decay_mode,
            ..AdamConfig::default()
        }
    }
}
