use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the configured `decay` value is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayMode {
    /// Decoupled weight decay: `p <- p - lr * decay * p` before the Adam update.
    #[default]
    Weight,
    /// Inverse-time learning-rate decay `lr / (1 + decay * t)`, no weight decay.
    LearningRate,
}

impl fmt::Display for DecayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayMode::Weight => "weight",
            DecayMode::LearningRate => "learning-rate",
        })
    }
}

impl FromStr for DecayMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "weight" => Ok(DecayMode::Weight),
            "learning-rate" => Ok(DecayMode::LearningRate),
            other => Err(format!("unknown decay mode {other:?} (expected weight or learning-rate)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub decay: f64,
    pub decay_mode: DecayMode,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay: 1e-2,
            decay_mode: DecayMode::Weight,
        }
    }
}

/// Optimizer moments, one buffer per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
}

impl AdamState {
    /// `sizes` lists the element count of each parameter tensor, in the order
    /// they will be passed to [`adam_step`].
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            first_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second_moment
    }

    /// Learning rate used by the next step.
    pub fn current_lr(&self) -> f64 {
        match self.config.decay_mode {
            DecayMode::Weight => self.config.lr,
            DecayMode::LearningRate => {
                self.config.lr / (1.0 + self.config.decay * self.step_count as f64)
            }
        }
    }
}

/// One bias-corrected Adam update over every parameter tensor.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam: {} parameter tensors, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first_moment[i].len() {
            return Err(Error::ShapeMismatch(format!(
                "adam tensor {i}: {} params, {} grads, {} moments",
                p.len(),
                g.len(),
                state.first_moment[i].len()
            )));
        }
    }

    let cfg = state.config;
    let lr = state.current_lr();
    let t = state.step_count + 1;
    let bias1 = 1.0 - cfg.beta1.powi(t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(t as i32);
    let shrink = match cfg.decay_mode {
        DecayMode::Weight => 1.0 - lr * cfg.decay,
        DecayMode::LearningRate => 1.0,
    };

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        for j in 0..p.len() {
            let gj = g[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            p[j] = p[j] * shrink - lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    state.step_count = t;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_decay() -> AdamConfig {
        AdamConfig {
            decay: 0.0,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn zero_gradient_is_identity_without_decay() {
        let mut p = vec![0.3, -1.2, 5.0];
        let before = p.clone();
        let mut state = AdamState::new(no_decay(), &[3]);
        for _ in 0..10 {
            adam_step(&mut [&mut p], &[&[0.0; 3]], &mut state).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(state.step_count(), 10);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![1.0, 1.0, 1.0];
        let g = [0.5, -3.0, 1e-3];
        let mut state = AdamState::new(no_decay(), &[3]);
        adam_step(&mut [&mut p], &[&g], &mut state).unwrap();
        for (j, &gj) in g.iter().enumerate() {
            let expected = 1e-3 * gj.abs() / (gj.abs() + 1e-8);
            let moved = (p[j] - 1.0).abs();
            assert!((moved - expected).abs() < 1e-15, "{moved} vs {expected}");
            assert!((moved - 1e-3).abs() < 1e-7);
            assert_eq!((p[j] - 1.0).signum(), -gj.signum());
        }
    }

    #[test]
    fn decoupled_weight_decay_shrinks_before_update() {
        let mut p = vec![2.0];
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(cfg, &[1]);
        adam_step(&mut [&mut p], &[&[0.0]], &mut state).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 1e-3 * 1e-2)).abs() < 1e-15);
    }

    #[test]
    fn learning_rate_decay_mode() {
        let cfg = AdamConfig {
            decay_mode: DecayMode::LearningRate,
            decay: 0.5,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(cfg, &[1]);
        let mut p = vec![0.0];
        assert_eq!(state.current_lr(), 1e-3);
        adam_step(&mut [&mut p], &[&[1.0]], &mut state).unwrap();
        assert!((state.current_lr() - 1e-3 / 1.5).abs() < 1e-18);
        // no weight decay in this mode: zero gradient from a fresh state leaves p alone
        let mut q = vec![3.0];
        let mut fresh = AdamState::new(cfg, &[1]);
        adam_step(&mut [&mut q], &[&[0.0]], &mut fresh).unwrap();
        assert_eq!(q[0], 3.0);
    }

    #[test]
    fn quadratic_bowl_norm_decreases() {
        let mut p = vec![0.8, -0.3, 0.05, 1.7];
        let mut state = AdamState::new(no_decay(), &[4]);
        let norm = |p: &[f64]| p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut last = norm(&p);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
            adam_step(&mut [&mut p], &[&g], &mut state).unwrap();
            let now = norm(&p);
            assert!(now < last, "{now} !< {last}");
            last = now;
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut p = vec![0.0; 2];
        let mut state = AdamState::new(no_decay(), &[2]);
        assert!(matches!(
            adam_step(&mut [&mut p], &[&[0.0; 3]], &mut state),
            Err(Error::ShapeMismatch(_))
        ));
        assert_eq!(state.step_count(), 0);
    }
}
