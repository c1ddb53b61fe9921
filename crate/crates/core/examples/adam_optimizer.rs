//! Adam on an ill-conditioned quadratic, with both decay modes.

use patchseg::nn::{adam_step, AdamConfig, AdamState, DecayMode};

fn main() -> patchseg::Result<()> {
    let scales = [1.0, 10.0, 100.0];
    for decay_mode in [DecayMode::Weight, DecayMode::LearningRate] {
        let config = AdamConfig { lr: 0.05, decay: 1e-3, decay_mode, ..AdamConfig::default() };
        let mut state = AdamState::new(config, &[3]);
        let mut x = vec![3.0, -2.0, 1.0];
        for step in 1..=400 {
            let grad: Vec<f64> = x.iter().zip(&scales).map(|(v, s)| 2.0 * s * v).collect();
            adam_step(&mut [&mut x], &[&grad], &mut state)?;
            if step % 100 == 0 {
                let f: f64 = x.iter().zip(&scales).map(|(v, s)| s * v * v).sum();
                println!("{decay_mode:?} step {step}: f = {f:.3e}, lr = {:.4}", state.current_lr());
            }
        }
    }
    Ok(())
}
