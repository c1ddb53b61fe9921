//! Training settings from TOML, validation errors, and per-image seeds.

use patchseg::cli::image_seed;
use patchseg::pipeline::TrainConfig;

fn main() {
    let cfg: TrainConfig = toml::from_str("tau = 0.45\nactivation = \"selu\"\nrefine = \"none\"\n").expect("valid TOML");
    println!("{cfg:#?}");

    let bad = TrainConfig { tau: 1.5, ..TrainConfig::default() };
    println!("tau = 1.5: {}", bad.validate().unwrap_err());

    for stem in ["cat", "dog"] {
        println!("seed for {stem}: {}", image_seed(cfg.seed, stem));
    }
}
