//! Segments a planted instance end to end and writes the image, the ground
//! truth and both predicted masks (with and without edge refinement).
//!
//! ```bash
//! cargo run --release -p patchseg --example planted_segmentation -- out_dir 3
//! ```

use std::path::PathBuf;

use patchseg::io::write_mask;
use patchseg::pipeline::{segment_features, RefineMode, TrainConfig};
use patchseg::miou;
use patchseg::synthetic::{planted_instance, PlantedSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "planted_out".into()));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    std::fs::create_dir_all(&out)?;

    let inst = planted_instance(&PlantedSpec::default(), seed);
    inst.image.save(out.join("image.png"))?;
    write_mask(&inst.mask, out.join("truth.png"))?;

    for refine in [RefineMode::Smooth, RefineMode::None] {
        let cfg = TrainConfig { refine, ..TrainConfig::default() };
        let (mask, outcome) = segment_features(&inst.features, &cfg, Some(&inst.image), None)?;
        write_mask(&mask, out.join(format!("pred_{refine}.png")))?;
        println!(
            "refine {refine:<6} loss {:+.4} -> {:+.4}, miou {:.4}",
            outcome.initial_loss(),
            outcome.final_loss,
            miou(&mask, &inst.mask)?
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
