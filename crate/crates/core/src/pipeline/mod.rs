//! Per-image training and mask production.
//!
//! [`segment_features`] chains the whole procedure: train on the image's
//! patch graph, take hard labels, choose the foreground cluster, upsample the
//! foreground probability to pixels and optionally refine edges against the
//! image colors.

mod config;
mod mask;
mod train;

use image::RgbImage;

pub use config::{RefineMode, TrainConfig};
pub use mask::{
    bilinear_resize, refine_edges, select_foreground, upsample_mask, Provenance, SegmentationMask,
    REFINE_ITERATIONS, REFINE_SIGMA,
};
pub use train::{
    model_loss, model_loss_grad, prepare_graph, restart_seed, train_image, train_prepared, PreparedGraph,
    TrainOutcome,
};

use crate::error::{Error, Result};
use crate::graph::PatchFeatureGrid;
use crate::model::hard_labels;

/// Full segmentation of one image from its patch features.
///
/// The mask is produced at `out_size` when given, otherwise at the source
/// image size recorded with the features. `image`, if present, is resized to
/// that size when needed and used for edge refinement; without it refinement
/// is skipped and the provenance says so.
pub fn segment_features(
    f: &PatchFeatureGrid,
    cfg: &TrainConfig,
    image: Option<&RgbImage>,
    out_size: Option<(usize, usize)>,
) -> Result<(SegmentationMask, TrainOutcome)> {
    if cfg.k != 2 {
        return Err(Error::InvalidConfig(format!(
            "mask production needs k = 2, got k = {}",
            cfg.k
        )));
    }
    let outcome = train_image(f, cfg)?;
    let labels = hard_labels(&outcome.assignment);
    let fg = select_foreground(&labels, f.grid_h(), f.grid_w());

    let (out_w, out_h) = out_size.unwrap_or((f.source_image_w as usize, f.source_image_h as usize));
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidFeatures("source image size is zero".into()));
    }
    let mut mask = upsample_mask(&outcome.assignment, fg, f.grid_h(), f.grid_w(), out_w, out_h)?;

    let mut refine_applied = false;
    if cfg.refine == RefineMode::Smooth {
        if let Some(img) = image {
            let resized;
            let img = if (img.width() as usize, img.height() as usize) == (out_w, out_h) {
                img
            } else {
                resized = image::imageops::resize(
                    img,
                    out_w as u32,
                    out_h as u32,
                    image::imageops::FilterType::Triangle,
                );
                &resized
            };
            mask = refine_edges(&mask, img, RefineMode::Smooth)?;
            refine_applied = true;
        }
    }

    mask.provenance = Some(Provenance {
        config: cfg.clone(),
        seed: outcome.seed,
        initial_loss: outcome.initial_loss(),
        final_loss: outcome.final_loss,
        foreground_cluster: fg,
        refine_applied,
        multi_restart: cfg.restarts > 1,
        kept_restart: outcome.restart,
    });
    Ok((mask, outcome))
}
