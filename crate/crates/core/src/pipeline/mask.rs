use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SoftAssignment;

use super::{RefineMode, TrainConfig};

/// Color bandwidth of the refinement vote, in 8-bit channel units.
pub const REFINE_SIGMA: f64 = 30.0;
pub const REFINE_ITERATIONS: usize = 5;

/// Where a predicted mask came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: TrainConfig,
    pub seed: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub foreground_cluster: usize,
    /// False when refinement was requested but no image was available.
    pub refine_applied: bool,
    /// True when more than one restart was used (not part of the reference
    /// single-run procedure).
    pub multi_restart: bool,
    pub kept_restart: usize,
}

/// Binary pixel mask, `1` = foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMask {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    pub provenance: Option<Provenance>,
}

impl SegmentationMask {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {width}x{height} mask",
                pixels.len()
            )));
        }
        if pixels.iter().any(|&p| p > 1) {
            return Err(Error::ShapeMismatch("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            pixels,
            provenance: None,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(value <= 1);
        Self {
            width,
            height,
            pixels: vec![value; width * height],
            provenance: None,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(u8::from(f(x, y)));
            }
        }
        Self {
            width,
            height,
            pixels,
            provenance: None,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            pixels: self.pixels.iter().map(|p| 1 - p).collect(),
            provenance: None,
            ..*self
        }
    }

    pub fn same_dims(&self, other: &Self) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            });
        }
        Ok(())
    }
}

/// Picks which of two clusters is the object: the one holding fewer patches
/// of the grid's border ring, then the one with fewer patches overall, then
/// cluster 1.
pub fn select_foreground(labels: &[usize], grid_h: usize, grid_w: usize) -> usize {
    assert_eq!(labels.len(), grid_h * grid_w, "one label per patch");
    let mut border = [0usize; 2];
    let mut total = [0usize; 2];
    for r in 0..grid_h {
        for c in 0..grid_w {
            let l = labels[r * grid_w + c];
            assert!(l < 2, "foreground selection needs a 2-cluster labeling");
            total[l] += 1;
            if r == 0 || c == 0 || r + 1 == grid_h || c + 1 == grid_w {
                border[l] += 1;
            }
        }
    }
    if border[0] != border[1] {
        return if border[0] < border[1] { 0 } else { 1 };
    }
    if total[0] != total[1] {
        return if total[0] < total[1] { 0 } else { 1 };
    }
    1
}

/// Bilinear interpolation of a `grid_h x grid_w` lattice (raster order) to
/// `out_w x out_h`, sampling at pixel centers and clamping at the edges.
pub fn bilinear_resize(values: &[f64], grid_h: usize, grid_w: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    assert_eq!(values.len(), grid_h * grid_w);
    let coord = |i: usize, out: usize, grid: usize| -> (usize, usize, f64) {
        let u = ((i as f64 + 0.5) * grid as f64 / out as f64 - 0.5).clamp(0.0, (grid - 1) as f64);
        let lo = u.floor() as usize;
        let hi = (lo + 1).min(grid - 1);
        (lo, hi, u - lo as f64)
    };
    let cols: Vec<_> = (0..out_w).map(|x| coord(x, out_w, grid_w)).collect();
    let mut out = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = coord(y, out_h, grid_h);
        for &(x0, x1, fx) in &cols {
            let top = values[y0 * grid_w + x0] * (1.0 - fx) + values[y0 * grid_w + x1] * fx;
            let bottom = values[y1 * grid_w + x0] * (1.0 - fx) + values[y1 * grid_w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Upsamples the foreground probability channel to pixels and thresholds it:
/// a pixel is foreground when the interpolated probability is at least 0.5.
pub fn upsample_mask(
    c: &SoftAssignment,
    fg: usize,
    grid_h: usize,
    grid_w: usize,
    out_w: usize,
    out_h: usize,
) -> Result<SegmentationMask> {
    if c.n() != grid_h * grid_w {
        return Err(Error::ShapeMismatch(format!(
            "{} assignment rows for a {grid_h}x{grid_w} grid",
            c.n()
        )));
    }
    if fg >= c.k() {
        return Err(Error::ShapeMismatch(format!("cluster {fg} with k = {}", c.k())));
    }
    let probs = bilinear_resize(&c.column(fg), grid_h, grid_w, out_w, out_h);
    let pixels = probs.iter().map(|&p| u8::from(p >= 0.5)).collect();
    SegmentationMask::new(out_w, out_h, pixels)
}

/// Color-guided majority filter.
///
/// Each of [`REFINE_ITERATIONS`] synchronous passes relabels every pixel by a
/// vote over its 3x3 neighborhood (itself included, clipped at the border).
/// A neighbor `q` of `p` votes for its current label with weight
/// `exp(-‖I(p) - I(q)‖² / 2σ²)`, `σ` = [`REFINE_SIGMA`]. Ties keep the current
/// label.
pub fn refine_edges(mask: &SegmentationMask, image: &RgbImage, mode: RefineMode) -> Result<SegmentationMask> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w != mask.width || h != mask.height {
        return Err(Error::DimensionMismatch {
            left_w: mask.width,
            left_h: mask.height,
            right_w: w,
            right_h: h,
        });
    }
    if mode == RefineMode::None {
        return Ok(mask.clone());
    }

    let colors: Vec<[f64; 3]> = image
        .pixels()
        .map(|p| [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])])
        .collect();
    let inv_two_sigma_sq = 1.0 / (2.0 * REFINE_SIGMA * REFINE_SIGMA);
    let mut current = mask.pixels.clone();
    let mut next = current.clone();
    for _ in 0..REFINE_ITERATIONS {
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                let mut votes = [0.0f64; 2];
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let q = ny * w + nx;
                        let dist_sq: f64 = colors[p]
                            .iter()
                            .zip(&colors[q])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        votes[current[q] as usize] += (-dist_sq * inv_two_sigma_sq).exp();
                    }
                }
                next[p] = if votes[1] > votes[0] {
                    1
                } else if votes[0] > votes[1] {
                    0
                } else {
                    current[p]
                };
            }
        }
        std::mem::swap(&mut current, &mut next);
    }
    Ok(SegmentationMask {
        width: w,
        height: h,
        pixels: current,
        provenance: mask.provenance.clone(),
    })
}
