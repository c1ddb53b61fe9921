//! Planted-partition instances: a patch grid whose features are drawn around
//! two orthogonal unit centroids, an elliptical foreground region that never
//! touches the grid border, and the matching pixel mask and two-tone image.

use image::{Rgb, RgbImage};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::graph::PatchFeatureGrid;
use crate::nn::{rng_from_seed, DenseMatrix};
use crate::pipeline::SegmentationMask;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub grid_h: usize,
    pub grid_w: usize,
    pub dim: usize,
    /// Standard deviation of the noise vector's norm: each coordinate gets
    /// `N(0, noise_sigma² / dim)`.
    pub noise_sigma: f64,
    pub patch_size: usize,
    pub background_color: [u8; 3],
    pub foreground_color: [u8; 3],
    /// Uniform per-channel pixel jitter in `[-color_jitter, color_jitter]`.
    pub color_jitter: u8,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            grid_h: 28,
            grid_w: 28,
            dim: 384,
            noise_sigma: 0.05,
            patch_size: 8,
            background_color: [40, 90, 160],
            foreground_color: [200, 120, 60],
            color_jitter: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub features: PatchFeatureGrid,
    /// Raster-order patch labels, `1` = foreground.
    pub patch_labels: Vec<usize>,
    pub mask: SegmentationMask,
    pub image: RgbImage,
}

/// Deterministic planted instance for `seed`.
pub fn planted_instance(spec: &PlantedSpec, seed: u64) -> PlantedInstance {
    assert!(spec.grid_h >= 5 && spec.grid_w >= 5, "grid too small for an interior region");
    assert!(spec.dim >= 2);
    let mut rng = rng_from_seed(seed);
    let (gh, gw) = (spec.grid_h as f64, spec.grid_w as f64);

    // ellipse strictly inside the ring of border patches
    let ry = rng.gen_range(0.18..0.32) * gh;
    let rx = rng.gen_range(0.18..0.32) * gw;
    let cy = rng.gen_range((1.5 + ry)..=(gh - 1.5 - ry).max(1.5 + ry));
    let cx = rng.gen_range((1.5 + rx)..=(gw - 1.5 - rx).max(1.5 + rx));
    // (row, col) in grid units
    let inside = |r: f64, c: f64| ((r - cy) / ry).powi(2) + ((c - cx) / rx).powi(2) <= 1.0;
    let patch_labels: Vec<usize> = (0..spec.grid_h * spec.grid_w)
        .map(|i| usize::from(inside((i / spec.grid_w) as f64 + 0.5, (i % spec.grid_w) as f64 + 0.5)))
        .collect();

    let centroids = orthonormal_pair(spec.dim, &mut rng);
    let coord_sigma = spec.noise_sigma / (spec.dim as f64).sqrt();
    let mut data = DenseMatrix::zeros(patch_labels.len(), spec.dim);
    for (i, &label) in patch_labels.iter().enumerate() {
        for (v, c) in data.row_mut(i).iter_mut().zip(&centroids[label]) {
            *v = c + coord_sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }

    let p = spec.patch_size;
    let (w, h) = (spec.grid_w * p, spec.grid_h * p);
    let mask = SegmentationMask::from_fn(w, h, |x, y| patch_labels[(y / p) * spec.grid_w + x / p] == 1);
    let jitter = i16::from(spec.color_jitter);
    let image = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let base = if mask.get(x as usize, y as usize) == 1 {
            spec.foreground_color
        } else {
            spec.background_color
        };
        Rgb(base.map(|ch| {
            let delta = if jitter > 0 { rng.gen_range(-jitter..=jitter) } else { 0 };
            (i16::from(ch) + delta).clamp(0, 255) as u8
        }))
    });

    let features = PatchFeatureGrid::new(spec.grid_h, spec.grid_w, data, w as u32, h as u32, p as u32)
        .expect("planted grid is well formed");
    PlantedInstance {
        features,
        patch_labels,
        mask,
        image,
    }
}

fn orthonormal_pair(dim: usize, rng: &mut impl Rng) -> [Vec<f64>; 2] {
    let mut gaussian = || -> Vec<f64> { (0..dim).map(|_| rng.sample(StandardNormal)).collect() };
    let normalize = |v: &mut Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    };
    let mut a = gaussian();
    normalize(&mut a);
    let mut b = gaussian();
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    b.iter_mut().zip(&a).for_each(|(y, x)| *y -= dot * x);
    normalize(&mut b);
    [a, b]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn foreground_stays_off_the_border() {
        for seed in 0..50 {
            let inst = planted_instance(&PlantedSpec::default(), seed);
            let (h, w) = (28, 28);
            let fg = inst.patch_labels.iter().filter(|&&l| l == 1).count();
            assert!(fg > 20, "seed {seed}: {fg} foreground patches");
            for r in 0..h {
                for c in 0..w {
                    if r == 0 || c == 0 || r == h - 1 || c == w - 1 {
                        assert_eq!(inst.patch_labels[r * w + c], 0);
                    }
                }
            }
        }
    }

    #[test]
    fn centroid_geometry() {
        let inst = planted_instance(&PlantedSpec::default(), 3);
        let f = crate::graph::normalize_features(&inst.features).unwrap();
        let (fg, bg) = {
            let fg = inst.patch_labels.iter().position(|&l| l == 1).unwrap();
            let bg = inst.patch_labels.iter().position(|&l| l == 0).unwrap();
            (fg, bg)
        };
        let dot = |i: usize, j: usize| -> f64 {
            f.data().row(i).iter().zip(f.data().row(j)).map(|(a, b)| a * b).sum()
        };
        assert!(dot(fg, bg).abs() < 0.3);
        let fg2 = inst.patch_labels.iter().rposition(|&l| l == 1).unwrap();
        assert!(dot(fg, fg2) > 0.9);
    }

    #[test]
    fn deterministic() {
        let a = planted_instance(&PlantedSpec::default(), 8);
        let b = planted_instance(&PlantedSpec::default(), 8);
        assert_eq!(a.features, b.features);
        assert_eq!(a.image, b.image);
    }
}
