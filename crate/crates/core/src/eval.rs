//! Intersection-over-union metrics for binary masks and dataset reports.
//!
//! A class absent from both prediction and ground truth scores 1.0. The
//! dataset aggregate is the unweighted mean of per-image mIoU.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::SegmentationMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ClassCounts {
    pub fn iou(&self) -> f64 {
        let denom = self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            self.tp as f64 / denom as f64
        }
    }
}

pub fn class_counts(pred: &SegmentationMask, gt: &SegmentationMask, cls: u8) -> Result<ClassCounts> {
    pred.same_dims(gt)?;
    let mut counts = ClassCounts::default();
    for (&p, &g) in pred.pixels().iter().zip(gt.pixels()) {
        match (p == cls, g == cls) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fp += 1,
            (false, true) => counts.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(counts)
}

/// `TP / (TP + FP + FN)` for class `cls` (0 = background, 1 = foreground).
pub fn iou_per_class(pred: &SegmentationMask, gt: &SegmentationMask, cls: u8) -> Result<f64> {
    Ok(class_counts(pred, gt, cls)?.iou())
}

/// Mean of the background and foreground IoU.
pub fn miou(pred: &SegmentationMask, gt: &SegmentationMask) -> Result<f64> {
    Ok(score(pred, gt)?.miou)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskScores {
    pub miou: f64,
    pub iou_fg: f64,
    pub iou_bg: f64,
}

pub fn score(pred: &SegmentationMask, gt: &SegmentationMask) -> Result<MaskScores> {
    let bg = class_counts(pred, gt, 0)?;
    let fg = class_counts(pred, gt, 1)?;
    // (a/b + c/d) / 2 = (ad + cb) / 2bd in integers, rounded once
    let ratio = |c: ClassCounts| match c.tp + c.fp + c.fn_ {
        0 => (1u128, 1u128),
        u => (c.tp as u128, u as u128),
    };
    let ((a, b), (c, d)) = (ratio(bg), ratio(fg));
    Ok(MaskScores {
        miou: (a * d + c * b) as f64 / (2 * b * d) as f64,
        iou_fg: fg.iou(),
        iou_bg: bg.iou(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub name: String,
    pub miou: f64,
    pub iou_fg: f64,
    pub iou_bg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub name: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: serde_json::Value,
    pub images: Vec<ImageScore>,
    /// Unweighted mean of per-image mIoU; `None` when every image failed.
    pub aggregate_miou: Option<f64>,
    /// Unweighted mean of per-image foreground IoU.
    pub aggregate_iou_fg: Option<f64>,
    pub failures: Vec<Failure>,
}

impl EvalReport {
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            config,
            images: Vec::new(),
            aggregate_miou: None,
            aggregate_iou_fg: None,
            failures: Vec::new(),
        }
    }

    pub fn push_score(&mut self, score: ImageScore) {
        self.images.push(score);
        self.update_aggregate();
    }

    pub fn push_failure(&mut self, name: impl Into<String>, error: impl ToString) {
        self.failures.push(Failure {
            name: name.into(),
            error: error.to_string(),
        });
    }

    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }

    fn update_aggregate(&mut self) {
        let n = self.images.len();
        if n == 0 {
            self.aggregate_miou = None;
            self.aggregate_iou_fg = None;
            return;
        }
        self.aggregate_miou = Some(self.images.iter().map(|s| s.miou).sum::<f64>() / n as f64);
        self.aggregate_iou_fg = Some(self.images.iter().map(|s| s.iou_fg).sum::<f64>() / n as f64);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct EvalPair {
    pub name: String,
    pub pred: SegmentationMask,
    pub gt: SegmentationMask,
}

/// Scores every pair. Pairs that cannot be scored (dimension mismatch) are
/// listed under `failures` and left out of the aggregate.
pub fn evaluate_dataset(pairs: &[EvalPair], config: serde_json::Value) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("<evaluation pairs>".into()));
    }
    let results: Vec<_> = pairs.par_iter().map(|p| (p.name.clone(), score(&p.pred, &p.gt))).collect();
    let mut report = EvalReport::new(config);
    for (name, result) in results {
        match result {
            Ok(s) => report.images.push(ImageScore {
                name,
                miou: s.miou,
                iou_fg: s.iou_fg,
                iou_bg: s.iou_bg,
            }),
            Err(e) => report.push_failure(name, e),
        }
    }
    report.update_aggregate();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, px: &[u8]) -> SegmentationMask {
        SegmentationMask::new(w, h, px.to_vec()).unwrap()
    }

    #[test]
    fn identical_masks_score_one() {
        let m = mask(3, 2, &[0, 1, 1, 0, 0, 1]);
        assert_eq!(score(&m, &m).unwrap(), MaskScores { miou: 1.0, iou_fg: 1.0, iou_bg: 1.0 });
    }

    #[test]
    fn two_by_two_fixture() {
        let gt = mask(2, 2, &[1, 1, 0, 0]);
        let pred = mask(2, 2, &[1, 0, 0, 0]);
        assert_eq!(iou_per_class(&pred, &gt, 1).unwrap(), 0.5);
        assert_eq!(iou_per_class(&pred, &gt, 0).unwrap(), 2.0 / 3.0);
        assert_eq!(miou(&pred, &gt).unwrap(), 7.0 / 12.0);
    }

    #[test]
    fn absent_class_scores_one() {
        let empty = mask(2, 2, &[0; 4]);
        assert_eq!(iou_per_class(&empty, &empty, 1).unwrap(), 1.0);
    }

    #[test]
    fn complement_of_half_split_scores_zero() {
        let gt = mask(2, 2, &[1, 1, 0, 0]);
        assert_eq!(miou(&gt.complement(), &gt).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = mask(2, 2, &[0; 4]);
        let b = mask(4, 1, &[0; 4]);
        assert!(matches!(miou(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dataset_aggregate_and_failures() {
        let gt = mask(2, 2, &[1, 1, 0, 0]);
        let pairs = vec![
            EvalPair { name: "a".into(), pred: gt.clone(), gt: gt.clone() },
            EvalPair { name: "b".into(), pred: mask(2, 2, &[1, 0, 0, 0]), gt: gt.clone() },
            EvalPair { name: "c".into(), pred: mask(1, 4, &[0; 4]), gt: gt.clone() },
        ];
        let report = evaluate_dataset(&pairs, serde_json::json!({"k": 2})).unwrap();
        assert_eq!(report.images.len(), 2);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].name, "c");
        let expected = (1.0 + 7.0 / 12.0) / 2.0;
        assert!((report.aggregate_miou.unwrap() - expected).abs() < 1e-12);

        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        for key in ["config", "images", "aggregate_miou", "failures"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        for key in ["name", "miou", "iou_fg", "iou_bg"] {
            assert!(json["images"][0].get(key).is_some(), "missing images[].{key}");
        }
    }

    #[test]
    fn aggregate_is_unweighted_mean() {
        let mut report = EvalReport::new(serde_json::Value::Null);
        for (name, v) in [("x", 0.4), ("y", 0.6)] {
            report.push_score(ImageScore { name: name.into(), miou: v, iou_fg: v, iou_bg: v });
        }
        assert!((report.aggregate_miou.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(evaluate_dataset(&[], serde_json::Value::Null), Err(Error::EmptyDataset(_))));
    }
}
