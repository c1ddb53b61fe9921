//! Per-image IoU and a dataset report from in-memory masks.

use patchseg::eval::{evaluate_dataset, EvalPair};
use patchseg::SegmentationMask;

fn main() -> patchseg::Result<()> {
    let gt = SegmentationMask::from_fn(32, 32, |x, y| (8..24).contains(&x) && (8..24).contains(&y));
    let shifted = SegmentationMask::from_fn(32, 32, |x, y| (10..26).contains(&x) && (8..24).contains(&y));
    let pairs = vec![
        EvalPair { name: "exact".into(), pred: gt.clone(), gt: gt.clone() },
        EvalPair { name: "shifted".into(), pred: shifted, gt: gt.clone() },
        EvalPair { name: "inverted".into(), pred: gt.complement(), gt: gt.clone() },
        EvalPair { name: "wrong-size".into(), pred: SegmentationMask::filled(16, 16, 0), gt },
    ];
    let report = evaluate_dataset(&pairs, serde_json::json!({ "source": "example" }))?;
    println!("{}", report.to_json()?);
    Ok(())
}
