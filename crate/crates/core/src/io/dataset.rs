use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::mask::{read_mask_with_max, GT_THRESHOLD};

pub const FEATURE_EXTENSION: &str = "unsg";
const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "pgm", "ppm"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetItem {
    pub stem: String,
    pub image: PathBuf,
    pub gt_mask: PathBuf,
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedItem {
    pub stem: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetScan {
    /// Sorted by stem.
    pub items: Vec<DatasetItem>,
    pub skipped: Vec<SkippedItem>,
    pub warnings: Vec<String>,
}

fn files_by_stem(dir: &Path, extensions: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| extensions.contains(&e.as_str())) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            // first one in lexicographic path order wins for duplicate stems
            out.entry(stem.to_owned()).or_insert(path);
        }
    }
    Ok(out)
}

/// Pairs `root/images/<stem>.*` with `root/masks/<stem>.*` and, if present,
/// `root/features/<stem>.unsg`. Images without a mask are skipped and reported.
/// Masks whose maximum value is at most 127 produce a warning, since they
/// would binarize to all background.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetScan> {
    let root = root.as_ref();
    let images = files_by_stem(&root.join("images"), IMAGE_EXTENSIONS)?;
    let masks = files_by_stem(&root.join("masks"), &["png", "pgm"])?;
    let features_dir = root.join("features");
    let features = if features_dir.is_dir() {
        files_by_stem(&features_dir, &[FEATURE_EXTENSION])?
    } else {
        BTreeMap::new()
    };

    let mut scan = DatasetScan::default();
    for (stem, image) in images {
        let Some(gt_mask) = masks.get(&stem) else {
            log::warn!("{stem}: no ground-truth mask, skipping");
            scan.skipped.push(SkippedItem {
                stem,
                reason: "no ground-truth mask".into(),
            });
            continue;
        };
        if let Ok((_, max)) = read_mask_with_max(gt_mask) {
            if max <= GT_THRESHOLD {
                let msg = format!(
                    "{stem}: mask maximum is {max}; masks must use 0/255, values <= {GT_THRESHOLD} read as background"
                );
                log::warn!("{msg}");
                scan.warnings.push(msg);
            }
        }
        scan.items.push(DatasetItem {
            features: features.get(&stem).cloned(),
            gt_mask: gt_mask.clone(),
            image,
            stem,
        });
    }
    if scan.items.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use image::{GrayImage, Luma};

    use super::*;

    fn layout() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for sub in ["images", "masks"] {
            fs::create_dir(dir.path().join(sub)).unwrap();
        }
        dir
    }

    fn put_gray(path: &Path, value: u8) {
        GrayImage::from_pixel(2, 2, Luma([value])).save(path).unwrap();
    }

    #[test]
    fn pairs_and_skips() {
        let dir = layout();
        put_gray(&dir.path().join("images/a.png"), 10);
        put_gray(&dir.path().join("images/b.png"), 10);
        put_gray(&dir.path().join("masks/a.png"), 255);
        let scan = scan_dataset(dir.path()).unwrap();
        assert_eq!(scan.items.len(), 1);
        assert_eq!(scan.items[0].stem, "a");
        assert_eq!(scan.items[0].features, None);
        assert_eq!(scan.skipped, vec![SkippedItem { stem: "b".into(), reason: "no ground-truth mask".into() }]);
        assert!(scan.warnings.is_empty());
    }

    #[test]
    fn empty_layout_is_an_error() {
        let dir = layout();
        assert!(matches!(scan_dataset(dir.path()), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn missing_directories_are_io_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(scan_dataset(dir.path()), Err(Error::Io { .. })));
    }

    #[test]
    fn warns_on_zero_one_masks_and_finds_features() {
        let dir = layout();
        fs::create_dir(dir.path().join("features")).unwrap();
        put_gray(&dir.path().join("images/x.png"), 0);
        put_gray(&dir.path().join("masks/x.png"), 1);
        fs::write(dir.path().join("features/x.unsg"), b"").unwrap();
        let scan = scan_dataset(dir.path()).unwrap();
        assert_eq!(scan.warnings.len(), 1);
        assert_eq!(scan.items[0].features, Some(dir.path().join("features/x.unsg")));
    }
}
