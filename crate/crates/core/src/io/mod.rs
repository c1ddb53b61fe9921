//! Files: the binary patch-feature format, 8-bit mask images and the
//! `root/{images,masks,features}` dataset layout.

mod dataset;
mod features;
mod mask;

pub use dataset::{scan_dataset, DatasetItem, DatasetScan, SkippedItem, FEATURE_EXTENSION};
pub use features::{
    decode_features, encode_features, read_features, write_features, FeatureFileHeader, FORMAT_VERSION,
    HEADER_LEN, MAGIC,
};
pub use mask::{read_mask, read_mask_with_max, read_rgb, write_mask, GT_THRESHOLD};
