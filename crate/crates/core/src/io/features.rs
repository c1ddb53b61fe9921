//! Feature file layout (all integers unsigned 32-bit little-endian):
//!
//! ```text
//! offset  field
//!      0  magic "UNSG"
//!      4  version = 1
//!      8  grid_h
//!     12  grid_w
//!     16  dim
//!     20  source_image_w
//!     24  source_image_h
//!     28  patch_size
//!     32  grid_h * grid_w * dim f32 LE values, patch raster order
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::PatchFeatureGrid;
use crate::nn::DenseMatrix;

pub const MAGIC: [u8; 4] = *b"UNSG";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureFileHeader {
    pub grid_h: u32,
    pub grid_w: u32,
    pub dim: u32,
    pub source_image_w: u32,
    pub source_image_h: u32,
    pub patch_size: u32,
}

impl FeatureFileHeader {
    pub fn of(f: &PatchFeatureGrid) -> Self {
        Self {
            grid_h: f.grid_h() as u32,
            grid_w: f.grid_w() as u32,
            dim: f.dim() as u32,
            source_image_w: f.source_image_w,
            source_image_h: f.source_image_h,
            patch_size: f.patch_size,
        }
    }

    pub fn payload_len(&self) -> Option<usize> {
        (self.grid_h as usize)
            .checked_mul(self.grid_w as usize)?
            .checked_mul(self.dim as usize)?
            .checked_mul(4)
    }

    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&MAGIC);
        let fields = [
            FORMAT_VERSION,
            self.grid_h,
            self.grid_w,
            self.dim,
            self.source_image_w,
            self.source_image_h,
            self.patch_size,
        ];
        for (i, v) in fields.iter().enumerate() {
            out[4 + 4 * i..8 + 4 * i].copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::BadHeader {
                offset: bytes.len(),
                reason: format!("file is {} bytes, shorter than the magic", bytes.len()),
            });
        }
        if bytes[..4] != MAGIC {
            return Err(Error::BadMagic {
                offset: 0,
                found: bytes[..4].try_into().expect("4 bytes"),
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::BadHeader {
                offset: bytes.len(),
                reason: format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len()),
            });
        }
        let word = |offset: usize| u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != FORMAT_VERSION {
            return Err(Error::BadVersion { offset: 4, found: version });
        }
        let header = Self {
            grid_h: word(8),
            grid_w: word(12),
            dim: word(16),
            source_image_w: word(20),
            source_image_h: word(24),
            patch_size: word(28),
        };
        for (offset, name, value) in [(8, "grid_h", header.grid_h), (12, "grid_w", header.grid_w), (16, "dim", header.dim)] {
            if value == 0 {
                return Err(Error::BadHeader {
                    offset,
                    reason: format!("{name} is zero"),
                });
            }
        }
        if header.payload_len().is_none() {
            return Err(Error::BadHeader {
                offset: 8,
                reason: "payload size overflows".into(),
            });
        }
        Ok(header)
    }
}

/// Serializes `f`; values are narrowed to f32 with round-to-nearest.
pub fn encode_features(f: &PatchFeatureGrid) -> Vec<u8> {
    let header = FeatureFileHeader::of(f);
    let mut out = Vec::with_capacity(HEADER_LEN + f.data().as_slice().len() * 4);
    out.extend_from_slice(&header.to_bytes());
    for &v in f.data().as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<PatchFeatureGrid> {
    let header = FeatureFileHeader::parse(bytes)?;
    let expected = header.payload_len().expect("checked in parse");
    let actual = bytes.len() - HEADER_LEN;
    if actual < expected {
        return Err(Error::TruncatedPayload {
            offset: HEADER_LEN,
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(Error::TrailingData {
            offset: HEADER_LEN + expected,
            extra: actual - expected,
        });
    }
    let mut values = Vec::with_capacity(expected / 4);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(Error::NonFinitePayload {
                offset: HEADER_LEN + 4 * i,
            });
        }
        values.push(f64::from(v));
    }
    let (h, w, d) = (header.grid_h as usize, header.grid_w as usize, header.dim as usize);
    let data = DenseMatrix::from_vec(h * w, d, values)?;
    PatchFeatureGrid::new(h, w, data, header.source_image_w, header.source_image_h, header.patch_size)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<PatchFeatureGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes)
}

pub fn write_features(f: &PatchFeatureGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_features(f)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1x1x2() -> PatchFeatureGrid {
        let data = DenseMatrix::from_vec(1, 2, vec![1.0, -2.5]).unwrap();
        PatchFeatureGrid::new(1, 1, data, 8, 8, 8).unwrap()
    }

    #[test]
    fn round_trip_preserves_f32_payload() {
        let data = DenseMatrix::from_fn(6, 3, |r, c| (r as f64 * 0.37 - c as f64 * 1.1).sin());
        let f = PatchFeatureGrid::new(2, 3, data, 16, 24, 8).unwrap();
        let back = decode_features(&encode_features(&f)).unwrap();
        assert_eq!(FeatureFileHeader::of(&back), FeatureFileHeader::of(&f));
        for (a, b) in f.data().as_slice().iter().zip(back.data().as_slice()) {
            assert_eq!((*a as f32).to_bits(), (*b as f32).to_bits());
        }
        // second trip is exact at f64 level
        assert_eq!(decode_features(&encode_features(&back)).unwrap(), back);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = encode_features(&grid_1x1x2());
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            decode_features(&bytes),
            Err(Error::BadMagic { offset: 0, found }) if &found == b"XXXX"
        ));
    }

    #[test]
    fn rejects_bad_version() {
        let mut bytes = encode_features(&grid_1x1x2());
        bytes[4] = 2;
        assert!(matches!(decode_features(&bytes), Err(Error::BadVersion { offset: 4, found: 2 })));
    }

    #[test]
    fn reports_truncation_sizes() {
        let mut bytes = encode_features(&grid_1x1x2());
        bytes.truncate(bytes.len() - 4);
        match decode_features(&bytes) {
            Err(Error::TruncatedPayload { offset, expected, actual }) => {
                assert_eq!((offset, expected, actual), (32, 8, 4));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_trailing_bytes_and_short_headers() {
        let mut bytes = encode_features(&grid_1x1x2());
        bytes.push(0);
        assert!(matches!(decode_features(&bytes), Err(Error::TrailingData { offset: 40, extra: 1 })));
        assert!(matches!(decode_features(b"UNSG\x01\x00"), Err(Error::BadHeader { offset: 6, .. })));
        assert!(matches!(decode_features(b"UN"), Err(Error::BadHeader { .. })));
    }

    #[test]
    fn rejects_zero_dimension() {
        let mut bytes = encode_features(&grid_1x1x2());
        bytes[16..20].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_features(&bytes), Err(Error::BadHeader { offset: 16, .. })));
    }

    #[test]
    fn rejects_non_finite_payload() {
        let mut bytes = encode_features(&grid_1x1x2());
        bytes[36..40].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_features(&bytes), Err(Error::NonFinitePayload { offset: 36 })));
        bytes[36..40].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(decode_features(&bytes), Err(Error::NonFinitePayload { offset: 36 })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.unsg");
        write_features(&grid_1x1x2(), &path).unwrap();
        assert_eq!(read_features(&path).unwrap(), grid_1x1x2());
        assert!(matches!(read_features(dir.path().join("missing")), Err(Error::Io { .. })));
    }

    #[test]
    fn golden_bytes() {
        let expected: Vec<u8> = [
            &b"UNSG"[..],
            &[1, 0, 0, 0],
            &[1, 0, 0, 0],
            &[1, 0, 0, 0],
            &[2, 0, 0, 0],
            &[8, 0, 0, 0],
            &[8, 0, 0, 0],
            &[8, 0, 0, 0],
            &[0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x20, 0xC0],
        ]
        .concat();
        assert_eq!(encode_features(&grid_1x1x2()), expected);
    }

    #[test]
    fn every_magic_and_version_byte_corruption_is_rejected() {
        let good = encode_features(&grid_1x1x2());
        for pos in 0..8 {
            for value in 0..=255u8 {
                if value == good[pos] {
                    continue;
                }
                let mut bad = good.clone();
                bad[pos] = value;
                match decode_features(&bad) {
                    Err(Error::BadMagic { offset: 0, .. }) if pos < 4 => {}
                    Err(Error::BadVersion { offset: 4, .. }) if pos >= 4 => {}
                    other => panic!("byte {pos} = {value:#04x}: {other:?}"),
                }
            }
        }
    }
}
