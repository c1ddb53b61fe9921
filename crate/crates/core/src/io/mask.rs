use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, ImageReader, RgbImage};

use crate::error::{Error, Result};
use crate::pipeline::SegmentationMask;

/// Ground-truth pixels strictly above this value are foreground.
pub const GT_THRESHOLD: u8 = 127;

fn open_image(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format().is_none() {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "unrecognized image format".into(),
        });
    }
    reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: u.to_string(),
        },
        image::ImageError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::CorruptImage {
            path: path.to_path_buf(),
            reason: format!("truncated: {io}"),
        },
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::CorruptImage {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

/// Reads an 8-bit grayscale mask and binarizes it (`> 127` is foreground).
/// Also returns the largest raw pixel value.
pub fn read_mask_with_max(path: impl AsRef<Path>) -> Result<(SegmentationMask, u8)> {
    let path = path.as_ref();
    let gray = match open_image(path)? {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!(
                    "mask must be 8-bit single-channel grayscale, found {:?}; convert it to grayscale first",
                    other.color()
                ),
            })
        }
    };
    let max = gray.as_raw().iter().copied().max().unwrap_or(0);
    let pixels = gray.as_raw().iter().map(|&p| u8::from(p > GT_THRESHOLD)).collect();
    let mask = SegmentationMask::new(gray.width() as usize, gray.height() as usize, pixels)?;
    Ok((mask, max))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<SegmentationMask> {
    read_mask_with_max(path).map(|(m, _)| m)
}

/// Writes foreground as 255 and background as 0. The format follows the
/// extension: `.png` or `.pgm`.
pub fn write_mask(mask: &SegmentationMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => ImageFormat::Png,
        Some("pgm") => ImageFormat::Pnm,
        _ => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: "masks are written as .png or .pgm".into(),
            })
        }
    };
    let raw = mask.pixels().iter().map(|&p| p * 255).collect();
    let img = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw).expect("sized buffer");
    if format == ImageFormat::Pnm {
        let mut buf = Vec::new();
        let encoder = image::codecs::pnm::PnmEncoder::new(&mut buf)
            .with_subtype(image::codecs::pnm::PnmSubtype::Graymap(image::codecs::pnm::SampleEncoding::Binary));
        img.write_with_encoder(encoder).map_err(|e| Error::CorruptImage {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        return std::fs::write(path, buf).map_err(|e| Error::io(path, e));
    }
    img.save_with_format(path, format).map_err(|e| match e {
        image::ImageError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::CorruptImage {
            path: path.to_path_buf(),
            reason: format!("truncated: {io}"),
        },
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::CorruptImage {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

/// Reads any supported image as 8-bit RGB.
pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    Ok(open_image(path.as_ref())?.to_rgb8())
}
