//! PNG and JPEG adapters between disk files and in-memory rasters.
//!
//! Ground-truth formats are deliberately strict: depth must be 16-bit
//! grayscale and labels 8-bit grayscale, so an accidentally re-encoded file
//! fails loudly instead of silently rescaling values.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::label::LabelMap;
use crate::raster::{RasterImage, ScalarField};

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image {
        path: path.display().to_string(),
        source,
    })
}

/// Loads any supported image (PNG or JPEG, any channel layout) as RGB.
pub fn load_image(path: &Path) -> Result<RasterImage> {
    let rgb = open(path)?.to_rgb8();
    RasterImage::from_bytes(rgb.as_raw(), rgb.width(), rgb.height())
}

/// Saves as an 8-bit RGB image; the format follows the file extension.
pub fn save_image(img: &RasterImage, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width(), img.height(), img.to_bytes())
            .expect("buffer length matches dimensions");
    buf.save(path).map_err(|source| Error::Image {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a 16-bit grayscale PNG holding depth in millimeters; zero marks
/// invalid pixels. Values convert to meters.
pub fn load_depth16(path: &Path) -> Result<ScalarField> {
    let img = open(path)?;
    let buf = match img {
        DynamicImage::ImageLuma16(buf) => buf,
        other => {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("expected 16-bit grayscale depth, found {:?}", other.color()),
            })
        }
    };
    let (w, h) = (buf.width(), buf.height());
    let mut values = Vec::with_capacity((w * h) as usize);
    let mut valid = Vec::with_capacity((w * h) as usize);
    for &mm in buf.as_raw() {
        values.push(mm as f64 / 1000.0);
        valid.push(mm != 0);
    }
    ScalarField::new(w, h, values, valid)
}

/// Saves depth in meters as a 16-bit grayscale PNG in millimeters. Invalid
/// pixels store zero; valid depths round to the nearest millimeter and clamp
/// to `[1, 65535]` so a valid pixel can never collide with the invalid code.
pub fn save_depth16(field: &ScalarField, path: &Path) -> Result<()> {
    let mut raw = Vec::with_capacity(field.values().len());
    for (value, valid) in field.iter() {
        if valid {
            let mm = (value * 1000.0).round().clamp(1.0, 65535.0) as u16;
            raw.push(mm);
        } else {
            raw.push(0);
        }
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(field.width(), field.height(), raw)
            .expect("buffer length matches dimensions");
    buf.save(path).map_err(|source| Error::Image {
        path: path.display().to_string(),
        source,
    })
}

/// Loads an 8-bit grayscale PNG of class labels (255 = ignore).
pub fn load_labels(path: &Path) -> Result<LabelMap> {
    let img = open(path)?;
    let buf = match img {
        DynamicImage::ImageLuma8(buf) => buf,
        other => {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("expected 8-bit grayscale labels, found {:?}", other.color()),
            })
        }
    };
    LabelMap::new(buf.width(), buf.height(), buf.into_raw())
}

/// Saves class labels as an 8-bit grayscale PNG.
pub fn save_labels(map: &LabelMap, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(map.width(), map.height(), map.labels().to_vec())
            .expect("buffer length matches dimensions");
    buf.save(path).map_err(|source| Error::Image {
        path: path.display().to_string(),
        source,
    })
}
