//! Image resampling kernels: bilinear for continuous maps (depth, normals)
//! and nearest-neighbor for label-like outputs (segmentation masks).
//!
//! Both kernels use the pixel-center ("half-pixel") coordinate convention:
//! output pixel `i` samples source coordinate `(i + 0.5) * src / dst - 0.5`,
//! clamped to the image borders. Both are fully deterministic.

use crate::error::{Error, Result};
use crate::raster::RasterImage;

fn check_target(out_width: u32, out_height: u32) -> Result<()> {
    if out_width == 0 || out_height == 0 {
        return Err(Error::ZeroSizedTarget {
            out_width,
            out_height,
        });
    }
    Ok(())
}

/// Per-channel bilinear interpolation with clamp-to-edge border handling.
/// Output channels stay within the source min/max, hence within `[0, 1]`.
pub fn resize_bilinear(img: &RasterImage, out_width: u32, out_height: u32) -> Result<RasterImage> {
    check_target(out_width, out_height)?;
    if out_width == img.width() && out_height == img.height() {
        return Ok(img.clone());
    }
    let src_w = img.width() as usize;
    let src_h = img.height() as usize;
    let x_scale = img.width() as f64 / out_width as f64;
    let y_scale = img.height() as f64 / out_height as f64;

    let mut pixels = Vec::with_capacity(out_width as usize * out_height as usize);
    for oy in 0..out_height {
        let sy = ((oy as f64 + 0.5) * y_scale - 0.5).clamp(0.0, (src_h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_width {
            let sx = ((ox as f64 + 0.5) * x_scale - 0.5).clamp(0.0, (src_w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = sx - x0 as f64;

            let p00 = img.get(x0 as u32, y0 as u32);
            let p10 = img.get(x1 as u32, y0 as u32);
            let p01 = img.get(x0 as u32, y1 as u32);
            let p11 = img.get(x1 as u32, y1 as u32);
            let mut px = [0.0f64; 3];
            for c in 0..3 {
                let top = p00[c] * (1.0 - fx) + p10[c] * fx;
                let bottom = p01[c] * (1.0 - fx) + p11[c] * fx;
                px[c] = top * (1.0 - fy) + bottom * fy;
            }
            pixels.push(px);
        }
    }
    RasterImage::new(out_width, out_height, pixels)
}

/// Nearest-neighbor resampling: every output pixel is an exact copy of one
/// source pixel, so no new colors are introduced.
pub fn resize_nearest(img: &RasterImage, out_width: u32, out_height: u32) -> Result<RasterImage> {
    check_target(out_width, out_height)?;
    if out_width == img.width() && out_height == img.height() {
        return Ok(img.clone());
    }
    let src_w = img.width() as usize;
    let src_h = img.height() as usize;
    let x_scale = img.width() as f64 / out_width as f64;
    let y_scale = img.height() as f64 / out_height as f64;

    let mut pixels = Vec::with_capacity(out_width as usize * out_height as usize);
    for oy in 0..out_height {
        let sy = (((oy as f64 + 0.5) * y_scale).floor() as usize).min(src_h - 1);
        for ox in 0..out_width {
            let sx = (((ox as f64 + 0.5) * x_scale).floor() as usize).min(src_w - 1);
            pixels.push(img.get(sx as u32, sy as u32));
        }
    }
    RasterImage::new(out_width, out_height, pixels)
}
