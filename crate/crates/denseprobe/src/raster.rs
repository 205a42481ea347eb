//! Raster and field types shared by every codec and metric.
//!
//! All rasters are row-major with the origin at the top-left pixel. Values are
//! immutable after construction, so every type here is safe to share across
//! worker threads without locking.

use crate::error::{Error, Result};

/// W×H RGB raster with channel values in `[0, 1]`.
///
/// This is the universal interchange format: generated model outputs are
/// loaded into it, and every codec renders ground truth back into it.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<[f64; 3]>,
}

impl RasterImage {
    /// Builds an image from row-major `(r, g, b)` triples, validating the
    /// pixel count and the `[0, 1]` channel range.
    pub fn new(width: u32, height: u32, pixels: Vec<[f64; 3]>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: pixels.len(),
            });
        }
        for (index, px) in pixels.iter().enumerate() {
            for &value in px {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::ChannelRange { value, index });
                }
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                debug_assert!(px.iter().all(|c| (0.0..=1.0).contains(c)));
                pixels.push(px);
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    /// Decodes a packed 8-bit RGB buffer; each channel becomes `byte / 255`.
    pub fn from_bytes(raw: &[u8], width: u32, height: u32) -> Result<Self> {
        let expected = 3 * width as usize * height as usize;
        if raw.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: raw.len(),
            });
        }
        let pixels = raw
            .chunks_exact(3)
            .map(|c| {
                [
                    c[0] as f64 / 255.0,
                    c[1] as f64 / 255.0,
                    c[2] as f64 / 255.0,
                ]
            })
            .collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Quantizes back to packed 8-bit RGB. Inverse of [`RasterImage::from_bytes`]
    /// on 8-bit data: the round trip is bit-exact.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() * 3);
        for px in &self.pixels {
            for &c in px {
                out.push((c * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [f64; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn same_size(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// W×H scalar map (depth or luminance) with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: u32,
    height: u32,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl ScalarField {
    pub fn new(width: u32, height: u32, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if values.len() != expected || valid.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: values.len().max(valid.len()),
            });
        }
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    /// Field where every pixel is valid.
    pub fn all_valid(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::new(width, height, values, valid)
    }

    /// Builds a field by evaluating `f(x, y)`; `None` marks the pixel invalid.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Option<f64>) -> Self {
        let n = width as usize * height as usize;
        let mut values = Vec::with_capacity(n);
        let mut valid = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                match f(x, y) {
                    Some(v) => {
                        values.push(v);
                        valid.push(true);
                    }
                    None => {
                        values.push(0.0);
                        valid.push(false);
                    }
                }
            }
        }
        Self {
            width,
            height,
            values,
            valid,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn value(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.valid[y as usize * self.width as usize + x as usize]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Iterates `(value, valid)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, bool)> + '_ {
        self.values.iter().copied().zip(self.valid.iter().copied())
    }

    /// Returns a copy with the validity mask restricted by `keep(x, y, value)`.
    pub fn restrict(&self, mut keep: impl FnMut(u32, u32, f64) -> bool) -> ScalarField {
        let mut valid = self.valid.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let i = y as usize * self.width as usize + x as usize;
                if valid[i] && !keep(x, y, self.values[i]) {
                    valid[i] = false;
                }
            }
        }
        ScalarField {
            width: self.width,
            height: self.height,
            values: self.values.clone(),
            valid,
        }
    }
}

/// Largest tolerated deviation from unit length for a valid normal vector.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// W×H field of unit 3-vectors with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    width: u32,
    height: u32,
    vectors: Vec<[f64; 3]>,
    valid: Vec<bool>,
}

impl NormalField {
    /// Validates that every valid vector is unit length within
    /// [`UNIT_NORM_TOLERANCE`].
    pub fn new(width: u32, height: u32, vectors: Vec<[f64; 3]>, valid: Vec<bool>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if vectors.len() != expected || valid.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: vectors.len().max(valid.len()),
            });
        }
        for (index, (v, ok)) in vectors.iter().zip(&valid).enumerate() {
            if *ok {
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                    return Err(Error::NonUnitNormal { norm, index });
                }
            }
        }
        Ok(Self {
            width,
            height,
            vectors,
            valid,
        })
    }

    /// Builds a field by evaluating `f(x, y)`; `None` marks the pixel invalid.
    /// Vectors are normalized here, so `f` may return any non-degenerate vector.
    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> Option<[f64; 3]>,
    ) -> Self {
        let n = width as usize * height as usize;
        let mut vectors = Vec::with_capacity(n);
        let mut valid = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                match f(x, y) {
                    Some(v) => {
                        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                        debug_assert!(norm > 0.0);
                        vectors.push([v[0] / norm, v[1] / norm, v[2] / norm]);
                        valid.push(true);
                    }
                    None => {
                        vectors.push([0.0, 0.0, 0.0]);
                        valid.push(false);
                    }
                }
            }
        }
        Self {
            width,
            height,
            vectors,
            valid,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn vectors(&self) -> &[[f64; 3]] {
        &self.vectors
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn vector(&self, x: u32, y: u32) -> [f64; 3] {
        self.vectors[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.valid[y as usize * self.width as usize + x as usize]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Pairs of `(a_i, b_i)` over jointly valid pixels, in row-major order.
pub fn masked_pairs(a: &ScalarField, b: &ScalarField) -> Result<Vec<(f64, f64)>> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch {
            a_width: a.width,
            a_height: a.height,
            b_width: b.width,
            b_height: b.height,
        });
    }
    let pairs = a
        .iter()
        .zip(b.iter())
        .filter(|((_, av), (_, bv))| *av && *bv)
        .map(|((a, _), (b, _))| (a, b))
        .collect();
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_bytes_endpoints() {
        let img = RasterImage::from_bytes(&[255, 0, 128], 1, 1).unwrap();
        let [r, g, b] = img.get(0, 0);
        assert_eq!(r, 1.0);
        assert_eq!(g, 0.0);
        assert_eq!(b, 128.0 / 255.0);
        assert!((b - 0.50196).abs() < 1e-5);
    }

    #[test]
    fn from_bytes_size_mismatch() {
        let err = RasterImage::from_bytes(&[0, 0, 0, 0], 1, 1).unwrap_err();
        match err {
            Error::SizeMismatch { expected, actual } => {
                assert_eq!(expected, 3);
                assert_eq!(actual, 4);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn byte_round_trip_is_identity() {
        let raw: Vec<u8> = (0u16..=255).map(|v| v as u8).cycle().take(3 * 64).collect();
        let img = RasterImage::from_bytes(&raw, 8, 8).unwrap();
        assert_eq!(img.to_bytes(), raw);
    }

    #[test]
    fn masked_pairs_all_valid() {
        let a = ScalarField::all_valid(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = ScalarField::all_valid(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let pairs = masked_pairs(&a, &b).unwrap();
        assert_eq!(pairs, vec![(1.0, 5.0), (2.0, 6.0), (3.0, 7.0), (4.0, 8.0)]);
    }

    #[test]
    fn masked_pairs_disjoint() {
        let a = ScalarField::new(2, 1, vec![1.0, 2.0], vec![true, false]).unwrap();
        let b = ScalarField::new(2, 1, vec![3.0, 4.0], vec![false, true]).unwrap();
        assert!(masked_pairs(&a, &b).unwrap().is_empty());
    }

    #[test]
    fn masked_pairs_left_column_top_row() {
        // a valid on the left column, b valid on the top row: only the
        // top-left pixel is jointly valid.
        let a = ScalarField::new(
            2,
            2,
            vec![1.0, 2.0, 3.0, 4.0],
            vec![true, false, true, false],
        )
        .unwrap();
        let b = ScalarField::new(
            2,
            2,
            vec![5.0, 6.0, 7.0, 8.0],
            vec![true, true, false, false],
        )
        .unwrap();
        let pairs = masked_pairs(&a, &b).unwrap();
        assert_eq!(pairs, vec![(1.0, 5.0)]);
    }

    #[test]
    fn masked_pairs_symmetric_count() {
        let a = ScalarField::new(3, 1, vec![1.0; 3], vec![true, false, true]).unwrap();
        let b = ScalarField::new(3, 1, vec![2.0; 3], vec![true, true, false]).unwrap();
        assert_eq!(
            masked_pairs(&a, &b).unwrap().len(),
            masked_pairs(&b, &a).unwrap().len()
        );
    }

    #[test]
    fn masked_pairs_dimension_mismatch() {
        let a = ScalarField::all_valid(2, 1, vec![0.0; 2]).unwrap();
        let b = ScalarField::all_valid(1, 2, vec![0.0; 2]).unwrap();
        assert!(masked_pairs(&a, &b).is_err());
    }

    #[test]
    fn normal_field_rejects_non_unit() {
        let err = NormalField::new(1, 1, vec![[0.5, 0.0, 0.0]], vec![true]).unwrap_err();
        assert!(matches!(err, Error::NonUnitNormal { .. }));
        // Invalid pixels are exempt from the unit-norm check.
        assert!(NormalField::new(1, 1, vec![[0.5, 0.0, 0.0]], vec![false]).is_ok());
    }

    #[test]
    fn raster_rejects_out_of_range() {
        assert!(RasterImage::new(1, 1, vec![[1.1, 0.0, 0.0]]).is_err());
        assert!(RasterImage::new(1, 1, vec![[-0.1, 0.0, 0.0]]).is_err());
    }
}
