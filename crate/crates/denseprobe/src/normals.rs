//! Normal-map codec, axis-convention calibration, and angular-error metrics.
//!
//! Generated normal maps and dataset annotations may disagree on which RGB
//! channel carries which axis and on sign directions. Instead of hardcoding a
//! mapping per model and dataset, [`calibrate_convention`] enumerates the full
//! group of 48 signed axis permutations on a small calibration subset and
//! picks the one with the lowest mean angular error.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{NormalField, RasterImage};

/// Decoded vectors with norm below this are treated as invalid pixels rather
/// than snapped to a default direction, which would bias the accuracy
/// thresholds upward on flat gray regions.
pub const DEGENERATE_NORM: f64 = 1e-6;

/// The six axis permutations, in lexicographic order.
const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// One of the 48 signed axis permutations (6 permutations × 8 sign flips).
///
/// Applying a convention permutes the components and then multiplies by the
/// signs: `out[axis] = signs[axis] * v[perm[axis]]`. Every convention is an
/// orthogonal transform, so vector norms are preserved exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AxisConvention {
    perm: [usize; 3],
    signs: [i8; 3],
}

impl AxisConvention {
    pub const COUNT: usize = 48;

    /// Convention at enumeration position `index` (permutation index times 8
    /// plus sign index). This order is the documented tie-break order.
    pub fn from_index(index: usize) -> Self {
        assert!(index < Self::COUNT, "convention index out of range");
        let perm = PERMS[index / 8];
        let bits = index % 8;
        let sign = |bit: usize| if bits & (4 >> bit) != 0 { -1 } else { 1 };
        Self {
            perm,
            signs: [sign(0), sign(1), sign(2)],
        }
    }

    pub fn index(&self) -> usize {
        let perm_idx = PERMS
            .iter()
            .position(|p| *p == self.perm)
            .expect("valid perm");
        let mut bits = 0;
        for (axis, &s) in self.signs.iter().enumerate() {
            if s < 0 {
                bits |= 4 >> axis;
            }
        }
        perm_idx * 8 + bits
    }

    pub fn identity() -> Self {
        Self::from_index(0)
    }

    pub fn new(perm: [usize; 3], signs: [i8; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for &p in &perm {
            if p > 2 || seen[p] {
                return Err(Error::Validation(format!("invalid permutation {perm:?}")));
            }
            seen[p] = true;
        }
        if signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::Validation(format!("invalid signs {signs:?}")));
        }
        Ok(Self { perm, signs })
    }

    /// All 48 conventions in enumeration order.
    pub fn all() -> impl Iterator<Item = Self> {
        (0..Self::COUNT).map(Self::from_index)
    }

    pub fn perm(&self) -> [usize; 3] {
        self.perm
    }

    pub fn signs(&self) -> [i8; 3] {
        self.signs
    }

    #[inline]
    pub fn apply_vec(&self, v: [f64; 3]) -> [f64; 3] {
        [
            self.signs[0] as f64 * v[self.perm[0]],
            self.signs[1] as f64 * v[self.perm[1]],
            self.signs[2] as f64 * v[self.perm[2]],
        ]
    }

    /// The inverse convention; always one of the 48 (group closure).
    pub fn inverse(&self) -> Self {
        let mut inv_perm = [0usize; 3];
        for (axis, &src) in self.perm.iter().enumerate() {
            inv_perm[src] = axis;
        }
        let signs = [
            self.signs[inv_perm[0]],
            self.signs[inv_perm[1]],
            self.signs[inv_perm[2]],
        ];
        Self {
            perm: inv_perm,
            signs,
        }
    }
}

/// Angular-error metrics over a pool of per-pixel errors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalMetrics {
    pub mean_deg: f64,
    pub median_deg: f64,
    /// Percentage of pixels with error strictly below 11.25 degrees.
    pub a11: f64,
    /// Percentage of pixels with error strictly below 22.5 degrees.
    pub a22: f64,
    /// Percentage of pixels with error strictly below 30 degrees.
    pub a30: f64,
}

/// Encodes unit normals as `RGB = (n + 1) / 2`; invalid pixels render as
/// mid-gray `(0.5, 0.5, 0.5)`, which decodes back to an invalid pixel.
pub fn encode_normals(field: &NormalField) -> RasterImage {
    let width = field.width();
    RasterImage::from_fn(width, field.height(), |x, y| {
        if field.is_valid(x, y) {
            let n = field.vector(x, y);
            [
                ((n[0] + 1.0) / 2.0).clamp(0.0, 1.0),
                ((n[1] + 1.0) / 2.0).clamp(0.0, 1.0),
                ((n[2] + 1.0) / 2.0).clamp(0.0, 1.0),
            ]
        } else {
            [0.5, 0.5, 0.5]
        }
    })
}

/// Inverse of [`encode_normals`]: `v = 2 * RGB - 1`, normalized to unit
/// length. Pixels whose decoded vector is shorter than [`DEGENERATE_NORM`]
/// are marked invalid.
pub fn decode_normals(img: &RasterImage) -> NormalField {
    NormalField::from_fn(img.width(), img.height(), |x, y| {
        let [r, g, b] = img.get(x, y);
        let v = [2.0 * r - 1.0, 2.0 * g - 1.0, 2.0 * b - 1.0];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm < DEGENERATE_NORM {
            None
        } else {
            Some([v[0] / norm, v[1] / norm, v[2] / norm])
        }
    })
}

/// Applies a signed axis permutation to every valid vector; validity is
/// unchanged and unit norm is preserved exactly.
pub fn apply_convention(field: &NormalField, conv: AxisConvention) -> NormalField {
    let vectors = field.vectors().iter().map(|&v| conv.apply_vec(v)).collect();
    NormalField::new(
        field.width(),
        field.height(),
        vectors,
        field.valid().to_vec(),
    )
    .expect("orthogonal transform preserves unit norm")
}

#[inline]
fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    dot.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Per-pixel angular error in degrees over jointly valid pixels, in
/// row-major order.
pub fn angular_error(pred: &NormalField, gt: &NormalField) -> Result<Vec<f64>> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::DimensionMismatch {
            a_width: pred.width(),
            a_height: pred.height(),
            b_width: gt.width(),
            b_height: gt.height(),
        });
    }
    let mut errors = Vec::new();
    for i in 0..pred.vectors().len() {
        if pred.valid()[i] && gt.valid()[i] {
            errors.push(angle_deg(pred.vectors()[i], gt.vectors()[i]));
        }
    }
    Ok(errors)
}

/// Evaluates every one of the 48 conventions on the calibration samples and
/// returns the winner together with the full per-convention error table.
///
/// The error for a convention is the mean angular error pooled over all
/// jointly valid pixels of all samples. Ties break toward the lower
/// enumeration index (permutation index, then sign index).
pub fn calibrate_convention(
    samples: &[(NormalField, NormalField)],
) -> Result<(AxisConvention, [f64; AxisConvention::COUNT])> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("calibration samples"));
    }
    for (pred, gt) in samples {
        if pred.width() != gt.width() || pred.height() != gt.height() {
            return Err(Error::DimensionMismatch {
                a_width: pred.width(),
                a_height: pred.height(),
                b_width: gt.width(),
                b_height: gt.height(),
            });
        }
    }
    let table: Vec<f64> = (0..AxisConvention::COUNT)
        .into_par_iter()
        .map(|index| {
            let conv = AxisConvention::from_index(index);
            let mut sum = 0.0;
            let mut count = 0usize;
            for (pred, gt) in samples {
                for i in 0..pred.vectors().len() {
                    if pred.valid()[i] && gt.valid()[i] {
                        sum += angle_deg(conv.apply_vec(pred.vectors()[i]), gt.vectors()[i]);
                        count += 1;
                    }
                }
            }
            if count == 0 {
                f64::NAN
            } else {
                sum / count as f64
            }
        })
        .collect();
    if table[0].is_nan() {
        return Err(Error::NoValidPixels);
    }
    let mut best = 0;
    for (i, &err) in table.iter().enumerate() {
        if err < table[best] {
            best = i;
        }
    }
    let mut out = [0.0; AxisConvention::COUNT];
    out.copy_from_slice(&table);
    Ok((AxisConvention::from_index(best), out))
}

/// Mean, median, and sub-threshold percentages of pooled per-pixel errors.
/// The thresholds are strict (`< 11.25`, `< 22.5`, `< 30` degrees); an even
/// count takes the average of the two middle order statistics for the median.
pub fn normal_metrics(errors: &[f64]) -> Result<NormalMetrics> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("angular errors"));
    }
    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let mut sorted = errors.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN angular errors"));
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let below = |t: f64| 100.0 * errors.iter().filter(|e| **e < t).count() as f64 / n as f64;
    Ok(NormalMetrics {
        mean_deg: mean,
        median_deg: median,
        a11: below(11.25),
        a22: below(22.5),
        a30: below(30.0),
    })
}
