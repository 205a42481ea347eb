//! Grayscale depth codec, per-image affine alignment, and depth metrics.
//!
//! Predictions decoded from generated images are relative: brighter means
//! nearer. The affine alignment fits `aligned = a * pred + b` against metric
//! ground truth by least squares before scoring, so only relative scene
//! geometry is evaluated. A negative `a` is expected and legal; it is what
//! turns a brightness-near encoding into increasing depth.

use crate::error::{Error, Result};
use crate::raster::{masked_pairs, RasterImage, ScalarField};

/// ITU-R BT.709 luminance weights.
const LUMA_R: f64 = 0.2126;
const LUMA_G: f64 = 0.7152;
const LUMA_B: f64 = 0.0722;

/// Ratio threshold for the delta-1 accuracy metric.
pub const DELTA1_THRESHOLD: f64 = 1.25;

/// Least-squares scale/offset fit of a prediction onto ground truth.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AffineFit {
    pub scale: f64,
    pub offset: f64,
    pub residual_rms: f64,
    pub n_pixels: usize,
}

impl AffineFit {
    pub fn apply(&self, pred: &ScalarField) -> ScalarField {
        let values = pred
            .values()
            .iter()
            .map(|&p| self.scale * p + self.offset)
            .collect();
        ScalarField::new(pred.width(), pred.height(), values, pred.valid().to_vec())
            .expect("same dimensions")
    }
}

/// Depth accuracy metrics over jointly valid pixels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DepthMetrics {
    /// Fraction of pixels with `max(pred/gt, gt/pred) < 1.25`.
    pub delta1: f64,
    /// Mean absolute relative error `|pred - gt| / gt`.
    pub absrel: f64,
    /// Root mean squared error, in ground-truth units (meters).
    pub rmse: f64,
}

/// Extracts perceived luminance with BT.709 weights; every pixel is valid and
/// values stay in `[0, 1]`.
pub fn decode_luminance(img: &RasterImage) -> ScalarField {
    let values = img
        .pixels()
        .iter()
        .map(|[r, g, b]| LUMA_R * r + LUMA_G * g + LUMA_B * b)
        .collect();
    ScalarField::all_valid(img.width(), img.height(), values).expect("same pixel count")
}

/// Renders depth as an achromatic image: nearest valid depth maps to
/// intensity 1, farthest to 0, invalid pixels to black. A constant depth
/// field renders the whole valid region at intensity 1.
pub fn encode_depth_gray(depth: &ScalarField) -> Result<RasterImage> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (i, (v, ok)) in depth.iter().enumerate() {
        if ok {
            if v <= 0.0 {
                return Err(Error::NonPositiveValue { value: v, index: i });
            }
            min = min.min(v);
            max = max.max(v);
        }
    }
    if !min.is_finite() {
        return Err(Error::NoValidPixels);
    }
    let range = max - min;
    let pixels = depth
        .iter()
        .map(|(v, ok)| {
            if !ok {
                return [0.0; 3];
            }
            let intensity = if range == 0.0 {
                1.0
            } else {
                1.0 - (v - min) / range
            };
            [intensity; 3]
        })
        .collect();
    RasterImage::new(depth.width(), depth.height(), pixels)
}

/// Fits `a, b` minimizing `sum (a * pred_i + b - gt_i)^2` over jointly valid
/// pixels via the closed-form normal equations, and returns the fit together
/// with the aligned prediction.
///
/// A constant prediction makes the slope undefined; that case returns
/// [`Error::DegenerateFit`] carrying the fallback `(a = 0, b = mean(gt))` so
/// callers can still score the sample (flagged) instead of dropping it.
pub fn affine_align(pred: &ScalarField, gt: &ScalarField) -> Result<(AffineFit, ScalarField)> {
    let pairs = masked_pairs(pred, gt)?;
    let n = pairs.len();
    if n < 2 {
        return Err(Error::TooFewPixels {
            required: 2,
            actual: n,
        });
    }
    let nf = n as f64;
    let mean_p = pairs.iter().map(|(p, _)| p).sum::<f64>() / nf;
    let mean_g = pairs.iter().map(|(_, g)| g).sum::<f64>() / nf;
    // Centered sums for numerical stability.
    let mut var_p = 0.0;
    let mut cov_pg = 0.0;
    for &(p, g) in &pairs {
        var_p += (p - mean_p) * (p - mean_p);
        cov_pg += (p - mean_p) * (g - mean_g);
    }
    // Exact constancy check: rounding noise in var_p must not disguise a
    // constant prediction as fittable.
    let constant = pairs.iter().all(|&(p, _)| p == pairs[0].0);
    if constant || var_p == 0.0 {
        let fallback = AffineFit {
            scale: 0.0,
            offset: mean_g,
            residual_rms: residual_rms(&pairs, 0.0, mean_g),
            n_pixels: n,
        };
        return Err(Error::DegenerateFit { fallback });
    }
    let scale = cov_pg / var_p;
    let offset = mean_g - scale * mean_p;
    let fit = AffineFit {
        scale,
        offset,
        residual_rms: residual_rms(&pairs, scale, offset),
        n_pixels: n,
    };
    Ok((fit, fit.apply(pred)))
}

fn residual_rms(pairs: &[(f64, f64)], scale: f64, offset: f64) -> f64 {
    let sse: f64 = pairs
        .iter()
        .map(|&(p, g)| {
            let r = scale * p + offset - g;
            r * r
        })
        .sum();
    (sse / pairs.len() as f64).sqrt()
}

/// Computes delta-1, AbsRel, and RMSE over jointly valid pixels.
///
/// Aligned values may be negative (alignment does not clamp); such pixels
/// count as delta-1 failures and enter AbsRel/RMSE as-is.
pub fn depth_metrics(aligned: &ScalarField, gt: &ScalarField) -> Result<DepthMetrics> {
    let pairs = masked_pairs(aligned, gt)?;
    if pairs.is_empty() {
        return Err(Error::NoValidPixels);
    }
    let mut hits = 0usize;
    let mut absrel_sum = 0.0;
    let mut sq_sum = 0.0;
    for (i, &(a, g)) in pairs.iter().enumerate() {
        if g <= 0.0 {
            return Err(Error::NonPositiveValue { value: g, index: i });
        }
        if a > 0.0 && (a / g).max(g / a) < DELTA1_THRESHOLD {
            hits += 1;
        }
        absrel_sum += (a - g).abs() / g;
        sq_sum += (a - g) * (a - g);
    }
    let n = pairs.len() as f64;
    Ok(DepthMetrics {
        delta1: hits as f64 / n,
        absrel: absrel_sum / n,
        rmse: (sq_sum / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(values: &[f64]) -> ScalarField {
        ScalarField::all_valid(values.len() as u32, 1, values.to_vec()).unwrap()
    }

    #[test]
    fn luminance_weights_on_pure_channels() {
        let img = RasterImage::new(
            3,
            1,
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        )
        .unwrap();
        let lum = decode_luminance(&img);
        assert!((lum.value(0, 0) - 0.2126).abs() < 1e-9);
        assert!((lum.value(1, 0) - 0.7152).abs() < 1e-9);
        assert!((lum.value(2, 0) - 0.0722).abs() < 1e-9);
    }

    #[test]
    fn luminance_of_gray_is_identity() {
        for g in [0.0, 0.25, 0.5196, 1.0] {
            let img = RasterImage::new(1, 1, vec![[g, g, g]]).unwrap();
            assert!((decode_luminance(&img).value(0, 0) - g).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_two_pixel_endpoints() {
        let img = encode_depth_gray(&field(&[1.0, 3.0])).unwrap();
        assert_eq!(img.get(0, 0), [1.0; 3]);
        assert_eq!(img.get(1, 0), [0.0; 3]);
    }

    #[test]
    fn encode_three_pixel_linear() {
        let img = encode_depth_gray(&field(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(img.get(0, 0)[0], 1.0);
        assert_eq!(img.get(1, 0)[0], 0.5);
        assert_eq!(img.get(2, 0)[0], 0.0);
        // Achromatic output.
        for px in img.pixels() {
            assert_eq!(px[0], px[1]);
            assert_eq!(px[1], px[2]);
        }
    }

    #[test]
    fn encode_constant_depth_renders_full_intensity() {
        let img = encode_depth_gray(&field(&[2.5, 2.5, 2.5])).unwrap();
        for px in img.pixels() {
            assert_eq!(*px, [1.0; 3]);
        }
    }

    #[test]
    fn encode_invalid_pixels_are_black() {
        let depth = ScalarField::new(3, 1, vec![1.0, 9.0, 2.0], vec![true, false, true]).unwrap();
        let img = encode_depth_gray(&depth).unwrap();
        assert_eq!(img.get(1, 0), [0.0; 3]);
    }

    #[test]
    fn encode_rejects_all_invalid_and_non_positive() {
        let all_invalid = ScalarField::new(2, 1, vec![1.0, 2.0], vec![false, false]).unwrap();
        assert!(matches!(
            encode_depth_gray(&all_invalid),
            Err(Error::NoValidPixels)
        ));
        assert!(encode_depth_gray(&field(&[1.0, -0.5])).is_err());
    }

    #[test]
    fn align_exact_identity() {
        let gt = field(&[1.0, 2.0, 3.0, 4.0]);
        let (fit, aligned) = affine_align(&gt, &gt).unwrap();
        assert!((fit.scale - 1.0).abs() < 1e-12);
        assert!(fit.offset.abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
        assert_eq!(fit.n_pixels, 4);
        for (a, g) in aligned.values().iter().zip(gt.values()) {
            assert!((a - g).abs() < 1e-12);
        }
    }

    #[test]
    fn align_recovers_negated_scaled_relation() {
        // pred = -2 * gt + 5  =>  gt = -0.5 * pred + 2.5.
        let gt = field(&[1.0, 2.0, 3.0]);
        let pred = field(&[3.0, 1.0, -1.0]);
        let (fit, _) = affine_align(&pred, &gt).unwrap();
        assert!((fit.scale + 0.5).abs() < 1e-12);
        assert!((fit.offset - 2.5).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn align_two_point_line() {
        let (fit, _) = affine_align(&field(&[0.0, 1.0]), &field(&[2.0, 4.0])).unwrap();
        assert!((fit.scale - 2.0).abs() < 1e-12);
        assert!((fit.offset - 2.0).abs() < 1e-12);
    }

    #[test]
    fn align_constant_prediction_carries_fallback() {
        let pred = field(&[0.7, 0.7, 0.7]);
        let gt = field(&[1.0, 2.0, 3.0]);
        match affine_align(&pred, &gt) {
            Err(Error::DegenerateFit { fallback }) => {
                assert_eq!(fallback.scale, 0.0);
                assert!((fallback.offset - 2.0).abs() < 1e-12);
                assert_eq!(fallback.n_pixels, 3);
            }
            other => panic!("expected degenerate fit, got {other:?}"),
        }
    }

    #[test]
    fn align_too_few_pixels() {
        let pred = ScalarField::new(2, 1, vec![1.0, 2.0], vec![true, false]).unwrap();
        let gt = field(&[1.0, 2.0]);
        assert!(matches!(
            affine_align(&pred, &gt),
            Err(Error::TooFewPixels { .. })
        ));
    }

    #[test]
    fn metrics_perfect_prediction() {
        let gt = field(&[1.0, 2.0, 3.0]);
        let m = depth_metrics(&gt, &gt).unwrap();
        assert_eq!(m.delta1, 1.0);
        assert_eq!(m.absrel, 0.0);
        assert_eq!(m.rmse, 0.0);
    }

    #[test]
    fn metrics_uniform_ratio_above_threshold() {
        let gt = field(&[1.0, 2.0, 4.0]);
        let aligned = field(&[1.3, 2.6, 5.2]);
        let m = depth_metrics(&aligned, &gt).unwrap();
        assert_eq!(m.delta1, 0.0);
        assert!((m.absrel - 0.3).abs() < 1e-12);
    }

    #[test]
    fn metrics_two_pixel_hand_computation() {
        let gt = field(&[2.0, 2.0]);
        let aligned = field(&[2.0, 4.0]);
        let m = depth_metrics(&aligned, &gt).unwrap();
        assert_eq!(m.delta1, 0.5);
        assert!((m.absrel - 0.5).abs() < 1e-12);
        assert!((m.rmse - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn metrics_negative_aligned_counts_as_failure() {
        let gt = field(&[2.0, 2.0]);
        let aligned = field(&[-2.0, 2.0]);
        let m = depth_metrics(&aligned, &gt).unwrap();
        assert_eq!(m.delta1, 0.5);
        // AbsRel and RMSE take the negative value as-is.
        assert!((m.absrel - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta1_monotone_in_uniform_scale_error() {
        let gt = field(&[1.0, 2.0, 3.0, 5.0]);
        let mut last = f64::INFINITY;
        for factor in [1.0, 1.1, 1.2, 1.24, 1.26, 1.5, 2.0] {
            let scaled: Vec<f64> = gt.values().iter().map(|v| v * factor).collect();
            let m = depth_metrics(&field(&scaled), &gt).unwrap();
            assert!(m.delta1 <= last);
            last = m.delta1;
        }
    }

    fn sse(pairs: &[(f64, f64)], a: f64, b: f64) -> f64 {
        pairs
            .iter()
            .map(|&(p, g)| {
                let r = a * p + b - g;
                r * r
            })
            .sum()
    }

    /// Brute-force oracle: dense grid over the scale, with the offset for
    /// each candidate scale taken as the plain mean of `g - a * p`. The
    /// profiled objective is a 1-D convex quadratic in `a`, so the grid
    /// argmin lands within half a step of the true minimizer.
    fn grid_oracle(pairs: &[(f64, f64)], step: f64) -> (f64, f64) {
        let n = pairs.len() as f64;
        let mut best = (0.0, 0.0);
        let mut best_sse = f64::INFINITY;
        let steps = (10.0 / step).round() as i64;
        for ai in 0..=steps {
            let a = -5.0 + ai as f64 * step;
            let b = pairs.iter().map(|&(p, g)| g - a * p).sum::<f64>() / n;
            let s = sse(pairs, a, b);
            if s < best_sse {
                best_sse = s;
                best = (a, b);
            }
        }
        best
    }

    #[test]
    fn align_matches_grid_search_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let step = 0.01;
        for _ in 0..10 {
            let pred: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a_true: f64 = rng.gen_range(-2.0..2.0);
            let b_true: f64 = rng.gen_range(-2.0..2.0);
            let gt: Vec<f64> = pred
                .iter()
                .map(|p| a_true * p + b_true + rng.gen_range(-0.05..0.05))
                .collect();
            let pred = field(&pred);
            let gt = field(&gt);
            let (fit, _) = affine_align(&pred, &gt).unwrap();
            let pairs = masked_pairs(&pred, &gt).unwrap();
            let (ga, gb) = grid_oracle(&pairs, step);
            assert!(
                (fit.scale - ga).abs() <= step / 2.0 + 1e-9,
                "scale {} vs grid {}",
                fit.scale,
                ga
            );
            assert!(
                (fit.offset - gb).abs() <= step + 1e-9,
                "offset {} vs grid {}",
                fit.offset,
                gb
            );
            // Closed form is at least as good as the best grid point.
            assert!(sse(&pairs, fit.scale, fit.offset) <= sse(&pairs, ga, gb) + 1e-9);
        }
    }

    #[test]
    fn metrics_invariant_under_pre_alignment_affine_warp() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let gt_vals: Vec<f64> = (0..64).map(|_| rng.gen_range(0.5..5.0)).collect();
        let pred_vals: Vec<f64> = gt_vals
            .iter()
            .map(|g| g + rng.gen_range(-0.3..0.3))
            .collect();
        let gt = field(&gt_vals);
        let pred = field(&pred_vals);
        let (_, aligned) = affine_align(&pred, &gt).unwrap();
        let base = depth_metrics(&aligned, &gt).unwrap();
        for (a, b) in [(2.0, 0.5), (-1.5, 3.0), (0.1, -0.2)] {
            let warped: Vec<f64> = pred_vals.iter().map(|p| a * p + b).collect();
            let (_, aligned_w) = affine_align(&field(&warped), &gt).unwrap();
            let m = depth_metrics(&aligned_w, &gt).unwrap();
            assert!((m.delta1 - base.delta1).abs() < 1e-9);
            assert!((m.absrel - base.absrel).abs() < 1e-9);
            assert!((m.rmse - base.rmse).abs() < 1e-9);
        }
    }
}
