//! NYUv2 validation-split ingestion for depth and surface normals.
//!
//! Expected raw layout (as produced by the usual export scripts from the
//! official distribution):
//!
//! ```text
//! root/rgb/<id>.png|jpg         color frames
//! root/depth/<id>.png           16-bit grayscale, depth in millimeters
//! root/normals/<id>.png         8-bit RGB normal maps (normals split only)
//! ```
//!
//! Samples pair by filename stem. Officially the split holds 654 frames at
//! 640x480; deviations surface as validation warnings, not errors.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io;

use super::{ensure_layout, GtKind, PreparedSample};

/// Files of `dir` sorted by name, as `(stem, path)` pairs.
fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let iter =
        std::fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    let mut entries = Vec::new();
    for entry in iter {
        let entry = entry.map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let stem = match path.file_stem().and_then(|s| s.to_str()) {
            Some(s) => s.to_string(),
            None => continue,
        };
        entries.push((stem, path));
    }
    entries.sort();
    Ok(entries)
}

fn ingest(
    root: &Path,
    out: &Path,
    gt_subdir: &str,
    gt_kind: GtKind,
    dataset_id: &str,
    provenance: Option<String>,
) -> Result<Vec<PreparedSample>> {
    ensure_layout(out)?;
    let rgb_dir = root.join("rgb");
    let gt_dir = root.join(gt_subdir);
    let mut samples = Vec::new();
    for (stem, rgb_path) in sorted_entries(&rgb_dir)? {
        let gt_path = gt_dir.join(format!("{stem}.png"));
        if !gt_path.is_file() {
            return Err(Error::Format {
                path: gt_path.display().to_string(),
                reason: format!("no {gt_subdir} file pairs with rgb image {stem}"),
            });
        }
        let rgb = io::load_image(&rgb_path)?;
        let rel_input = format!("images/{stem}.png");
        let rel_gt = format!("gt/{stem}.png");
        io::save_image(&rgb, &out.join(&rel_input))?;
        let (gt_w, gt_h) = match gt_kind {
            GtKind::Depth16 => {
                let depth = io::load_depth16(&gt_path)?;
                io::save_depth16(&depth, &out.join(&rel_gt))?;
                (depth.width(), depth.height())
            }
            GtKind::NormalsPng => {
                let normals = io::load_image(&gt_path)?;
                io::save_image(&normals, &out.join(&rel_gt))?;
                (normals.width(), normals.height())
            }
            other => unreachable!("nyuv2 ingestion never produces {other:?}"),
        };
        if (gt_w, gt_h) != (rgb.width(), rgb.height()) {
            return Err(Error::Validation(format!(
                "{stem}: rgb is {}x{} but ground truth is {gt_w}x{gt_h}",
                rgb.width(),
                rgb.height()
            )));
        }
        samples.push(PreparedSample {
            sample_id: stem,
            input_path: rel_input,
            gt_path: rel_gt,
            gt_kind,
            width: rgb.width(),
            height: rgb.height(),
            dataset_id: dataset_id.to_string(),
            provenance: provenance.clone(),
        });
    }
    super::write_manifest(&out.join("manifest.jsonl"), &samples)?;
    Ok(samples)
}

/// Ingests the depth split. Depth PNG values are millimeters (value / 1000 in
/// meters); zero marks invalid pixels, and the validity mask is exactly
/// `depth > 0`.
pub fn ingest_nyuv2_depth(
    root: &Path,
    out: &Path,
    provenance: Option<String>,
) -> Result<Vec<PreparedSample>> {
    ingest(
        root,
        out,
        "depth",
        GtKind::Depth16,
        "nyuv2_depth",
        provenance,
    )
}

/// Ingests the surface-normal split. The stored convention of the source
/// normal maps is recorded as provenance; convention mismatches against any
/// model output are reconciled later by calibration, never here.
pub fn ingest_nyuv2_normals(
    root: &Path,
    out: &Path,
    provenance: Option<String>,
) -> Result<Vec<PreparedSample>> {
    let provenance = provenance.or_else(|| {
        Some("stored-convention: camera-frame normal map, channels decode as 2*rgb-1".to_string())
    });
    ingest(
        root,
        out,
        "normals",
        GtKind::NormalsPng,
        "nyuv2_normals",
        provenance,
    )
}
