//! DIODE validation-split ingestion.
//!
//! The official distribution nests scans under scene directories:
//!
//! ```text
//! root/[indoors|outdoors]/scene_*/scan_*/<id>.png
//!                                       <id>_depth.npy
//!                                       <id>_depth_mask.npy
//! ```
//!
//! `root` may point either at the directory containing `indoors`/`outdoors`
//! or directly at one split. Depth and mask planes merge into a single raw
//! float32 ground-truth file whose validity is `mask > 0` and `depth > 0`.

use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::io;
use crate::raster::ScalarField;

use super::{ensure_layout, npy::read_npy_2d, rawdepth::write_dcf32, GtKind, PreparedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiodeSplit {
    Indoor,
    Outdoor,
}

impl DiodeSplit {
    pub fn dataset_id(self) -> &'static str {
        match self {
            DiodeSplit::Indoor => "diode_indoor",
            DiodeSplit::Outdoor => "diode_outdoor",
        }
    }

    /// Directory names the official archives use for this split.
    fn dir_names(self) -> [&'static str; 2] {
        match self {
            DiodeSplit::Indoor => ["indoors", "indoor"],
            DiodeSplit::Outdoor => ["outdoors", "outdoor"],
        }
    }
}

fn split_dir(root: &Path, split: DiodeSplit) -> PathBuf {
    for name in split.dir_names() {
        let candidate = root.join(name);
        if candidate.is_dir() {
            return candidate;
        }
    }
    root.to_path_buf()
}

pub fn ingest_diode(root: &Path, split: DiodeSplit, out: &Path) -> Result<Vec<PreparedSample>> {
    ensure_layout(out)?;
    let base = split_dir(root, split);
    let mut rgb_files: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(&base).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Format {
            path: base.display().to_string(),
            reason: e.to_string(),
        })?;
        let path = entry.path();
        if path.is_file()
            && path.extension().and_then(|e| e.to_str()) == Some("png")
            && path
                .file_stem()
                .and_then(|s| s.to_str())
                .is_some_and(|s| !s.ends_with("_depth") && !s.ends_with("_depth_mask"))
        {
            rgb_files.push(path.to_path_buf());
        }
    }
    let mut samples = Vec::new();
    for rgb_path in rgb_files {
        let stem = rgb_path
            .file_stem()
            .and_then(|s| s.to_str())
            .expect("filtered to utf-8 stems")
            .to_string();
        let dir = rgb_path.parent().expect("walked files have parents");
        let depth_path = dir.join(format!("{stem}_depth.npy"));
        let mask_path = dir.join(format!("{stem}_depth_mask.npy"));
        if !depth_path.is_file() || !mask_path.is_file() {
            return Err(Error::Format {
                path: rgb_path.display().to_string(),
                reason: "missing _depth.npy or _depth_mask.npy sibling".into(),
            });
        }
        let rgb = io::load_image(&rgb_path)?;
        let (depth, dw, dh) = read_npy_2d(&depth_path)?;
        let (mask, mw, mh) = read_npy_2d(&mask_path)?;
        if (dw, dh) != (rgb.width(), rgb.height()) || (mw, mh) != (dw, dh) {
            return Err(Error::Validation(format!(
                "{stem}: rgb {}x{}, depth {dw}x{dh}, mask {mw}x{mh} disagree",
                rgb.width(),
                rgb.height()
            )));
        }
        let valid: Vec<bool> = depth
            .iter()
            .zip(&mask)
            .map(|(&d, &m)| m > 0.0 && d > 0.0)
            .collect();
        let merged = ScalarField::new(dw, dh, depth, valid)?;
        let rel_input = format!("images/{stem}.png");
        let rel_gt = format!("gt/{stem}.dcf32");
        io::save_image(&rgb, &out.join(&rel_input))?;
        write_dcf32(&out.join(&rel_gt), &merged)?;
        samples.push(PreparedSample {
            sample_id: stem,
            input_path: rel_input,
            gt_path: rel_gt,
            gt_kind: GtKind::DepthRawF32,
            width: dw,
            height: dh,
            dataset_id: split.dataset_id().to_string(),
            provenance: None,
        });
    }
    samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    super::write_manifest(&out.join("manifest.jsonl"), &samples)?;
    Ok(samples)
}
