//! Dataset ingestion into a normalized prepared layout, plus a synthetic
//! scene generator with analytic ground truth.
//!
//! A prepared dataset is a directory with `manifest.jsonl` at its root and
//! `images/`, `gt/` subdirectories. Every downstream operation consumes only
//! this layout, so codecs and metrics never see upstream archive formats.

mod cityscapes;
mod diode;
mod npy;
mod nyuv2;
mod rawdepth;
mod synth;

pub use cityscapes::ingest_cityscapes;
pub use diode::{ingest_diode, DiodeSplit};
pub use npy::{read_npy_2d, write_npy_2d};
pub use nyuv2::{ingest_nyuv2_depth, ingest_nyuv2_normals};
pub use rawdepth::{read_dcf32, write_dcf32};
pub use synth::{
    random_scene, synth_batch, synth_scene, CameraIntrinsics, SceneRender, SceneSpec, Surface,
    SynthBatchSpec, SynthTask,
};

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Ground-truth file format of one prepared sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtKind {
    /// 16-bit grayscale PNG, depth in millimeters, 0 = invalid.
    Depth16,
    /// Raw little-endian float32 plane (DCF32), 0 = invalid.
    DepthRawF32,
    /// 8-bit RGB normal-map PNG.
    NormalsPng,
    /// 8-bit grayscale train-id PNG, 255 = ignore.
    LabelsPng,
}

impl GtKind {
    pub fn extension(self) -> &'static str {
        match self {
            GtKind::DepthRawF32 => "dcf32",
            _ => "png",
        }
    }
}

/// One manifest row. Paths are relative to the prepared-dataset root, so the
/// directory can be moved wholesale.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PreparedSample {
    pub sample_id: String,
    pub input_path: String,
    pub gt_path: String,
    pub gt_kind: GtKind,
    pub width: u32,
    pub height: u32,
    pub dataset_id: String,
    /// Free-form note on ground-truth origin (e.g. which depth fill-in or
    /// which stored normal convention the source used).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

/// Task family a dataset provides ground truth for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtTask {
    Depth,
    Normals,
    Segmentation,
}

/// Expected shape of an official validation split.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetSpec {
    pub dataset_id: String,
    pub task: GtTask,
    pub expected_count: usize,
    pub width: u32,
    pub height: u32,
}

/// Published validation-split shapes used by [`validate_against_spec`].
pub fn official_specs() -> Vec<DatasetSpec> {
    let spec = |dataset_id: &str, task, expected_count, width, height| DatasetSpec {
        dataset_id: dataset_id.to_string(),
        task,
        expected_count,
        width,
        height,
    };
    vec![
        spec("nyuv2_depth", GtTask::Depth, 654, 640, 480),
        spec("nyuv2_normals", GtTask::Normals, 654, 640, 480),
        spec("diode_indoor", GtTask::Depth, 771, 1024, 768),
        spec("diode_outdoor", GtTask::Depth, 446, 1024, 768),
        spec("cityscapes", GtTask::Segmentation, 500, 2048, 1024),
    ]
}

pub fn official_spec(dataset_id: &str) -> Option<DatasetSpec> {
    official_specs()
        .into_iter()
        .find(|s| s.dataset_id == dataset_id)
}

/// Checks sample count and per-sample resolution against the expected split
/// shape. Returns human-readable warnings with the actual values; an empty
/// list means the split validates.
pub fn validate_against_spec(samples: &[PreparedSample], spec: &DatasetSpec) -> Vec<String> {
    let mut warnings = Vec::new();
    if samples.len() != spec.expected_count {
        warnings.push(format!(
            "{}: expected {} samples, found {}",
            spec.dataset_id,
            spec.expected_count,
            samples.len()
        ));
    }
    let mut wrong_res = 0usize;
    let mut first: Option<&PreparedSample> = None;
    for s in samples {
        if (s.width, s.height) != (spec.width, spec.height) {
            wrong_res += 1;
            first.get_or_insert(s);
        }
    }
    if let Some(s) = first {
        warnings.push(format!(
            "{}: {} samples off the expected {}x{} resolution (first: {} at {}x{})",
            spec.dataset_id, wrong_res, spec.width, spec.height, s.sample_id, s.width, s.height
        ));
    }
    warnings
}

/// Writes `manifest.jsonl`: one sample per line, sorted by sample id, keys in
/// declaration order. Byte-identical across runs over the same samples.
pub fn write_manifest(path: &Path, samples: &[PreparedSample]) -> Result<()> {
    let mut sorted: Vec<&PreparedSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    for pair in sorted.windows(2) {
        if pair[0].sample_id == pair[1].sample_id {
            return Err(Error::Validation(format!(
                "duplicate sample id {}",
                pair[0].sample_id
            )));
        }
    }
    let mut out = Vec::new();
    for s in sorted {
        serde_json::to_writer(&mut out, s)?;
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Reads a manifest in file order. Callers needing a canonical order sort by
/// sample id themselves.
pub fn read_manifest(path: &Path) -> Result<Vec<PreparedSample>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut samples = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: PreparedSample = serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.display().to_string(),
            reason: format!("line {}: {e}", lineno + 1),
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Creates the `images/` and `gt/` subdirectories of a prepared dataset.
pub(crate) fn ensure_layout(out: &Path) -> Result<()> {
    for sub in ["images", "gt"] {
        let dir = out.join(sub);
        std::fs::create_dir_all(&dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    Ok(())
}

/// Writes a file only through a temporary sibling plus rename, so readers
/// never observe a half-written file.
pub(crate) fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)
            .map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
        f.write_all(bytes)
            .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| {
        Error::io(
            format!("renaming {} to {}", tmp.display(), path.display()),
            e,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, w: u32, h: u32) -> PreparedSample {
        PreparedSample {
            sample_id: id.to_string(),
            input_path: format!("images/{id}.png"),
            gt_path: format!("gt/{id}.png"),
            gt_kind: GtKind::Depth16,
            width: w,
            height: h,
            dataset_id: "nyuv2_depth".to_string(),
            provenance: None,
        }
    }

    #[test]
    fn manifest_round_trip_sorted_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let samples = vec![sample("b", 640, 480), sample("a", 640, 480)];
        write_manifest(&path, &samples).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back[0].sample_id, "a");
        assert_eq!(back[1].sample_id, "b");
        let bytes = std::fs::read(&path).unwrap();
        // Input order does not affect the output bytes.
        write_manifest(&path, &[sample("a", 640, 480), sample("b", 640, 480)]).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn manifest_key_order_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        write_manifest(&path, &[sample("a", 2, 1)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "{\"sample_id\":\"a\",\"input_path\":\"images/a.png\",\"gt_path\":\"gt/a.png\",\
             \"gt_kind\":\"depth16\",\"width\":2,\"height\":1,\"dataset_id\":\"nyuv2_depth\"}\n"
        );
    }

    #[test]
    fn manifest_rejects_duplicate_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let err = write_manifest(&path, &[sample("a", 1, 1), sample("a", 1, 1)]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn validation_passes_official_shape() {
        let spec = official_spec("nyuv2_depth").unwrap();
        let samples: Vec<PreparedSample> = (0..654)
            .map(|i| sample(&format!("{i:04}"), 640, 480))
            .collect();
        assert!(validate_against_spec(&samples, &spec).is_empty());
    }

    #[test]
    fn validation_reports_count_and_resolution() {
        let spec = official_spec("nyuv2_depth").unwrap();
        let samples = vec![sample("a", 640, 480), sample("b", 320, 240)];
        let warnings = validate_against_spec(&samples, &spec);
        assert_eq!(warnings.len(), 2);
        assert!(warnings[0].contains("expected 654 samples, found 2"));
        assert!(warnings[1].contains("320x240"));
    }

    #[test]
    fn official_table_matches_published_counts() {
        let specs = official_specs();
        let get = |id: &str| specs.iter().find(|s| s.dataset_id == id).unwrap();
        assert_eq!(get("nyuv2_depth").expected_count, 654);
        assert_eq!(get("diode_indoor").expected_count, 771);
        assert_eq!(get("diode_outdoor").expected_count, 446);
        assert_eq!(get("cityscapes").expected_count, 500);
        assert_eq!(
            (get("diode_indoor").width, get("diode_indoor").height),
            (1024, 768)
        );
    }
}
