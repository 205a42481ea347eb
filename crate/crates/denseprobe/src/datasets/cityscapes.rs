//! Cityscapes validation-split ingestion with labelId → trainId remapping.
//!
//! Expected official layout:
//!
//! ```text
//! root/leftImg8bit/val/<city>/<city>_<seq>_<frame>_leftImg8bit.png
//! root/gtFine/val/<city>/<city>_<seq>_<frame>_gtFine_labelIds.png
//! ```
//!
//! Annotations store full labelIds (0..=33); evaluation uses the 19 train
//! classes, so everything else becomes ignore (255). Ids outside the
//! published table are also mapped to ignore but counted and reported, never
//! silently dropped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::io;
use crate::label::{LabelMap, IGNORE_LABEL};

use super::{ensure_layout, GtKind, PreparedSample};

/// Standard Cityscapes labelId → trainId assignment for the 19 evaluated
/// classes.
pub const LABELID_TO_TRAINID: [(u8, u8); 19] = [
    (7, 0),   // road
    (8, 1),   // sidewalk
    (11, 2),  // building
    (12, 3),  // wall
    (13, 4),  // fence
    (17, 5),  // pole
    (19, 6),  // traffic light
    (20, 7),  // traffic sign
    (21, 8),  // vegetation
    (22, 9),  // terrain
    (23, 10), // sky
    (24, 11), // person
    (25, 12), // rider
    (26, 13), // car
    (27, 14), // truck
    (28, 15), // bus
    (31, 16), // train
    (32, 17), // motorcycle
    (33, 18), // bicycle
];

const MAX_KNOWN_LABELID: u8 = 33;

/// Maps one labelId to its train id, or ignore. `Err` marks ids outside the
/// published id range, which callers count as warnings.
fn remap(label: u8) -> std::result::Result<u8, u8> {
    if let Some(&(_, train)) = LABELID_TO_TRAINID.iter().find(|&&(id, _)| id == label) {
        return Ok(train);
    }
    if label <= MAX_KNOWN_LABELID || label == IGNORE_LABEL {
        Ok(IGNORE_LABEL)
    } else {
        Err(label)
    }
}

/// Remaps a full labelId map, tallying out-of-table ids into `unknown`.
pub fn remap_labelids(map: &LabelMap, unknown: &mut BTreeMap<u8, usize>) -> LabelMap {
    let labels = map
        .labels()
        .iter()
        .map(|&l| match remap(l) {
            Ok(train) => train,
            Err(bad) => {
                *unknown.entry(bad).or_insert(0) += 1;
                IGNORE_LABEL
            }
        })
        .collect();
    LabelMap::new(map.width(), map.height(), labels).expect("same dimensions")
}

/// Ingests the validation split. Returns the prepared samples plus warnings
/// for any labelIds not covered by the published table.
pub fn ingest_cityscapes(root: &Path, out: &Path) -> Result<(Vec<PreparedSample>, Vec<String>)> {
    ensure_layout(out)?;
    let img_root = root.join("leftImg8bit").join("val");
    let gt_root = root.join("gtFine").join("val");
    if !img_root.is_dir() || !gt_root.is_dir() {
        return Err(Error::Format {
            path: root.display().to_string(),
            reason: "expected leftImg8bit/val and gtFine/val subdirectories".into(),
        });
    }
    let mut image_files: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(&img_root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Format {
            path: img_root.display().to_string(),
            reason: e.to_string(),
        })?;
        let path = entry.path();
        if path.is_file()
            && path
                .file_name()
                .and_then(|s| s.to_str())
                .is_some_and(|s| s.ends_with("_leftImg8bit.png"))
        {
            image_files.push(path.to_path_buf());
        }
    }
    let mut samples = Vec::new();
    let mut unknown: BTreeMap<u8, usize> = BTreeMap::new();
    for img_path in image_files {
        let file_name = img_path
            .file_name()
            .and_then(|s| s.to_str())
            .expect("filtered to utf-8 names");
        let sample_id = file_name
            .strip_suffix("_leftImg8bit.png")
            .expect("filtered by suffix")
            .to_string();
        let city = img_path
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let gt_path = gt_root
            .join(city)
            .join(format!("{sample_id}_gtFine_labelIds.png"));
        if !gt_path.is_file() {
            return Err(Error::Format {
                path: gt_path.display().to_string(),
                reason: format!("no labelIds annotation pairs with {sample_id}"),
            });
        }
        let rgb = io::load_image(&img_path)?;
        let raw_labels = io::load_labels(&gt_path)?;
        if (raw_labels.width(), raw_labels.height()) != (rgb.width(), rgb.height()) {
            return Err(Error::Validation(format!(
                "{sample_id}: rgb {}x{} but labels {}x{}",
                rgb.width(),
                rgb.height(),
                raw_labels.width(),
                raw_labels.height()
            )));
        }
        let train = remap_labelids(&raw_labels, &mut unknown);
        let rel_input = format!("images/{sample_id}.png");
        let rel_gt = format!("gt/{sample_id}.png");
        io::save_image(&rgb, &out.join(&rel_input))?;
        io::save_labels(&train, &out.join(&rel_gt))?;
        samples.push(PreparedSample {
            sample_id,
            input_path: rel_input,
            gt_path: rel_gt,
            gt_kind: GtKind::LabelsPng,
            width: rgb.width(),
            height: rgb.height(),
            dataset_id: "cityscapes".to_string(),
            provenance: Some("labels: gtFine labelIds remapped to train ids".to_string()),
        });
    }
    samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let warnings = unknown
        .into_iter()
        .map(|(id, count)| format!("unknown labelId {id} mapped to ignore on {count} pixels"))
        .collect();
    super::write_manifest(&out.join("manifest.jsonl"), &samples)?;
    Ok((samples, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::RasterImage;

    #[test]
    fn remap_table_examples() {
        assert_eq!(remap(7), Ok(0));
        assert_eq!(remap(26), Ok(13));
        assert_eq!(remap(33), Ok(18));
        // Known but not evaluated: unlabeled, ego vehicle, parking, caravan.
        assert_eq!(remap(0), Ok(IGNORE_LABEL));
        assert_eq!(remap(1), Ok(IGNORE_LABEL));
        assert_eq!(remap(9), Ok(IGNORE_LABEL));
        assert_eq!(remap(29), Ok(IGNORE_LABEL));
        assert_eq!(remap(IGNORE_LABEL), Ok(IGNORE_LABEL));
        // Outside the published range.
        assert_eq!(remap(34), Err(34));
        assert_eq!(remap(200), Err(200));
    }

    #[test]
    fn all_nineteen_train_ids_covered_once() {
        let mut trains: Vec<u8> = LABELID_TO_TRAINID.iter().map(|&(_, t)| t).collect();
        trains.sort_unstable();
        assert_eq!(trains, (0..19).collect::<Vec<u8>>());
    }

    fn write_fixture(root: &Path, city: &str, id: &str, labels: &[u8], w: u32, h: u32) {
        let img_dir = root.join("leftImg8bit/val").join(city);
        let gt_dir = root.join("gtFine/val").join(city);
        std::fs::create_dir_all(&img_dir).unwrap();
        std::fs::create_dir_all(&gt_dir).unwrap();
        let raw = vec![70u8; (3 * w * h) as usize];
        io::save_image(
            &RasterImage::from_bytes(&raw, w, h).unwrap(),
            &img_dir.join(format!("{id}_leftImg8bit.png")),
        )
        .unwrap();
        io::save_labels(
            &LabelMap::new(w, h, labels.to_vec()).unwrap(),
            &gt_dir.join(format!("{id}_gtFine_labelIds.png")),
        )
        .unwrap();
    }

    #[test]
    fn ingest_remaps_and_counts_unknown_ids() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("cs");
        // labelIds: road(7), car(26), unlabeled(0), out-of-range 40.
        write_fixture(
            &root,
            "frankfurt",
            "frankfurt_000000_000294",
            &[7, 26, 0, 40],
            2,
            2,
        );
        write_fixture(
            &root,
            "munster",
            "munster_000001_000019",
            &[23, 24, 8, 11],
            2,
            2,
        );
        let out = tmp.path().join("prepared");
        let (samples, warnings) = ingest_cityscapes(&root, &out).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].sample_id, "frankfurt_000000_000294");
        let gt = io::load_labels(&out.join(&samples[0].gt_path)).unwrap();
        assert_eq!(gt.labels(), &[0, 13, IGNORE_LABEL, IGNORE_LABEL]);
        let gt2 = io::load_labels(&out.join(&samples[1].gt_path)).unwrap();
        assert_eq!(gt2.labels(), &[10, 11, 1, 2]);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("labelId 40"));
        assert!(warnings[0].contains("1 pixels"));
    }

    #[test]
    fn ingest_requires_official_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let err = ingest_cityscapes(tmp.path(), &tmp.path().join("out")).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }
}
