//! On-disk calibration records, one file per (model, dataset) pair.
//!
//! The text layout is deterministic so repeated calibrations produce
//! byte-identical files. An existing record is trusted as-is; recomputation
//! happens only on request.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::normals::AxisConvention;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub model_id: String,
    pub dataset_id: String,
    /// Sample ids the convention was fitted on, in evaluation order.
    pub subset: Vec<String>,
    pub convention: AxisConvention,
    /// Pixel-pooled mean angular error of the selected convention over the
    /// subset, degrees.
    pub mean_deg: f64,
    /// Mean angular error for every convention, indexed by convention index.
    pub table: [f64; 48],
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Cache file path for a (model, dataset) pair.
pub fn cache_path(dir: &Path, model_id: &str, dataset_id: &str) -> PathBuf {
    dir.join(format!(
        "{}__{}.calib.txt",
        sanitize(model_id),
        sanitize(dataset_id)
    ))
}

impl CalibrationRecord {
    pub fn to_text(&self) -> String {
        let perm = self.convention.perm();
        let signs = self.convention.signs();
        let mut out = String::new();
        out.push_str("# denseprobe calibration record\n");
        out.push_str(&format!("model = {}\n", self.model_id));
        out.push_str(&format!("dataset = {}\n", self.dataset_id));
        out.push_str(&format!("subset = {}\n", self.subset.join(",")));
        out.push_str(&format!("convention_index = {}\n", self.convention.index()));
        out.push_str(&format!("perm = {},{},{}\n", perm[0], perm[1], perm[2]));
        out.push_str(&format!("signs = {},{},{}\n", signs[0], signs[1], signs[2]));
        // Shortest-round-trip float text: load(store(record)) is exact, so an
        // evaluation that computes calibration and one that reads the cache
        // echo identical values.
        out.push_str(&format!("mean_deg = {}\n", self.mean_deg));
        out.push_str("table:\n");
        for (idx, mean) in self.table.iter().enumerate() {
            let conv = AxisConvention::from_index(idx);
            let p = conv.perm();
            let s = conv.signs();
            out.push_str(&format!(
                "{idx} perm={},{},{} signs={},{},{} mean_deg={mean}\n",
                p[0], p[1], p[2], s[0], s[1], s[2]
            ));
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<CalibrationRecord> {
        let bad = |reason: &str| Error::Format {
            path: origin.to_string(),
            reason: reason.to_string(),
        };
        let mut model_id = None;
        let mut dataset_id = None;
        let mut subset = None;
        let mut convention_index = None;
        let mut mean_deg = None;
        let mut table = [f64::NAN; 48];
        let mut seen = 0usize;
        let mut in_table = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "table:" {
                in_table = true;
                continue;
            }
            if in_table {
                let mut parts = line.split_whitespace();
                let idx: usize = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad("table row missing index"))?;
                if idx >= 48 {
                    return Err(bad("table index out of range"));
                }
                let mean = parts
                    .find_map(|t| t.strip_prefix("mean_deg="))
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| bad("table row missing mean_deg"))?;
                if !table[idx].is_nan() {
                    return Err(bad("duplicate table index"));
                }
                table[idx] = mean;
                seen += 1;
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad("expected key = value"))?;
            match key {
                "model" => model_id = Some(value.to_string()),
                "dataset" => dataset_id = Some(value.to_string()),
                "subset" => {
                    subset = Some(if value.is_empty() {
                        Vec::new()
                    } else {
                        value.split(',').map(str::to_string).collect()
                    })
                }
                "convention_index" => {
                    let idx: usize = value.parse().map_err(|_| bad("bad convention_index"))?;
                    if idx >= 48 {
                        return Err(bad("convention_index out of range"));
                    }
                    convention_index = Some(idx);
                }
                "perm" | "signs" => {}
                "mean_deg" => {
                    mean_deg = Some(value.parse().map_err(|_| bad("bad mean_deg"))?);
                }
                _ => return Err(bad(&format!("unknown key {key}"))),
            }
        }
        if seen != 48 {
            return Err(bad("table must have 48 rows"));
        }
        Ok(CalibrationRecord {
            model_id: model_id.ok_or_else(|| bad("missing model"))?,
            dataset_id: dataset_id.ok_or_else(|| bad("missing dataset"))?,
            subset: subset.ok_or_else(|| bad("missing subset"))?,
            convention: AxisConvention::from_index(
                convention_index.ok_or_else(|| bad("missing convention_index"))?,
            ),
            mean_deg: mean_deg.ok_or_else(|| bad("missing mean_deg"))?,
            table,
        })
    }

    /// Loads the record for (model, dataset), verifying the content matches
    /// the requested pair. `Ok(None)` when no record exists.
    pub fn load(dir: &Path, model_id: &str, dataset_id: &str) -> Result<Option<CalibrationRecord>> {
        let path = cache_path(dir, model_id, dataset_id);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let record = CalibrationRecord::from_text(&text, &path.display().to_string())?;
        if record.model_id != model_id || record.dataset_id != dataset_id {
            return Err(Error::CacheConflict {
                path: path.display().to_string(),
                reason: format!(
                    "record is for ({}, {}), requested ({}, {})",
                    record.model_id, record.dataset_id, model_id, dataset_id
                ),
            });
        }
        Ok(Some(record))
    }

    /// Writes the record under `dir`, creating the directory if needed.
    pub fn store(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let path = cache_path(dir, &self.model_id, &self.dataset_id);
        crate::datasets::atomic_write(&path, self.to_text().as_bytes())?;
        Ok(path)
    }
}
