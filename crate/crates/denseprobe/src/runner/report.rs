//! Report model and deterministic serialization.
//!
//! Metric values are rounded to 6 significant digits when a report is built,
//! and the JSON writer prints floats at exactly that precision with trailing
//! zeros (`0.8224` prints as `"0.822400"`). Together with sample rows sorted
//! by id and a config echo that excludes the parallelism degree, this makes
//! reports byte-identical for identical inputs regardless of `--jobs`.

use std::io::Write as _;
use std::path::Path;

use serde_json::ser::Formatter;

use crate::error::{Error, Result};

use super::Task;

/// Rounds to 6 significant decimal digits. Identity for zero and non-finite
/// values.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(5 - exp);
    (x * scale).round() / scale
}

/// Fixed-point text at 6 significant digits for an already rounded value.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (5 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// JSON formatter: pretty layout with all floats in 6-significant-digit
/// fixed-point form.
struct Sig6Formatter<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

impl Formatter for Sig6Formatter<'_> {
    fn write_f64<W: std::io::Write + ?Sized>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        writer.write_all(format_sig6(value).as_bytes())
    }

    fn write_f32<W: std::io::Write + ?Sized>(
        &mut self,
        writer: &mut W,
        value: f32,
    ) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: std::io::Write + ?Sized>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: std::io::Write + ?Sized>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: std::io::Write + ?Sized>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Output format of `emit_report`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Per-sample disposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleStatus {
    Scored,
    /// No generated image was found for the sample id.
    Missing,
    /// The generated image existed but could not be processed.
    Failed,
}

/// Task-specific per-sample metrics. Field names are disjoint across
/// variants, so the untagged representation is unambiguous.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum SampleMetrics {
    Depth {
        delta1: f64,
        absrel: f64,
        rmse: f64,
        fit_scale: f64,
        fit_offset: f64,
        n_pixels: usize,
    },
    Normals {
        mean_deg: f64,
        median_deg: f64,
        a11: f64,
        a22: f64,
        a30: f64,
        n_pixels: usize,
    },
    Seg {
        miou: f64,
        pixel_acc: f64,
        n_pixels: usize,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub status: SampleStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<SampleMetrics>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerClassIou {
    pub class_id: u8,
    pub iou: Option<f64>,
}

/// Dataset-level metrics. Depth averages the per-sample rows; normals pool
/// pixels across the dataset; segmentation derives from the stored dataset
/// confusion matrix, which makes the aggregate independently recomputable.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum AggregateMetrics {
    Depth {
        delta1: f64,
        absrel: f64,
        rmse: f64,
    },
    Normals {
        mean_deg: f64,
        median_deg: f64,
        a11: f64,
        a22: f64,
        a30: f64,
        pooled_pixels: usize,
    },
    Seg {
        miou: f64,
        pixel_acc: f64,
        per_class_iou: Vec<PerClassIou>,
        /// Rows are ground truth, columns predictions; the final index is the
        /// background bucket.
        confusion: Vec<Vec<u64>>,
    },
}

/// Calibration details echoed into normals reports.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CalibrationEcho {
    pub convention_index: usize,
    pub perm: [usize; 3],
    pub signs: [i8; 3],
    pub subset: Vec<String>,
    pub subset_mean_deg: f64,
}

/// Evaluation inputs echoed for reproducibility. Deliberately excludes the
/// parallelism degree: it must not influence report bytes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConfigEcho {
    pub model_id: String,
    pub dataset_id: String,
    pub prepared_dir: String,
    pub generated_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_cap: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Report {
    pub tool: String,
    pub task: Task,
    pub aggregation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palette_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationEcho>,
    pub config: ConfigEcho,
    pub n_samples: usize,
    pub n_scored: usize,
    pub n_missing: usize,
    pub n_failed: usize,
    pub per_sample: Vec<SampleRecord>,
    /// Absent when no sample could be scored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<AggregateMetrics>,
}

impl Report {
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        let formatter = Sig6Formatter {
            inner: serde_json::ser::PrettyFormatter::new(),
        };
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, formatter);
        serde::Serialize::serialize(self, &mut ser)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Report> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// One row per sample plus a final `AGGREGATE` row. Columns depend on the
    /// task; cells without a value stay empty.
    pub fn to_csv_string(&self) -> String {
        let headers: &[&str] = match self.task {
            Task::Depth => &[
                "sample_id",
                "status",
                "flags",
                "delta1",
                "absrel",
                "rmse",
                "fit_scale",
                "fit_offset",
                "n_pixels",
            ],
            Task::Normals => &[
                "sample_id",
                "status",
                "flags",
                "mean_deg",
                "median_deg",
                "a11",
                "a22",
                "a30",
                "n_pixels",
            ],
            Task::Seg19 | Task::Seg7 => &[
                "sample_id",
                "status",
                "flags",
                "miou",
                "pixel_acc",
                "n_pixels",
            ],
        };
        let mut out = String::new();
        out.push_str(&headers.join(","));
        out.push('\n');
        let status_text = |s: SampleStatus| match s {
            SampleStatus::Scored => "scored",
            SampleStatus::Missing => "missing",
            SampleStatus::Failed => "failed",
        };
        for row in &self.per_sample {
            let mut cells = vec![
                row.sample_id.clone(),
                status_text(row.status).to_string(),
                row.flags.join(";"),
            ];
            match &row.metrics {
                Some(SampleMetrics::Depth {
                    delta1,
                    absrel,
                    rmse,
                    fit_scale,
                    fit_offset,
                    n_pixels,
                }) => {
                    for v in [delta1, absrel, rmse, fit_scale, fit_offset] {
                        cells.push(format_sig6(*v));
                    }
                    cells.push(n_pixels.to_string());
                }
                Some(SampleMetrics::Normals {
                    mean_deg,
                    median_deg,
                    a11,
                    a22,
                    a30,
                    n_pixels,
                }) => {
                    for v in [mean_deg, median_deg, a11, a22, a30] {
                        cells.push(format_sig6(*v));
                    }
                    cells.push(n_pixels.to_string());
                }
                Some(SampleMetrics::Seg {
                    miou,
                    pixel_acc,
                    n_pixels,
                }) => {
                    cells.push(format_sig6(*miou));
                    cells.push(format_sig6(*pixel_acc));
                    cells.push(n_pixels.to_string());
                }
                None => cells.resize(headers.len(), String::new()),
            }
            cells.resize(headers.len(), String::new());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        let mut agg = vec!["AGGREGATE".to_string(), String::new(), String::new()];
        match &self.aggregate {
            Some(AggregateMetrics::Depth {
                delta1,
                absrel,
                rmse,
            }) => {
                for v in [delta1, absrel, rmse] {
                    agg.push(format_sig6(*v));
                }
            }
            Some(AggregateMetrics::Normals {
                mean_deg,
                median_deg,
                a11,
                a22,
                a30,
                pooled_pixels,
            }) => {
                for v in [mean_deg, median_deg, a11, a22, a30] {
                    agg.push(format_sig6(*v));
                }
                agg.push(pooled_pixels.to_string());
            }
            Some(AggregateMetrics::Seg {
                miou, pixel_acc, ..
            }) => {
                agg.push(format_sig6(*miou));
                agg.push(format_sig6(*pixel_acc));
            }
            None => {}
        }
        agg.resize(headers.len(), String::new());
        out.push_str(&agg.join(","));
        out.push('\n');
        out
    }
}

/// Writes the report in the requested format through a temp-file rename, so a
/// crash can never leave a truncated report behind.
pub fn emit_report(report: &Report, path: &Path, format: ReportFormat) -> Result<()> {
    let bytes = match format {
        ReportFormat::Json => report.to_json_bytes()?,
        ReportFormat::Csv => report.to_csv_string().into_bytes(),
    };
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)
            .map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
        f.write_all(&bytes)
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

    #[test]
    fn rounding_to_six_significant_digits() {
        assert_eq!(round_sig6(0.82240014), 0.8224);
        assert_eq!(round_sig6(0.123456789), 0.123457);
        assert_eq!(round_sig6(17.6949999), 17.695);
        assert_eq!(round_sig6(123456789.0), 123457000.0);
        assert_eq!(round_sig6(0.000123456789), 0.000123457);
        assert_eq!(round_sig6(0.0), 0.0);
        assert_eq!(round_sig6(-0.5), -0.5);
        assert_eq!(round_sig6(1.0), 1.0);
    }

    #[test]
    fn formatting_keeps_trailing_zeros() {
        assert_eq!(format_sig6(0.8224), "0.822400");
        assert_eq!(format_sig6(1.0), "1.00000");
        assert_eq!(format_sig6(100.0), "100.000");
        assert_eq!(format_sig6(17.69), "17.6900");
        assert_eq!(format_sig6(0.0), "0.00000");
        assert_eq!(format_sig6(-0.5), "-0.500000");
        assert_eq!(format_sig6(0.000123457), "0.000123457");
    }

    fn toy_report() -> Report {
        Report {
            tool: "denseprobe 0.1.0".to_string(),
            task: Task::Depth,
            aggregation: "per_image_mean".to_string(),
            palette_version: None,
            calibration: None,
            config: ConfigEcho {
                model_id: "toy".to_string(),
                dataset_id: "synth_depth".to_string(),
                prepared_dir: "prepared".to_string(),
                generated_dir: "generated".to_string(),
                crop: None,
                depth_cap: None,
            },
            n_samples: 2,
            n_scored: 1,
            n_missing: 1,
            n_failed: 0,
            per_sample: vec![
                SampleRecord {
                    sample_id: "a".to_string(),
                    status: SampleStatus::Scored,
                    flags: vec![],
                    metrics: Some(SampleMetrics::Depth {
                        delta1: 0.8224,
                        absrel: 0.123457,
                        rmse: 0.5,
                        fit_scale: -4.0,
                        fit_offset: 6.25,
                        n_pixels: 16,
                    }),
                },
                SampleRecord {
                    sample_id: "b".to_string(),
                    status: SampleStatus::Missing,
                    flags: vec![],
                    metrics: None,
                },
            ],
            aggregate: Some(AggregateMetrics::Depth {
                delta1: 0.8224,
                absrel: 0.123457,
                rmse: 0.5,
            }),
        }
    }

    #[test]
    fn json_prints_six_significant_digits() {
        let bytes = toy_report().to_json_bytes().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\"delta1\": 0.822400"), "{text}");
        assert!(text.contains("\"fit_scale\": -4.00000"));
        assert!(text.contains("\"n_pixels\": 16"), "integers stay plain");
    }

    #[test]
    fn json_round_trip_is_identity() {
        let report = toy_report();
        let back = Report::from_json(&report.to_json_bytes().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn json_bytes_are_stable() {
        let a = toy_report().to_json_bytes().unwrap();
        let b = toy_report().to_json_bytes().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_has_sample_and_aggregate_rows() {
        let text = toy_report().to_csv_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("sample_id,status,flags,delta1"));
        assert!(lines[1].starts_with("a,scored,,0.822400,0.123457,0.500000"));
        assert_eq!(lines[2], "b,missing,,,,,,,");
        assert!(lines[3].starts_with("AGGREGATE,,,0.822400,0.123457,0.500000"));
    }

    #[test]
    fn seg_aggregate_round_trips_confusion() {
        let report = Report {
            task: Task::Seg19,
            aggregation: "dataset_confusion".to_string(),
            palette_version: Some("cityscapes19-v1".to_string()),
            aggregate: Some(AggregateMetrics::Seg {
                miou: 0.5,
                pixel_acc: 0.75,
                per_class_iou: vec![
                    PerClassIou {
                        class_id: 0,
                        iou: Some(0.5),
                    },
                    PerClassIou {
                        class_id: 1,
                        iou: None,
                    },
                ],
                confusion: vec![vec![3, 1], vec![0, 4]],
            }),
            per_sample: vec![],
            n_samples: 0,
            n_scored: 0,
            n_missing: 0,
            n_failed: 0,
            ..toy_report()
        };
        let back = Report::from_json(&report.to_json_bytes().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn emit_writes_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        emit_report(&toy_report(), &path, ReportFormat::Json).unwrap();
        assert!(path.is_file());
        assert!(!path.with_extension("tmp").exists());
        let back = Report::from_json(&std::fs::read(&path).unwrap()).unwrap();
        assert_eq!(back, toy_report());
    }
}
