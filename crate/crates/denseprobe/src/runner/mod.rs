//! Batch evaluation: prompt construction, axis calibration, per-sample
//! scoring, and deterministic report assembly.
//!
//! Evaluation pairs each manifest sample with a generated image named
//! `<sample_id>.png` (or `.jpg`/`.jpeg`) in the generated directory, resamples
//! it to ground-truth resolution, decodes it with the task codec, and scores
//! it. Aggregation is per-image averaging for depth, pixel pooling for
//! normals, and a dataset-level confusion matrix for segmentation. Reports
//! are byte-identical for identical inputs regardless of worker count:
//! samples are processed in sample-id order, floating-point reductions run
//! sequentially over that order, and pooled counters merge commutatively.

pub mod cache;
pub mod report;

pub use cache::{cache_path, CalibrationRecord};
pub use report::{
    emit_report, format_sig6, round_sig6, AggregateMetrics, CalibrationEcho, ConfigEcho,
    PerClassIou, Report, ReportFormat, SampleMetrics, SampleRecord, SampleStatus,
};

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::datasets::{read_dcf32, read_manifest, GtKind, PreparedSample};
use crate::depth::{affine_align, decode_luminance, depth_metrics};
use crate::error::{Error, Result};
use crate::io::{load_depth16, load_image, load_labels, save_image};
use crate::label::LabelSpace;
use crate::normals::{
    angular_error, apply_convention, calibrate_convention, decode_normals, normal_metrics,
};
use crate::raster::ScalarField;
use crate::resample::{resize_bilinear, resize_nearest};
use crate::segmentation::{
    accumulate_confusion, build_prompt, categories7_palette, cityscapes19_palette, decode_palette,
    group_to_categories, oracle_class_list, seg_metrics, ConfusionMatrix, Palette,
    PromptGranularity,
};

/// Environment variable naming the default calibration cache directory.
pub const CACHE_DIR_ENV: &str = "DENSEPROBE_CACHE";

/// Calibration uses at most this many samples.
pub const CALIBRATION_SUBSET: usize = 5;

/// Depth instruction sent to the model under evaluation.
pub const DEPTH_PROMPT: &str = "Convert this image into a grayscale depth map with smooth \
    gradual transitions. Nearby objects appear bright, distant objects appear dark.";

/// Surface-normal instruction sent to the model under evaluation.
pub const NORMALS_PROMPT: &str = "Generate a surface normal estimation visualization of this \
    image. Use the standard normal map color convention: surfaces facing left are pinkish-red, \
    surfaces facing up are light green, surfaces facing the camera are light blue/purple.";

/// Evaluation task. Segmentation comes in two granularities: the 19 classes
/// and the 7 coarse categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Depth,
    Normals,
    Seg19,
    Seg7,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Depth => "depth",
            Task::Normals => "normals",
            Task::Seg19 => "seg19",
            Task::Seg7 => "seg7",
        }
    }

    /// Aggregation mode recorded in report metadata.
    pub fn aggregation(self) -> &'static str {
        match self {
            Task::Depth => "per_image_mean",
            Task::Normals => "pixel_pooled",
            Task::Seg19 | Task::Seg7 => "dataset_confusion",
        }
    }

    fn accepts(self, kind: GtKind) -> bool {
        match self {
            Task::Depth => matches!(kind, GtKind::Depth16 | GtKind::DepthRawF32),
            Task::Normals => matches!(kind, GtKind::NormalsPng),
            Task::Seg19 | Task::Seg7 => matches!(kind, GtKind::LabelsPng),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Task> {
        match s {
            "depth" => Ok(Task::Depth),
            "normals" => Ok(Task::Normals),
            "seg19" => Ok(Task::Seg19),
            "seg7" => Ok(Task::Seg7),
            other => Err(Error::Validation(format!(
                "unknown task {other:?}; expected depth, normals, seg19, or seg7"
            ))),
        }
    }
}

/// Evaluation-region restriction applied to ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalCrop {
    /// The central depth-evaluation crop conventional for 640x480 indoor
    /// benchmarks (rows 45..471, columns 41..601), applied proportionally.
    Eigen,
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub task: Task,
    pub model_id: String,
    pub prepared_dir: PathBuf,
    pub generated_dir: PathBuf,
    pub calibration_cache: PathBuf,
    /// Restricts ground-truth depth to `[min, max]` meters before scoring.
    pub depth_cap: Option<(f64, f64)>,
    pub crop: Option<EvalCrop>,
    /// Worker threads; 0 uses the global default pool.
    pub jobs: usize,
}

impl EvalConfig {
    pub fn new(
        task: Task,
        model_id: impl Into<String>,
        prepared_dir: impl Into<PathBuf>,
        generated_dir: impl Into<PathBuf>,
        calibration_cache: impl Into<PathBuf>,
    ) -> Self {
        EvalConfig {
            task,
            model_id: model_id.into(),
            prepared_dir: prepared_dir.into(),
            generated_dir: generated_dir.into(),
            calibration_cache: calibration_cache.into(),
            depth_cap: None,
            crop: None,
            jobs: 0,
        }
    }
}

/// Builds the instruction text for a task. Segmentation tasks require the
/// per-image oracle class list; depth and normals use fixed templates.
pub fn task_prompt(task: Task, classes: Option<&[u8]>) -> Result<String> {
    match task {
        Task::Depth => Ok(DEPTH_PROMPT.to_string()),
        Task::Normals => Ok(NORMALS_PROMPT.to_string()),
        Task::Seg19 => {
            let classes = classes.ok_or(Error::EmptyInput("segmentation class list"))?;
            build_prompt(
                classes,
                &cityscapes19_palette(),
                PromptGranularity::Classes19,
            )
        }
        Task::Seg7 => {
            let classes = classes.ok_or(Error::EmptyInput("segmentation class list"))?;
            build_prompt(
                classes,
                &categories7_palette(),
                PromptGranularity::Categories7,
            )
        }
    }
}

fn generated_path(dir: &Path, sample_id: &str) -> Option<PathBuf> {
    ["png", "jpg", "jpeg"].iter().find_map(|ext| {
        let p = dir.join(format!("{sample_id}.{ext}"));
        p.is_file().then_some(p)
    })
}

fn load_gt_depth(prepared: &Path, sample: &PreparedSample) -> Result<ScalarField> {
    let path = prepared.join(&sample.gt_path);
    match sample.gt_kind {
        GtKind::Depth16 => load_depth16(&path),
        GtKind::DepthRawF32 => read_dcf32(&path),
        other => Err(Error::Validation(format!(
            "sample {} has {:?} ground truth, not depth",
            sample.sample_id, other
        ))),
    }
}

fn check_gt_dims(sample: &PreparedSample, width: u32, height: u32) -> Result<()> {
    if width != sample.width || height != sample.height {
        return Err(Error::Format {
            path: sample.gt_path.clone(),
            reason: format!(
                "ground truth is {width}x{height} but the manifest declares {}x{}",
                sample.width, sample.height
            ),
        });
    }
    Ok(())
}

/// Proportional bounds of the central evaluation crop: half-open pixel ranges
/// in x and y.
fn eigen_crop_bounds(width: u32, height: u32) -> (u32, u32, u32, u32) {
    let x0 = (f64::from(width) * 41.0 / 640.0).round() as u32;
    let x1 = (f64::from(width) * 601.0 / 640.0).round() as u32;
    let y0 = (f64::from(height) * 45.0 / 480.0).round() as u32;
    let y1 = (f64::from(height) * 471.0 / 480.0).round() as u32;
    (x0, x1, y0, y1)
}

fn restrict_gt_depth(gt: ScalarField, config: &EvalConfig) -> ScalarField {
    let mut gt = gt;
    if let Some((lo, hi)) = config.depth_cap {
        gt = gt.restrict(|_, _, v| v >= lo && v <= hi);
    }
    if config.crop == Some(EvalCrop::Eigen) {
        let (x0, x1, y0, y1) = eigen_crop_bounds(gt.width(), gt.height());
        gt = gt.restrict(|x, y, _| x >= x0 && x < x1 && y >= y0 && y < y1);
    }
    gt
}

/// Fits the axis convention for (model, dataset) on the first
/// [`CALIBRATION_SUBSET`] manifest samples that have generated outputs, and
/// stores the record in the cache directory. An existing record is returned
/// untouched unless `force` is set.
pub fn calibrate(config: &EvalConfig, force: bool) -> Result<CalibrationRecord> {
    let samples = sorted_manifest(config)?;
    let dataset_id = dataset_id_of(&samples)?;
    if !force {
        if let Some(existing) =
            CalibrationRecord::load(&config.calibration_cache, &config.model_id, &dataset_id)?
        {
            return Ok(existing);
        }
    }
    if config.task != Task::Normals {
        return Err(Error::Validation(
            "calibration applies to the normals task only".to_string(),
        ));
    }
    let mut subset_ids = Vec::new();
    let mut pairs = Vec::new();
    for sample in &samples {
        if pairs.len() == CALIBRATION_SUBSET {
            break;
        }
        let Some(gen_path) = generated_path(&config.generated_dir, &sample.sample_id) else {
            continue;
        };
        let gt = decode_normals(&load_image(&config.prepared_dir.join(&sample.gt_path))?);
        check_gt_dims(sample, gt.width(), gt.height())?;
        let gen = load_image(&gen_path)?;
        let pred = decode_normals(&resize_bilinear(&gen, gt.width(), gt.height())?);
        subset_ids.push(sample.sample_id.clone());
        pairs.push((pred, gt));
    }
    if pairs.is_empty() {
        return Err(Error::Validation(
            "no manifest sample has a generated output to calibrate on".to_string(),
        ));
    }
    let (convention, table) = calibrate_convention(&pairs)?;
    let record = CalibrationRecord {
        model_id: config.model_id.clone(),
        dataset_id,
        subset: subset_ids,
        convention,
        mean_deg: table[convention.index()],
        table,
    };
    record.store(&config.calibration_cache)?;
    Ok(record)
}

/// Pooled-error accumulator for normals. Counts merge exactly, so the pooled
/// median, threshold percentages, and pixel count are independent of merge
/// order; the floating-point error sum is reduced sequentially in sample
/// order by the caller.
struct NormalsPartial {
    sum_deg: f64,
    count: u64,
    below_11: u64,
    below_22: u64,
    below_30: u64,
}

/// Histogram resolution for the pooled median, degrees per bin.
const HIST_BIN_DEG: f64 = 0.001;
const HIST_BINS: usize = 180_001;

fn hist_bin(err_deg: f64) -> usize {
    ((err_deg * 1000.0).floor() as usize).min(HIST_BINS - 1)
}

/// Value of the 0-based `k`-th smallest pooled error, as its bin midpoint.
fn hist_order_stat(hist: &[u64], k: u64) -> f64 {
    let mut cum = 0u64;
    for (i, &c) in hist.iter().enumerate() {
        cum += c;
        if cum > k {
            return (i as f64 + 0.5) * HIST_BIN_DEG;
        }
    }
    180.0
}

enum Payload {
    None,
    Depth,
    Normals(NormalsPartial),
    Seg(ConfusionMatrix),
}

struct Outcome {
    record: SampleRecord,
    payload: Payload,
}

struct EvalContext<'a> {
    config: &'a EvalConfig,
    convention: Option<crate::normals::AxisConvention>,
    palette: Option<Palette>,
    space19: LabelSpace,
    space7: LabelSpace,
    seg_classes: usize,
    /// Dataset-wide angular-error histogram; per-sample counts merge under a
    /// short lock, exactly and in any order.
    hist: Option<&'a Mutex<Vec<u64>>>,
}

fn failed(sample_id: &str, flag: String) -> Outcome {
    Outcome {
        record: SampleRecord {
            sample_id: sample_id.to_string(),
            status: SampleStatus::Failed,
            flags: vec![flag],
            metrics: None,
        },
        payload: Payload::None,
    }
}

fn evaluate_sample(ctx: &EvalContext, sample: &PreparedSample) -> Result<Outcome> {
    let config = ctx.config;
    let Some(gen_path) = generated_path(&config.generated_dir, &sample.sample_id) else {
        return Ok(Outcome {
            record: SampleRecord {
                sample_id: sample.sample_id.clone(),
                status: SampleStatus::Missing,
                flags: vec![],
                metrics: None,
            },
            payload: Payload::None,
        });
    };
    // A broken generated image marks the sample failed; a broken prepared
    // dataset aborts the run.
    let gen = match load_image(&gen_path) {
        Ok(img) => img,
        Err(err) => return Ok(failed(&sample.sample_id, format!("unreadable: {err}"))),
    };
    match config.task {
        Task::Depth => {
            let gt = load_gt_depth(&config.prepared_dir, sample)?;
            check_gt_dims(sample, gt.width(), gt.height())?;
            let gt = restrict_gt_depth(gt, config);
            let pred = decode_luminance(&resize_bilinear(&gen, gt.width(), gt.height())?);
            let mut flags = Vec::new();
            let (fit, aligned) = match affine_align(&pred, &gt) {
                Ok((fit, aligned)) => (fit, aligned),
                Err(Error::DegenerateFit { fallback }) => {
                    flags.push("degenerate_fit".to_string());
                    (fallback, fallback.apply(&pred))
                }
                Err(Error::NoValidPixels) => {
                    return Ok(failed(&sample.sample_id, "no_joint_pixels".to_string()))
                }
                Err(Error::TooFewPixels { .. }) => {
                    return Ok(failed(&sample.sample_id, "too_few_pixels".to_string()))
                }
                Err(err) => return Err(err),
            };
            let m = depth_metrics(&aligned, &gt)?;
            Ok(Outcome {
                record: SampleRecord {
                    sample_id: sample.sample_id.clone(),
                    status: SampleStatus::Scored,
                    flags,
                    metrics: Some(SampleMetrics::Depth {
                        delta1: round_sig6(m.delta1),
                        absrel: round_sig6(m.absrel),
                        rmse: round_sig6(m.rmse),
                        fit_scale: round_sig6(fit.scale),
                        fit_offset: round_sig6(fit.offset),
                        n_pixels: fit.n_pixels,
                    }),
                },
                payload: Payload::Depth,
            })
        }
        Task::Normals => {
            let gt = decode_normals(&load_image(&config.prepared_dir.join(&sample.gt_path))?);
            check_gt_dims(sample, gt.width(), gt.height())?;
            let pred = decode_normals(&resize_bilinear(&gen, gt.width(), gt.height())?);
            let convention = ctx.convention.expect("set before normals evaluation");
            let pred = apply_convention(&pred, convention);
            let errors = angular_error(&pred, &gt)?;
            if errors.is_empty() {
                return Ok(failed(&sample.sample_id, "no_joint_pixels".to_string()));
            }
            let m = normal_metrics(&errors)?;
            let mut partial = NormalsPartial {
                sum_deg: 0.0,
                count: errors.len() as u64,
                below_11: 0,
                below_22: 0,
                below_30: 0,
            };
            let mut local_hist = vec![0u64; HIST_BINS];
            for &e in &errors {
                partial.sum_deg += e;
                if e < 11.25 {
                    partial.below_11 += 1;
                }
                if e < 22.5 {
                    partial.below_22 += 1;
                }
                if e < 30.0 {
                    partial.below_30 += 1;
                }
                local_hist[hist_bin(e)] += 1;
            }
            if let Some(hist) = ctx.hist {
                let mut shared = hist.lock().expect("histogram lock");
                for (s, l) in shared.iter_mut().zip(&local_hist) {
                    *s += l;
                }
            }
            Ok(Outcome {
                record: SampleRecord {
                    sample_id: sample.sample_id.clone(),
                    status: SampleStatus::Scored,
                    flags: vec![],
                    metrics: Some(SampleMetrics::Normals {
                        mean_deg: round_sig6(m.mean_deg),
                        median_deg: round_sig6(m.median_deg),
                        a11: round_sig6(m.a11),
                        a22: round_sig6(m.a22),
                        a30: round_sig6(m.a30),
                        n_pixels: errors.len(),
                    }),
                },
                payload: Payload::Normals(partial),
            })
        }
        Task::Seg19 | Task::Seg7 => {
            let gt = load_labels(&config.prepared_dir.join(&sample.gt_path))?;
            check_gt_dims(sample, gt.width(), gt.height())?;
            let (gt, space) = if config.task == Task::Seg7 {
                (group_to_categories(&gt, &ctx.space19)?, &ctx.space7)
            } else {
                (gt, &ctx.space19)
            };
            let palette = ctx.palette.as_ref().expect("set before seg evaluation");
            let prompted = oracle_class_list(&gt, space)?;
            if prompted.is_empty() {
                return Ok(failed(&sample.sample_id, "no_evaluated_pixels".to_string()));
            }
            let pred_img = resize_nearest(&gen, gt.width(), gt.height())?;
            let pred = decode_palette(&pred_img, &prompted, palette)?;
            let mut confusion = ConfusionMatrix::new(ctx.seg_classes);
            accumulate_confusion(&pred, &gt, &mut confusion)?;
            let m = seg_metrics(&confusion)?;
            Ok(Outcome {
                record: SampleRecord {
                    sample_id: sample.sample_id.clone(),
                    status: SampleStatus::Scored,
                    flags: vec![],
                    metrics: Some(SampleMetrics::Seg {
                        miou: round_sig6(m.miou),
                        pixel_acc: round_sig6(m.pixel_acc),
                        n_pixels: confusion.total() as usize,
                    }),
                },
                payload: Payload::Seg(confusion),
            })
        }
    }
}

fn sorted_manifest(config: &EvalConfig) -> Result<Vec<PreparedSample>> {
    let mut samples = read_manifest(&config.prepared_dir.join("manifest.jsonl"))?;
    if samples.is_empty() {
        return Err(Error::Validation("manifest has no samples".to_string()));
    }
    samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    for pair in samples.windows(2) {
        if pair[0].sample_id == pair[1].sample_id {
            return Err(Error::Validation(format!(
                "duplicate sample_id {} in manifest",
                pair[0].sample_id
            )));
        }
    }
    for sample in &samples {
        if !config.task.accepts(sample.gt_kind) {
            return Err(Error::Validation(format!(
                "task {} cannot evaluate {:?} ground truth (sample {})",
                config.task.name(),
                sample.gt_kind,
                sample.sample_id
            )));
        }
    }
    Ok(samples)
}

fn dataset_id_of(samples: &[PreparedSample]) -> Result<String> {
    let id = samples[0].dataset_id.clone();
    if let Some(other) = samples.iter().find(|s| s.dataset_id != id) {
        return Err(Error::Validation(format!(
            "manifest mixes dataset ids {} and {}",
            id, other.dataset_id
        )));
    }
    Ok(id)
}

fn run_in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Scores every manifest sample against its generated output and assembles
/// the report. Missing or failed samples are excluded from aggregates but
/// always counted in the report metadata.
pub fn evaluate(config: &EvalConfig) -> Result<Report> {
    if config.crop.is_some() && config.task != Task::Depth {
        return Err(Error::Validation(
            "evaluation crop applies to the depth task only".to_string(),
        ));
    }
    if let Some((lo, hi)) = config.depth_cap {
        if config.task != Task::Depth {
            return Err(Error::Validation(
                "depth caps apply to the depth task only".to_string(),
            ));
        }
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Validation(format!(
                "depth cap must satisfy 0 < min < max, got [{lo}, {hi}]"
            )));
        }
    }
    let samples = sorted_manifest(config)?;
    let dataset_id = dataset_id_of(&samples)?;

    let mut calibration_record = None;
    let convention = if config.task == Task::Normals {
        let record = match CalibrationRecord::load(
            &config.calibration_cache,
            &config.model_id,
            &dataset_id,
        )? {
            Some(record) => record,
            None => calibrate(config, false)?,
        };
        let convention = record.convention;
        calibration_record = Some(record);
        Some(convention)
    } else {
        None
    };
    let palette = match config.task {
        Task::Seg19 => Some(cityscapes19_palette()),
        Task::Seg7 => Some(categories7_palette()),
        _ => None,
    };
    let hist = Mutex::new(vec![0u64; HIST_BINS]);
    let ctx = EvalContext {
        config,
        convention,
        seg_classes: match config.task {
            Task::Seg7 => 7,
            _ => 19,
        },
        palette,
        space19: LabelSpace::cityscapes19(),
        space7: LabelSpace::cityscapes_categories7(),
        hist: (config.task == Task::Normals).then_some(&hist),
    };

    let outcomes: Vec<Outcome> = run_in_pool(config.jobs, || {
        samples
            .par_iter()
            .map(|sample| evaluate_sample(&ctx, sample))
            .collect::<Result<Vec<Outcome>>>()
    })??;

    let mut records = Vec::with_capacity(outcomes.len());
    let mut n_scored = 0;
    let mut n_missing = 0;
    let mut n_failed = 0;
    let mut depth_sums = (0.0, 0.0, 0.0, 0u64);
    let mut normals_sum = (0.0, 0u64, 0u64, 0u64, 0u64);
    let mut dataset_confusion = ConfusionMatrix::new(ctx.seg_classes);
    for outcome in outcomes {
        match outcome.record.status {
            SampleStatus::Scored => n_scored += 1,
            SampleStatus::Missing => n_missing += 1,
            SampleStatus::Failed => n_failed += 1,
        }
        match &outcome.payload {
            Payload::Depth => {
                if let Some(SampleMetrics::Depth {
                    delta1,
                    absrel,
                    rmse,
                    ..
                }) = &outcome.record.metrics
                {
                    depth_sums.0 += delta1;
                    depth_sums.1 += absrel;
                    depth_sums.2 += rmse;
                    depth_sums.3 += 1;
                }
            }
            Payload::Normals(p) => {
                normals_sum.0 += p.sum_deg;
                normals_sum.1 += p.count;
                normals_sum.2 += p.below_11;
                normals_sum.3 += p.below_22;
                normals_sum.4 += p.below_30;
            }
            Payload::Seg(confusion) => dataset_confusion.merge(confusion)?,
            Payload::None => {}
        }
        records.push(outcome.record);
    }

    let aggregate = match config.task {
        Task::Depth => {
            let n = depth_sums.3;
            (n > 0).then(|| AggregateMetrics::Depth {
                delta1: round_sig6(depth_sums.0 / n as f64),
                absrel: round_sig6(depth_sums.1 / n as f64),
                rmse: round_sig6(depth_sums.2 / n as f64),
            })
        }
        Task::Normals => {
            let n = normals_sum.1;
            if n == 0 {
                None
            } else {
                let hist = std::mem::take(&mut *hist.lock().expect("histogram lock"));
                let median = if n % 2 == 1 {
                    hist_order_stat(&hist, n / 2)
                } else {
                    (hist_order_stat(&hist, n / 2 - 1) + hist_order_stat(&hist, n / 2)) / 2.0
                };
                let pct = |c: u64| round_sig6(c as f64 / n as f64 * 100.0);
                Some(AggregateMetrics::Normals {
                    mean_deg: round_sig6(normals_sum.0 / n as f64),
                    median_deg: round_sig6(median),
                    a11: pct(normals_sum.2),
                    a22: pct(normals_sum.3),
                    a30: pct(normals_sum.4),
                    pooled_pixels: n as usize,
                })
            }
        }
        Task::Seg19 | Task::Seg7 => {
            if dataset_confusion.total() == 0 {
                None
            } else {
                let m = seg_metrics(&dataset_confusion)?;
                let side = ctx.seg_classes + 1;
                let confusion: Vec<Vec<u64>> = (0..side)
                    .map(|g| (0..side).map(|p| dataset_confusion.count(g, p)).collect())
                    .collect();
                Some(AggregateMetrics::Seg {
                    miou: round_sig6(m.miou),
                    pixel_acc: round_sig6(m.pixel_acc),
                    per_class_iou: m
                        .per_class_iou
                        .iter()
                        .map(|&(class_id, iou)| PerClassIou {
                            class_id,
                            iou: iou.map(round_sig6),
                        })
                        .collect(),
                    confusion,
                })
            }
        }
    };

    Ok(Report {
        tool: format!("denseprobe {}", env!("CARGO_PKG_VERSION")),
        task: config.task,
        aggregation: config.task.aggregation().to_string(),
        palette_version: ctx.palette.as_ref().map(|p| p.version().to_string()),
        calibration: calibration_record.map(|r| CalibrationEcho {
            convention_index: r.convention.index(),
            perm: r.convention.perm(),
            signs: r.convention.signs(),
            subset: r.subset,
            subset_mean_deg: round_sig6(r.mean_deg),
        }),
        config: ConfigEcho {
            model_id: config.model_id.clone(),
            dataset_id,
            prepared_dir: config.prepared_dir.display().to_string(),
            generated_dir: config.generated_dir.display().to_string(),
            crop: config.crop.map(|EvalCrop::Eigen| "eigen".to_string()),
            depth_cap: config.depth_cap.map(|(lo, hi)| [lo, hi]),
        },
        n_samples: samples.len(),
        n_scored,
        n_missing,
        n_failed,
        per_sample: records,
        aggregate,
    })
}

/// One pass/fail line of the end-to-end self test.
#[derive(Debug, Clone)]
pub struct SelftestCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Runs the end-to-end oracle: synthetic datasets whose "generated" outputs
/// are the encoded ground truth, routed through 8-bit PNGs. Depth must score
/// a perfect δ₁ with sub-percent AbsRel, normals must stay under 1° mean
/// error, and segmentation must reach mIoU 1.0 exactly.
pub fn selftest(work: &Path) -> Result<Vec<SelftestCheck>> {
    use crate::datasets::{synth_batch, SynthBatchSpec, SynthTask};

    let mut checks = Vec::new();
    let make_dirs = |name: &str| -> Result<(PathBuf, PathBuf, PathBuf)> {
        let base = work.join(name);
        let gen = base.join("generated");
        std::fs::create_dir_all(&gen)
            .map_err(|e| Error::io(format!("creating {}", gen.display()), e))?;
        Ok((base.join("prepared"), gen, base.join("cache")))
    };

    {
        let (prepared, gen, cache) = make_dirs("depth")?;
        let spec = SynthBatchSpec {
            task: SynthTask::Depth,
            count: 6,
            width: 64,
            height: 48,
            seed: 11,
            dataset_id: None,
        };
        let samples = synth_batch(&spec, &prepared)?;
        for s in &samples {
            let gt = read_dcf32(&prepared.join(&s.gt_path))?;
            let img = crate::depth::encode_depth_gray(&gt)?;
            save_image(&img, &gen.join(format!("{}.png", s.sample_id)))?;
        }
        let report = evaluate(&EvalConfig::new(
            Task::Depth,
            "selftest",
            &prepared,
            &gen,
            cache,
        ))?;
        let (pass, detail) = match report.aggregate {
            Some(AggregateMetrics::Depth { delta1, absrel, .. }) => (
                delta1 == 1.0 && absrel < 0.01,
                format!(
                    "delta1={} absrel={}",
                    format_sig6(delta1),
                    format_sig6(absrel)
                ),
            ),
            _ => (false, "no aggregate".to_string()),
        };
        checks.push(SelftestCheck {
            name: "depth round trip: delta1 = 1.0, absrel < 0.01".to_string(),
            pass,
            detail,
        });
    }

    {
        let (prepared, gen, cache) = make_dirs("normals")?;
        let spec = SynthBatchSpec {
            task: SynthTask::Normals,
            count: 6,
            width: 64,
            height: 48,
            seed: 22,
            dataset_id: None,
        };
        let samples = synth_batch(&spec, &prepared)?;
        for s in &samples {
            std::fs::copy(
                prepared.join(&s.gt_path),
                gen.join(format!("{}.png", s.sample_id)),
            )
            .map_err(|e| Error::io(format!("copying {}", s.gt_path), e))?;
        }
        let report = evaluate(&EvalConfig::new(
            Task::Normals,
            "selftest",
            &prepared,
            &gen,
            cache,
        ))?;
        let (pass, detail) = match report.aggregate {
            Some(AggregateMetrics::Normals { mean_deg, .. }) => (
                mean_deg < 1.0,
                format!("mean_deg={}", format_sig6(mean_deg)),
            ),
            _ => (false, "no aggregate".to_string()),
        };
        checks.push(SelftestCheck {
            name: "normals round trip: mean error < 1 degree".to_string(),
            pass,
            detail,
        });
    }

    {
        let (prepared, gen, cache) = make_dirs("seg")?;
        let spec = SynthBatchSpec {
            task: SynthTask::Seg,
            count: 6,
            width: 64,
            height: 48,
            seed: 33,
            dataset_id: None,
        };
        let samples = synth_batch(&spec, &prepared)?;
        let palette = cityscapes19_palette();
        for s in &samples {
            let gt = load_labels(&prepared.join(&s.gt_path))?;
            let img = crate::segmentation::encode_labels(&gt, &palette)?;
            save_image(&img, &gen.join(format!("{}.png", s.sample_id)))?;
        }
        let report = evaluate(&EvalConfig::new(
            Task::Seg19,
            "selftest",
            &prepared,
            &gen,
            cache,
        ))?;
        let (pass, detail) = match report.aggregate {
            Some(AggregateMetrics::Seg { miou, .. }) => {
                (miou == 1.0, format!("miou={}", format_sig6(miou)))
            }
            _ => (false, "no aggregate".to_string()),
        };
        checks.push(SelftestCheck {
            name: "segmentation round trip: mIoU = 1.0".to_string(),
            pass,
            detail,
        });
    }

    Ok(checks)
}
