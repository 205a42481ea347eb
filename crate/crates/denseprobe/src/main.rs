//! Command-line front end. All logic lives in the library; this binary
//! parses arguments, resolves defaults, and maps errors to exit codes:
//! 0 success, 1 validation failure, 2 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use denseprobe::datasets::{
    ingest_cityscapes, ingest_diode, ingest_nyuv2_depth, ingest_nyuv2_normals, official_spec,
    synth_batch, validate_against_spec, DiodeSplit, PreparedSample, SynthBatchSpec,
};
use denseprobe::runner::{
    calibrate, emit_report, evaluate, format_sig6, selftest, task_prompt, AggregateMetrics,
    EvalConfig, EvalCrop, ReportFormat, Task, CACHE_DIR_ENV,
};
use denseprobe::{Error, Result};

#[derive(Parser)]
#[command(
    name = "denseprobe",
    version,
    about = "Prompt-and-decode evaluation of image-editing models on dense prediction tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an official dataset distribution into the prepared layout.
    Prepare {
        /// One of: nyuv2_depth, nyuv2_normals, diode_indoor, diode_outdoor,
        /// cityscapes.
        dataset: String,
        /// Root of the extracted official distribution.
        #[arg(long)]
        root: PathBuf,
        /// Output directory for the prepared dataset.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the instruction text sent to a model for a task.
    Prompt {
        /// depth, normals, seg19, or seg7.
        #[arg(long)]
        task: String,
        /// Comma-separated class ids present in the image (segmentation
        /// tasks only), e.g. --classes 0,8,10.
        #[arg(long)]
        classes: Option<String>,
    },
    /// Fit the normal-map axis convention for a (model, dataset) pair.
    Calibrate {
        /// Must be "normals".
        #[arg(long)]
        task: String,
        #[arg(long)]
        model: String,
        /// Prepared dataset directory.
        #[arg(long)]
        dataset: PathBuf,
        /// Directory of generated images named <sample_id>.png.
        #[arg(long)]
        generated: PathBuf,
        /// Calibration cache directory; defaults to $DENSEPROBE_CACHE.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Recompute even when a cached record exists.
        #[arg(long)]
        force: bool,
    },
    /// Score generated images against a prepared dataset and write a report.
    Evaluate {
        /// depth, normals, seg19, or seg7.
        #[arg(long)]
        task: String,
        #[arg(long)]
        model: String,
        /// Prepared dataset directory.
        #[arg(long)]
        dataset: PathBuf,
        /// Directory of generated images named <sample_id>.png.
        #[arg(long)]
        generated: PathBuf,
        /// Report output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        jobs: Option<usize>,
        /// Evaluation crop; only "eigen" is defined (depth task).
        #[arg(long)]
        crop: Option<String>,
        /// Restrict ground-truth depth to [MIN, MAX] meters.
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
        depth_cap: Option<Vec<f64>>,
        /// Calibration cache directory; defaults to $DENSEPROBE_CACHE.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Render a synthetic dataset from a JSON batch spec.
    Synth {
        /// JSON file: {"task": "depth"|"normals"|"seg", "count": N,
        /// "width": W, "height": H, "seed": S}.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for the prepared dataset.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the end-to-end oracle on synthetic data and print one line per
    /// check.
    Selftest,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            err.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn cache_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("calibration-cache"))
}

fn parse_classes(text: &str) -> Result<Vec<u8>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<u8>()
                .map_err(|_| Error::Validation(format!("class id {t:?} is not an integer")))
        })
        .collect()
}

fn report_counts(samples: &[PreparedSample], dataset: &str, out: &Path, warnings: &[String]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
    if let Some(spec) = official_spec(dataset) {
        for warning in validate_against_spec(samples, &spec) {
            eprintln!("warning: {warning}");
        }
    }
    println!("prepared {} samples in {}", samples.len(), out.display());
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Prepare { dataset, root, out } => {
            match dataset.as_str() {
                "nyuv2_depth" => {
                    let samples = ingest_nyuv2_depth(&root, &out, None)?;
                    report_counts(&samples, &dataset, &out, &[]);
                }
                "nyuv2_normals" => {
                    let samples = ingest_nyuv2_normals(&root, &out, None)?;
                    report_counts(&samples, &dataset, &out, &[]);
                }
                "diode_indoor" => {
                    let samples = ingest_diode(&root, DiodeSplit::Indoor, &out)?;
                    report_counts(&samples, &dataset, &out, &[]);
                }
                "diode_outdoor" => {
                    let samples = ingest_diode(&root, DiodeSplit::Outdoor, &out)?;
                    report_counts(&samples, &dataset, &out, &[]);
                }
                "cityscapes" => {
                    let (samples, warnings) = ingest_cityscapes(&root, &out)?;
                    report_counts(&samples, &dataset, &out, &warnings);
                }
                other => {
                    return Err(Error::Validation(format!(
                        "unknown dataset {other:?}; expected nyuv2_depth, nyuv2_normals, \
                         diode_indoor, diode_outdoor, or cityscapes"
                    )))
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Prompt { task, classes } => {
            let task: Task = task.parse()?;
            let classes = classes.as_deref().map(parse_classes).transpose()?;
            println!("{}", task_prompt(task, classes.as_deref())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Calibrate {
            task,
            model,
            dataset,
            generated,
            cache,
            force,
        } => {
            let task: Task = task.parse()?;
            let config = EvalConfig::new(task, model, dataset, generated, cache_dir(cache));
            let record = calibrate(&config, force)?;
            let perm = record.convention.perm();
            let signs = record.convention.signs();
            println!(
                "convention {} (perm {},{},{} signs {},{},{}) mean error {} deg over {} samples",
                record.convention.index(),
                perm[0],
                perm[1],
                perm[2],
                signs[0],
                signs[1],
                signs[2],
                format_sig6(record.mean_deg),
                record.subset.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            task,
            model,
            dataset,
            generated,
            out,
            format,
            jobs,
            crop,
            depth_cap,
            cache,
        } => {
            let task: Task = task.parse()?;
            let format = match format.as_str() {
                "json" => ReportFormat::Json,
                "csv" => ReportFormat::Csv,
                other => {
                    return Err(Error::Validation(format!(
                        "unknown format {other:?}; expected json or csv"
                    )))
                }
            };
            let mut config = EvalConfig::new(task, model, dataset, generated, cache_dir(cache));
            config.jobs = jobs.unwrap_or(0);
            config.crop = match crop.as_deref() {
                None => None,
                Some("eigen") => Some(EvalCrop::Eigen),
                Some(other) => {
                    return Err(Error::Validation(format!(
                        "unknown crop {other:?}; only \"eigen\" is defined"
                    )))
                }
            };
            config.depth_cap = depth_cap.map(|v| (v[0], v[1]));
            let report = evaluate(&config)?;
            emit_report(&report, &out, format)?;
            println!(
                "scored {}/{} samples ({} missing, {} failed)",
                report.n_scored, report.n_samples, report.n_missing, report.n_failed
            );
            match &report.aggregate {
                Some(AggregateMetrics::Depth {
                    delta1,
                    absrel,
                    rmse,
                }) => println!(
                    "delta1 {}  absrel {}  rmse {}",
                    format_sig6(*delta1),
                    format_sig6(*absrel),
                    format_sig6(*rmse)
                ),
                Some(AggregateMetrics::Normals {
                    mean_deg,
                    median_deg,
                    a11,
                    a22,
                    a30,
                    ..
                }) => println!(
                    "mean {} deg  median {} deg  A11 {}  A22 {}  A30 {}",
                    format_sig6(*mean_deg),
                    format_sig6(*median_deg),
                    format_sig6(*a11),
                    format_sig6(*a22),
                    format_sig6(*a30)
                ),
                Some(AggregateMetrics::Seg {
                    miou, pixel_acc, ..
                }) => println!(
                    "mIoU {}  pixel acc {}",
                    format_sig6(*miou),
                    format_sig6(*pixel_acc)
                ),
                None => println!("no samples scored; no aggregate"),
            }
            println!("report written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { spec, out } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| Error::io(format!("reading {}", spec.display()), e))?;
            let spec: SynthBatchSpec = serde_json::from_str(&text)?;
            let samples = synth_batch(&spec, &out)?;
            println!(
                "rendered {} scenes into {} (dataset_id {})",
                samples.len(),
                out.display(),
                spec.dataset_id()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => {
            let work =
                std::env::temp_dir().join(format!("denseprobe-selftest-{}", std::process::id()));
            std::fs::create_dir_all(&work)
                .map_err(|e| Error::io(format!("creating {}", work.display()), e))?;
            let checks = selftest(&work);
            std::fs::remove_dir_all(&work).ok();
            let checks = checks?;
            let mut all_pass = true;
            for check in &checks {
                let verdict = if check.pass { "PASS" } else { "FAIL" };
                all_pass &= check.pass;
                println!("{verdict}  {} ({})", check.name, check.detail);
            }
            if all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}
