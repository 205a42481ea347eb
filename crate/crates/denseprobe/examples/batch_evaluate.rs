//! Full evaluation pipeline on synthetic data: prepare a dataset, stand in
//! for a model by writing generated images, then run the batch evaluator and
//! emit a deterministic report.
//!
//! The stand-in model here is deliberately imperfect: it returns the encoded
//! ground truth for most samples, skips one, and returns a constant gray
//! image for another, exercising the missing and degenerate paths a real
//! model run produces.

use denseprobe::datasets::{read_dcf32, synth_batch, SynthBatchSpec, SynthTask};
use denseprobe::depth::encode_depth_gray;
use denseprobe::io::save_image;
use denseprobe::raster::RasterImage;
use denseprobe::runner::{emit_report, evaluate, EvalConfig, ReportFormat, Task};

fn main() -> denseprobe::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let prepared = dir.path().join("prepared");
    let generated = dir.path().join("generated");
    std::fs::create_dir_all(&generated).expect("generated dir");

    let batch = SynthBatchSpec {
        task: SynthTask::Depth,
        count: 5,
        width: 64,
        height: 48,
        seed: 99,
        dataset_id: None,
    };
    let samples = synth_batch(&batch, &prepared)?;

    for (i, sample) in samples.iter().enumerate() {
        let out = generated.join(format!("{}.png", sample.sample_id));
        match i {
            3 => {} // model produced nothing for this sample
            4 => {
                // constant gray: no depth signal, the affine fit degenerates
                let gray = RasterImage::from_fn(64, 48, |_, _| [0.5, 0.5, 0.5]);
                save_image(&gray, &out)?;
            }
            _ => {
                let gt = read_dcf32(&prepared.join(&sample.gt_path))?;
                save_image(&encode_depth_gray(&gt)?, &out)?;
            }
        }
    }

    let config = EvalConfig::new(
        Task::Depth,
        "standin-model",
        &prepared,
        &generated,
        dir.path().join("cache"),
    );
    let report = evaluate(&config)?;
    for row in &report.per_sample {
        println!(
            "{}  {:?}  flags: {}",
            row.sample_id,
            row.status,
            if row.flags.is_empty() {
                "-".to_string()
            } else {
                row.flags.join(",")
            }
        );
    }

    let out_path = dir.path().join("report.json");
    emit_report(&report, &out_path, ReportFormat::Json)?;
    let json = std::fs::read_to_string(&out_path).expect("report bytes");
    println!("\n{json}");
    Ok(())
}
