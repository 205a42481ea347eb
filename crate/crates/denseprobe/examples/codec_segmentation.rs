//! Segmentation round trip: build the color-coded prompt for the classes in
//! an image, render the label map in palette colors, decode by nearest
//! palette color, and score with a confusion matrix.

use denseprobe::label::{LabelMap, LabelSpace};
use denseprobe::segmentation::{
    accumulate_confusion, build_prompt, cityscapes19_palette, decode_palette, encode_labels,
    oracle_class_list, seg_metrics, ConfusionMatrix, PromptGranularity,
};

fn main() -> denseprobe::Result<()> {
    // A toy street scene: sky above, building mid, road below, a car.
    let gt = LabelMap::from_fn(64, 48, |x, y| match (x, y) {
        (_, y) if y < 16 => 10,           // sky
        (_, y) if y < 32 => 2,            // building
        (x, y) if y < 40 && x > 40 => 13, // car
        _ => 0,                           // road
    });

    let palette = cityscapes19_palette();
    let space = LabelSpace::cityscapes19();
    let classes = oracle_class_list(&gt, &space)?;
    let prompt = build_prompt(&classes, &palette, PromptGranularity::Classes19)?;
    println!("prompt: {prompt}");

    // A perfectly palette-following model would return exactly this image.
    let generated = encode_labels(&gt, &palette)?;
    let decoded = decode_palette(&generated, &classes, &palette)?;

    let mut confusion = ConfusionMatrix::new(19);
    accumulate_confusion(&decoded, &gt, &mut confusion)?;
    let m = seg_metrics(&confusion)?;
    println!("mIoU {:.4}  pixel accuracy {:.4}", m.miou, m.pixel_acc);
    for (id, iou) in &m.per_class_iou {
        if let Some(iou) = iou {
            let name = &space.class(*id).unwrap().name;
            println!("  class {id:2} {name:<10} IoU {iou:.4}");
        }
    }
    Ok(())
}
