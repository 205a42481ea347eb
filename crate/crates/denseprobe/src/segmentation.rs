//! Oracle-prompt construction, palette codec, and segmentation metrics.
//!
//! The palette is the single source of truth for both prompt text and
//! decoding: the same table that names each class color also anchors the
//! nearest-color decoder, so the instruction given to a model and the rule
//! used to score it can never diverge.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::{LabelMap, LabelSpace, IGNORE_LABEL};
use crate::raster::RasterImage;

/// Label value for pixels decoded as the absorbing black background. Distinct
/// from [`IGNORE_LABEL`]: background is a real (and always wrong) prediction,
/// ignore marks unlabeled ground truth that is skipped entirely.
pub const BACKGROUND_LABEL: u8 = 254;

/// Smallest allowed Euclidean distance, in byte units, between any two
/// palette colors (background included). Half of this is the decoding
/// robustness radius.
pub const MIN_PALETTE_DISTANCE: f64 = 32.0;

/// One palette row: a class, the color name used in prompts, the RGB anchor
/// used for decoding, and the noun phrase that names the class in a prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaletteEntry {
    pub id: u8,
    pub class_name: String,
    pub color_name: String,
    pub rgb: [u8; 3],
    pub prompt_phrase: String,
}

/// Versioned class→color table with an implicit black background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    version: String,
    entries: Vec<PaletteEntry>,
}

fn dist2(a: [u8; 3], b: [u8; 3]) -> u32 {
    let d = |x: u8, y: u8| {
        let diff = x as i32 - y as i32;
        (diff * diff) as u32
    };
    d(a[0], b[0]) + d(a[1], b[1]) + d(a[2], b[2])
}

impl Palette {
    /// Validates ids (unique, below the background/ignore sentinels) and color
    /// separation (pairwise distance at least [`MIN_PALETTE_DISTANCE`],
    /// background included). Entries are kept sorted by id.
    pub fn new(version: impl Into<String>, mut entries: Vec<PaletteEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("palette entries"));
        }
        entries.sort_by_key(|e| e.id);
        for pair in entries.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::PaletteInvariant(format!(
                    "duplicate class id {}",
                    pair[0].id
                )));
            }
        }
        let min_d2 = (MIN_PALETTE_DISTANCE * MIN_PALETTE_DISTANCE) as u32;
        for (i, entry) in entries.iter().enumerate() {
            if entry.id >= BACKGROUND_LABEL {
                return Err(Error::PaletteInvariant(format!(
                    "class id {} collides with a reserved label",
                    entry.id
                )));
            }
            if dist2(entry.rgb, [0, 0, 0]) < min_d2 {
                return Err(Error::PaletteInvariant(format!(
                    "color of class {} too close to the black background",
                    entry.id
                )));
            }
            for other in &entries[i + 1..] {
                if dist2(entry.rgb, other.rgb) < min_d2 {
                    return Err(Error::PaletteInvariant(format!(
                        "colors of classes {} and {} closer than {} byte units",
                        entry.id, other.id, MIN_PALETTE_DISTANCE
                    )));
                }
            }
        }
        Ok(Self {
            version: version.into(),
            entries,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Entries in ascending class-id order.
    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn entry(&self, id: u8) -> Option<&PaletteEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn color_of(&self, id: u8) -> Option<[u8; 3]> {
        self.entry(id).map(|e| e.rgb)
    }

    /// All class ids, ascending.
    pub fn ids(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.id).collect()
    }

    /// Minimum pairwise color distance, background included.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut min = u32::MAX;
        for (i, entry) in self.entries.iter().enumerate() {
            min = min.min(dist2(entry.rgb, [0, 0, 0]));
            for other in &self.entries[i + 1..] {
                min = min.min(dist2(entry.rgb, other.rgb));
            }
        }
        (min as f64).sqrt()
    }

    /// Writes the table as tab-separated text with a version header. The row
    /// order is stable (ascending class id), so the bytes are reproducible.
    pub fn to_file(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("# denseprobe palette\n");
        let _ = writeln!(out, "# version: {}", self.version);
        out.push_str("# columns: id\tclass_name\tcolor_name\tR\tG\tB\tprompt_phrase\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.id, e.class_name, e.color_name, e.rgb[0], e.rgb[1], e.rgb[2], e.prompt_phrase
            );
        }
        std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let fmt_err = |reason: String| Error::Format {
            path: path.display().to_string(),
            reason,
        };
        let mut version = None;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("version:") {
                    version = Some(v.trim().to_string());
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 7 {
                return Err(fmt_err(format!(
                    "line {}: expected 7 tab-separated columns, got {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            let parse = |s: &str| -> Result<u8> {
                s.parse()
                    .map_err(|_| fmt_err(format!("line {}: invalid byte value {s:?}", lineno + 1)))
            };
            entries.push(PaletteEntry {
                id: parse(cols[0])?,
                class_name: cols[1].to_string(),
                color_name: cols[2].to_string(),
                rgb: [parse(cols[3])?, parse(cols[4])?, parse(cols[5])?],
                prompt_phrase: cols[6].to_string(),
            });
        }
        let version = version.ok_or_else(|| fmt_err("missing '# version:' header".into()))?;
        Palette::new(version, entries)
    }
}

fn entry(
    id: u8,
    class_name: &str,
    color_name: &str,
    rgb: [u8; 3],
    prompt_phrase: &str,
) -> PaletteEntry {
    PaletteEntry {
        id,
        class_name: class_name.into(),
        color_name: color_name.into(),
        rgb,
        prompt_phrase: prompt_phrase.into(),
    }
}

/// Shipped palette for the 19 Cityscapes train classes. Color names are
/// everyday words whose conventional RGB values are mutually well separated
/// (minimum pairwise distance 40, minimum distance to black 128).
pub fn cityscapes19_palette() -> Palette {
    Palette::new(
        "cityscapes19-v1",
        vec![
            entry(0, "road", "red", [255, 0, 0], "the road"),
            entry(1, "sidewalk", "purple", [128, 0, 128], "the sidewalk"),
            entry(2, "building", "gray", [128, 128, 128], "the buildings"),
            entry(3, "wall", "brown", [139, 69, 19], "the walls"),
            entry(4, "fence", "tan", [210, 180, 140], "the fences"),
            entry(5, "pole", "yellow", [255, 255, 0], "the poles"),
            entry(
                6,
                "traffic light",
                "orange",
                [255, 165, 0],
                "the traffic lights",
            ),
            entry(
                7,
                "traffic sign",
                "gold",
                [255, 215, 0],
                "the traffic signs",
            ),
            entry(8, "vegetation", "green", [0, 128, 0], "the vegetation"),
            entry(9, "terrain", "lime", [0, 255, 0], "the terrain"),
            entry(10, "sky", "sky blue", [135, 206, 235], "the sky"),
            entry(11, "person", "pink", [255, 192, 203], "the people"),
            entry(12, "rider", "crimson", [220, 20, 60], "the riders"),
            entry(13, "car", "white", [255, 255, 255], "the cars"),
            entry(14, "truck", "blue", [0, 0, 255], "the trucks"),
            entry(15, "bus", "cyan", [0, 255, 255], "the buses"),
            entry(16, "train", "magenta", [255, 0, 255], "the trains"),
            entry(17, "motorcycle", "navy", [0, 0, 128], "the motorcycles"),
            entry(18, "bicycle", "teal", [0, 128, 128], "the bicycles"),
        ],
    )
    .expect("shipped palette satisfies its own invariants")
}

/// Shipped palette for the 7 Cityscapes categories. Phrases describe the
/// member classes, so prompts read as instructions about scene content.
pub fn categories7_palette() -> Palette {
    Palette::new(
        "categories7-v1",
        vec![
            entry(0, "flat", "red", [255, 0, 0], "all roads and sidewalks"),
            entry(
                1,
                "construction",
                "gray",
                [128, 128, 128],
                "all buildings, walls, and fences",
            ),
            entry(
                2,
                "nature",
                "green",
                [0, 128, 0],
                "all vegetation and terrain",
            ),
            entry(3, "sky", "blue", [0, 0, 255], "the sky"),
            entry(4, "human", "pink", [255, 192, 203], "all people and riders"),
            entry(5, "vehicle", "white", [255, 255, 255], "all vehicles"),
            entry(
                6,
                "object",
                "yellow",
                [255, 255, 0],
                "all poles, traffic lights, and traffic signs",
            ),
        ],
    )
    .expect("shipped palette satisfies its own invariants")
}

/// Sorted distinct non-ignore class ids present in a ground-truth map. The
/// result seeds prompt construction: the model is told only about classes the
/// annotation actually contains.
pub fn oracle_class_list(gt: &LabelMap, space: &LabelSpace) -> Result<Vec<u8>> {
    let mut present = BTreeSet::new();
    for &label in gt.labels() {
        if label == IGNORE_LABEL {
            continue;
        }
        if !space.contains(label) {
            return Err(Error::UnknownClass { id: label });
        }
        present.insert(label);
    }
    Ok(present.into_iter().collect())
}

/// Which prompt template to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptGranularity {
    /// Per-class color-coded map instruction.
    Classes19,
    /// Flat solid-color mask instruction over the 7 categories.
    Categories7,
}

/// Renders the instruction text for a prompted class set. Clause order
/// follows the given class list, so a sorted oracle list yields a
/// deterministic prompt.
pub fn build_prompt(
    classes: &[u8],
    palette: &Palette,
    granularity: PromptGranularity,
) -> Result<String> {
    if classes.is_empty() {
        return Err(Error::EmptyInput("prompted classes"));
    }
    let mut clauses = Vec::with_capacity(classes.len());
    for &id in classes {
        let e = palette.entry(id).ok_or(Error::UnknownClass { id })?;
        let clause = match granularity {
            PromptGranularity::Classes19 => format!("{} {}", e.prompt_phrase, e.color_name),
            PromptGranularity::Categories7 => {
                format!("{} solid {}", e.prompt_phrase, e.color_name)
            }
        };
        clauses.push(clause);
    }
    let joined = clauses.join(", ");
    Ok(match granularity {
        PromptGranularity::Classes19 => format!(
            "Convert this photo into a color-coded map: {joined}, and everything else black."
        ),
        PromptGranularity::Categories7 => format!(
            "Turn this image into a flat segmentation mask using only solid colors. \
             Paint {joined}, and everything else solid black. No textures, no gradients."
        ),
    })
}

/// Assigns every pixel to the prompted class (or black background) whose
/// palette color is nearest in RGB space.
///
/// Distances are compared as exact integer squares after quantizing channels
/// to bytes, so midpoint ties are reproducible: ties break toward the lowest
/// class id, and the background loses ties to any foreground class.
pub fn decode_palette(img: &RasterImage, prompted: &[u8], palette: &Palette) -> Result<LabelMap> {
    let mut candidates: Vec<(u8, [u8; 3])> = Vec::with_capacity(prompted.len());
    for &id in &BTreeSet::from_iter(prompted.iter().copied()) {
        let color = palette.color_of(id).ok_or(Error::UnknownClass { id })?;
        candidates.push((id, color));
    }
    Ok(LabelMap::from_fn(img.width(), img.height(), |x, y| {
        let [r, g, b] = img.get(x, y);
        let px = [
            (r * 255.0).round() as u8,
            (g * 255.0).round() as u8,
            (b * 255.0).round() as u8,
        ];
        let mut best = BACKGROUND_LABEL;
        let mut best_d2 = dist2(px, [0, 0, 0]);
        for &(id, color) in &candidates {
            let d2 = dist2(px, color);
            if d2 < best_d2 || (d2 == best_d2 && best == BACKGROUND_LABEL) {
                best = id;
                best_d2 = d2;
            }
        }
        best
    }))
}

/// Renders a label map using palette colors; background and ignore pixels
/// render black. Inverse of [`decode_palette`] on maps without ignore pixels.
pub fn encode_labels(map: &LabelMap, palette: &Palette) -> Result<RasterImage> {
    let mut pixels = Vec::with_capacity(map.labels().len());
    for &label in map.labels() {
        let rgb = if label == BACKGROUND_LABEL || label == IGNORE_LABEL {
            [0, 0, 0]
        } else {
            palette
                .color_of(label)
                .ok_or(Error::UnknownClass { id: label })?
        };
        pixels.push([
            rgb[0] as f64 / 255.0,
            rgb[1] as f64 / 255.0,
            rgb[2] as f64 / 255.0,
        ]);
    }
    RasterImage::new(map.width(), map.height(), pixels)
}

/// Relabels a 19-class map into its 7 categories using the label space's
/// grouping table. Ignore and background pass through unchanged.
pub fn group_to_categories(map: &LabelMap, space: &LabelSpace) -> Result<LabelMap> {
    let grouping = space
        .grouping()
        .ok_or_else(|| Error::LabelSpaceMismatch("label space has no grouping table".into()))?;
    let mut labels = Vec::with_capacity(map.labels().len());
    for &label in map.labels() {
        let grouped = if label == IGNORE_LABEL || label == BACKGROUND_LABEL {
            label
        } else {
            *grouping
                .get(&label)
                .ok_or(Error::UngroupedClass { id: label })?
        };
        labels.push(grouped);
    }
    LabelMap::new(map.width(), map.height(), labels)
}

/// Square count matrix over `classes` real classes plus one background
/// bucket at index `classes`. Rows index ground truth, columns predictions;
/// the background row stays zero because ground truth is never background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        let dim = classes + 1;
        Self {
            classes,
            counts: vec![0; dim * dim],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn background_index(&self) -> usize {
        self.classes
    }

    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * (self.classes + 1) + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds `n` pixels with the given ground-truth and prediction indices.
    /// Index `classes` is the background bucket. Panics on out-of-range
    /// indices, matching slice indexing.
    pub fn add(&mut self, gt: usize, pred: usize, n: u64) {
        assert!(gt <= self.classes && pred <= self.classes);
        self.counts[gt * (self.classes + 1) + pred] += n;
    }

    /// Elementwise addition; commutative and associative, so per-image
    /// matrices can merge in any order with identical totals.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::LabelSpaceMismatch(format!(
                "cannot merge confusion over {} classes with {}",
                self.classes, other.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Sums counts into a category-level matrix via the grouping table.
    /// The background bucket maps to the category background bucket.
    pub fn group(
        &self,
        grouping: &std::collections::BTreeMap<u8, u8>,
        out_classes: usize,
    ) -> Result<ConfusionMatrix> {
        let map_index = |i: usize| -> Result<usize> {
            if i == self.classes {
                return Ok(out_classes);
            }
            let g = *grouping
                .get(&(i as u8))
                .ok_or(Error::UngroupedClass { id: i as u8 })?;
            if (g as usize) >= out_classes {
                return Err(Error::LabelSpaceMismatch(format!(
                    "group {g} outside category space of {out_classes}"
                )));
            }
            Ok(g as usize)
        };
        let mut out = ConfusionMatrix::new(out_classes);
        for gt in 0..=self.classes {
            for pred in 0..=self.classes {
                let c = self.count(gt, pred);
                if c > 0 {
                    out.counts[map_index(gt)? * (out_classes + 1) + map_index(pred)?] += c;
                }
            }
        }
        Ok(out)
    }
}

/// Adds one image's pixels into the matrix: `counts[gt][pred] += 1` wherever
/// the ground truth is not ignore. Predicted background (or ignore, after
/// grouping) lands in the background bucket.
pub fn accumulate_confusion(
    pred: &LabelMap,
    gt: &LabelMap,
    matrix: &mut ConfusionMatrix,
) -> Result<()> {
    if !pred.same_size(gt) {
        return Err(Error::DimensionMismatch {
            a_width: pred.width(),
            a_height: pred.height(),
            b_width: gt.width(),
            b_height: gt.height(),
        });
    }
    let classes = matrix.classes;
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        if g == IGNORE_LABEL {
            continue;
        }
        if (g as usize) >= classes {
            return Err(Error::UnknownClass { id: g });
        }
        let p_index = if p == BACKGROUND_LABEL || p == IGNORE_LABEL {
            classes
        } else if (p as usize) < classes {
            p as usize
        } else {
            return Err(Error::UnknownClass { id: p });
        };
        matrix.counts[g as usize * (classes + 1) + p_index] += 1;
    }
    Ok(())
}

/// Intersection-over-union and pixel accuracy derived from a confusion
/// matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SegMetrics {
    /// Mean of the defined per-class IoUs; background is not a class.
    pub miou: f64,
    /// Correct pixels over evaluated pixels.
    pub pixel_acc: f64,
    /// IoU per real class; `None` where the class is absent from both ground
    /// truth and predictions.
    pub per_class_iou: Vec<(u8, Option<f64>)>,
}

/// Computes IoU per class as `TP / (TP + FP + FN)`. Classes untouched by both
/// ground truth and predictions are undefined and excluded from the mean.
/// Background-decoded pixels inflate FN of their true class but are never
/// counted correct.
pub fn seg_metrics(matrix: &ConfusionMatrix) -> Result<SegMetrics> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::EmptyInput("confusion matrix"));
    }
    let classes = matrix.classes;
    let mut per_class = Vec::with_capacity(classes);
    let mut iou_sum = 0.0;
    let mut iou_count = 0usize;
    let mut trace = 0u64;
    for c in 0..classes {
        let tp = matrix.count(c, c);
        trace += tp;
        let fp: u64 = (0..=classes)
            .filter(|&g| g != c)
            .map(|g| matrix.count(g, c))
            .sum();
        let fn_: u64 = (0..=classes)
            .filter(|&p| p != c)
            .map(|p| matrix.count(c, p))
            .sum();
        let denom = tp + fp + fn_;
        let iou = if denom == 0 {
            None
        } else {
            Some(tp as f64 / denom as f64)
        };
        if let Some(v) = iou {
            iou_sum += v;
            iou_count += 1;
        }
        per_class.push((c as u8, iou));
    }
    if iou_count == 0 {
        return Err(Error::EmptyInput("no class has any pixel"));
    }
    Ok(SegMetrics {
        miou: iou_sum / iou_count as f64,
        pixel_acc: trace as f64 / total as f64,
        per_class_iou: per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shipped_palettes_are_well_separated() {
        let p19 = cityscapes19_palette();
        assert_eq!(p19.entries().len(), 19);
        assert_eq!(p19.version(), "cityscapes19-v1");
        // Yellow vs gold is the closest pair.
        assert_eq!(p19.min_pairwise_distance(), 40.0);

        let p7 = categories7_palette();
        assert_eq!(p7.entries().len(), 7);
        // Pink vs white: sqrt(63^2 + 52^2).
        assert!((p7.min_pairwise_distance() - 6673.0f64.sqrt()).abs() < 1e-12);
        assert!(p7.min_pairwise_distance() >= MIN_PALETTE_DISTANCE);
    }

    #[test]
    fn palette_rejects_violations() {
        let ok = entry(0, "a", "red", [255, 0, 0], "the a");
        // Too close to background.
        let near_black = entry(1, "b", "dark", [10, 10, 10], "the b");
        assert!(Palette::new("t", vec![ok.clone(), near_black]).is_err());
        // Too close to each other.
        let near_red = entry(1, "b", "red2", [250, 10, 0], "the b");
        assert!(Palette::new("t", vec![ok.clone(), near_red]).is_err());
        // Duplicate id.
        let dup = entry(0, "b", "white", [255, 255, 255], "the b");
        assert!(Palette::new("t", vec![ok.clone(), dup]).is_err());
        // Reserved id.
        let reserved = entry(BACKGROUND_LABEL, "b", "white", [255, 255, 255], "the b");
        assert!(Palette::new("t", vec![ok, reserved]).is_err());
        assert!(Palette::new("t", vec![]).is_err());
    }

    #[test]
    fn palette_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("palette.tsv");
        let p = cityscapes19_palette();
        p.to_file(&path).unwrap();
        let back = Palette::from_file(&path).unwrap();
        assert_eq!(back, p);
        // Stable bytes on rewrite.
        let first = std::fs::read(&path).unwrap();
        back.to_file(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn palette_file_requires_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "0\troad\tred\t255\t0\t0\tthe road\n").unwrap();
        assert!(matches!(
            Palette::from_file(&path),
            Err(Error::Format { .. })
        ));
    }

    fn space19() -> LabelSpace {
        LabelSpace::cityscapes19()
    }

    #[test]
    fn oracle_list_examples() {
        let space = space19();
        let void = LabelMap::new(2, 2, vec![IGNORE_LABEL; 4]).unwrap();
        assert!(oracle_class_list(&void, &space).unwrap().is_empty());

        let two = LabelMap::new(2, 2, vec![13, 0, 0, IGNORE_LABEL]).unwrap();
        assert_eq!(oracle_class_list(&two, &space).unwrap(), vec![0, 13]);

        let full = LabelMap::new(19, 1, (0..19).collect()).unwrap();
        assert_eq!(
            oracle_class_list(&full, &space).unwrap(),
            (0..19).collect::<Vec<u8>>()
        );

        let bad = LabelMap::new(1, 1, vec![40]).unwrap();
        assert!(matches!(
            oracle_class_list(&bad, &space),
            Err(Error::UnknownClass { id: 40 })
        ));
    }

    #[test]
    fn prompt_single_class() {
        let p = cityscapes19_palette();
        let text = build_prompt(&[0], &p, PromptGranularity::Classes19).unwrap();
        assert_eq!(
            text,
            "Convert this photo into a color-coded map: the road red, and everything else black."
        );
    }

    #[test]
    fn prompt_two_classes() {
        let p = cityscapes19_palette();
        let text = build_prompt(&[0, 13], &p, PromptGranularity::Classes19).unwrap();
        assert_eq!(
            text,
            "Convert this photo into a color-coded map: the road red, the cars white, \
             and everything else black."
        );
    }

    #[test]
    fn prompt_categories() {
        let p = categories7_palette();
        let text = build_prompt(&[0], &p, PromptGranularity::Categories7).unwrap();
        assert!(text
            .starts_with("Turn this image into a flat segmentation mask using only solid colors."));
        assert!(text.contains("Paint all roads and sidewalks solid red"));
        assert!(text.ends_with("and everything else solid black. No textures, no gradients."));
    }

    #[test]
    fn prompt_errors() {
        let p = cityscapes19_palette();
        assert!(matches!(
            build_prompt(&[], &p, PromptGranularity::Classes19),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            build_prompt(&[99], &p, PromptGranularity::Classes19),
            Err(Error::UnknownClass { id: 99 })
        ));
    }

    fn image_of_bytes(pixels: &[[u8; 3]]) -> RasterImage {
        let raw: Vec<u8> = pixels.iter().flatten().copied().collect();
        RasterImage::from_bytes(&raw, pixels.len() as u32, 1).unwrap()
    }

    #[test]
    fn decode_exact_colors_and_background() {
        let p = cityscapes19_palette();
        let img = image_of_bytes(&[[255, 0, 0], [255, 255, 255], [0, 0, 0]]);
        let prompted = vec![0, 13];
        let map = decode_palette(&img, &prompted, &p).unwrap();
        assert_eq!(map.labels(), &[0, 13, BACKGROUND_LABEL]);
    }

    #[test]
    fn decode_restricted_to_prompted_set() {
        let p = cityscapes19_palette();
        // Pure white, but only "road" was prompted: red (d^2 = 130050) beats
        // black (d^2 = 195075).
        let img = image_of_bytes(&[[255, 255, 255]]);
        let map = decode_palette(&img, &[0], &p).unwrap();
        assert_eq!(map.labels(), &[0]);
    }

    #[test]
    fn decode_midpoint_tie_takes_lower_id() {
        let p = cityscapes19_palette();
        // (255, 235, 0) sits exactly between yellow=pole(5) and gold=sign(7).
        let img = image_of_bytes(&[[255, 235, 0]]);
        let d_pole = dist2([255, 235, 0], p.color_of(5).unwrap());
        let d_sign = dist2([255, 235, 0], p.color_of(7).unwrap());
        assert_eq!(d_pole, d_sign);
        let map = decode_palette(&img, &[5, 7], &p).unwrap();
        assert_eq!(map.labels(), &[5]);
        // Prompt order does not matter.
        let map = decode_palette(&img, &[7, 5], &p).unwrap();
        assert_eq!(map.labels(), &[5]);
    }

    #[test]
    fn decode_background_loses_ties() {
        let p = cityscapes19_palette();
        // (0, 0, 64) is equidistant from black and navy=motorcycle(17).
        assert_eq!(dist2([0, 0, 64], [0, 0, 0]), dist2([0, 0, 64], [0, 0, 128]));
        let img = image_of_bytes(&[[0, 0, 64]]);
        let map = decode_palette(&img, &[17], &p).unwrap();
        assert_eq!(map.labels(), &[17]);
    }

    #[test]
    fn decode_unknown_prompted_id() {
        let p = categories7_palette();
        let img = image_of_bytes(&[[0, 0, 0]]);
        assert!(matches!(
            decode_palette(&img, &[9], &p),
            Err(Error::UnknownClass { id: 9 })
        ));
    }

    fn random_label_map(rng: &mut ChaCha8Rng, ids: &[u8], w: u32, h: u32) -> LabelMap {
        LabelMap::from_fn(w, h, |_, _| {
            if rng.gen_bool(0.2) {
                BACKGROUND_LABEL
            } else {
                ids[rng.gen_range(0..ids.len())]
            }
        })
    }

    #[test]
    fn encode_decode_idempotent() {
        let p = cityscapes19_palette();
        let prompted = p.ids();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let map = random_label_map(&mut rng, &prompted, 9, 7);
            let img = encode_labels(&map, &p).unwrap();
            let back = decode_palette(&img, &prompted, &p).unwrap();
            assert_eq!(back, map);
        }
    }

    #[test]
    fn decode_stable_within_robustness_radius() {
        let p = cityscapes19_palette();
        let prompted = p.ids();
        let radius = p.min_pairwise_distance() / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let map = random_label_map(&mut rng, &prompted, 6, 6);
            let clean = encode_labels(&map, &p).unwrap();
            let raw = clean.to_bytes();
            let perturbed: Vec<u8> = raw
                .chunks_exact(3)
                .flat_map(|px| loop {
                    let d: [i32; 3] = [
                        rng.gen_range(-11..=11),
                        rng.gen_range(-11..=11),
                        rng.gen_range(-11..=11),
                    ];
                    let norm2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64;
                    if norm2 < radius * radius {
                        return [
                            (px[0] as i32 + d[0]).clamp(0, 255) as u8,
                            (px[1] as i32 + d[1]).clamp(0, 255) as u8,
                            (px[2] as i32 + d[2]).clamp(0, 255) as u8,
                        ];
                    }
                })
                .collect();
            let noisy = RasterImage::from_bytes(&perturbed, 6, 6).unwrap();
            let decoded = decode_palette(&noisy, &prompted, &p).unwrap();
            assert_eq!(decoded, map);
        }
    }

    #[test]
    fn grouping_examples() {
        let space = space19();
        let map = LabelMap::new(6, 1, vec![0, 1, 11, 13, IGNORE_LABEL, BACKGROUND_LABEL]).unwrap();
        let grouped = group_to_categories(&map, &space).unwrap();
        assert_eq!(
            grouped.labels(),
            &[0, 0, 4, 5, IGNORE_LABEL, BACKGROUND_LABEL]
        );
    }

    #[test]
    fn grouping_requires_table() {
        let space = LabelSpace::cityscapes_categories7();
        let map = LabelMap::new(1, 1, vec![0]).unwrap();
        assert!(group_to_categories(&map, &space).is_err());
    }

    #[test]
    fn confusion_hand_examples() {
        let mut m = ConfusionMatrix::new(4);
        let gt = LabelMap::new(4, 1, vec![3, 3, 3, 3]).unwrap();
        accumulate_confusion(&gt, &gt, &mut m).unwrap();
        assert_eq!(m.count(3, 3), 4);
        assert_eq!(m.total(), 4);

        // All-ignore ground truth leaves the matrix unchanged.
        let void = LabelMap::new(4, 1, vec![IGNORE_LABEL; 4]).unwrap();
        accumulate_confusion(&gt, &void, &mut m).unwrap();
        assert_eq!(m.total(), 4);

        let mut m2 = ConfusionMatrix::new(2);
        let gt = LabelMap::new(2, 1, vec![0, 1]).unwrap();
        let pred = LabelMap::new(2, 1, vec![1, 1]).unwrap();
        accumulate_confusion(&pred, &gt, &mut m2).unwrap();
        assert_eq!(m2.count(0, 1), 1);
        assert_eq!(m2.count(1, 1), 1);
        assert_eq!(m2.count(0, 0), 0);
    }

    #[test]
    fn metrics_perfect_prediction() {
        let mut m = ConfusionMatrix::new(3);
        let gt = LabelMap::new(3, 1, vec![0, 1, 2]).unwrap();
        accumulate_confusion(&gt, &gt, &mut m).unwrap();
        let s = seg_metrics(&m).unwrap();
        assert_eq!(s.miou, 1.0);
        assert_eq!(s.pixel_acc, 1.0);
    }

    #[test]
    fn metrics_hand_counted() {
        // gt = [A, A, B, B], pred = [A, B, B, B] with A=0, B=1.
        let mut m = ConfusionMatrix::new(2);
        let gt = LabelMap::new(4, 1, vec![0, 0, 1, 1]).unwrap();
        let pred = LabelMap::new(4, 1, vec![0, 1, 1, 1]).unwrap();
        accumulate_confusion(&pred, &gt, &mut m).unwrap();
        let s = seg_metrics(&m).unwrap();
        assert_eq!(s.per_class_iou[0].1, Some(0.5));
        assert_eq!(s.per_class_iou[1].1, Some(2.0 / 3.0));
        assert_eq!(s.miou, (0.5 + 2.0 / 3.0) / 2.0);
        assert_eq!(s.pixel_acc, 0.75);
    }

    #[test]
    fn metrics_absent_class_excluded() {
        let mut m = ConfusionMatrix::new(3);
        let gt = LabelMap::new(2, 1, vec![0, 0]).unwrap();
        accumulate_confusion(&gt, &gt, &mut m).unwrap();
        let s = seg_metrics(&m).unwrap();
        assert_eq!(s.per_class_iou[1].1, None);
        assert_eq!(s.per_class_iou[2].1, None);
        assert_eq!(s.miou, 1.0);
    }

    #[test]
    fn metrics_background_never_correct() {
        let mut m = ConfusionMatrix::new(2);
        let gt = LabelMap::new(2, 1, vec![0, 0]).unwrap();
        let pred = LabelMap::new(2, 1, vec![0, BACKGROUND_LABEL]).unwrap();
        accumulate_confusion(&pred, &gt, &mut m).unwrap();
        let s = seg_metrics(&m).unwrap();
        assert_eq!(s.per_class_iou[0].1, Some(0.5));
        assert_eq!(s.pixel_acc, 0.5);
        assert_eq!(s.per_class_iou.len(), 2);
    }

    #[test]
    fn metrics_empty_matrix_rejected() {
        let m = ConfusionMatrix::new(3);
        assert!(seg_metrics(&m).is_err());
    }

    #[test]
    fn metrics_match_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let classes = 4usize;
            let gt = LabelMap::from_fn(8, 8, |_, _| {
                if rng.gen_bool(0.1) {
                    IGNORE_LABEL
                } else {
                    rng.gen_range(0..classes as u8)
                }
            });
            let pred = LabelMap::from_fn(8, 8, |_, _| {
                if rng.gen_bool(0.1) {
                    BACKGROUND_LABEL
                } else {
                    rng.gen_range(0..classes as u8)
                }
            });
            let mut m = ConfusionMatrix::new(classes);
            accumulate_confusion(&pred, &gt, &mut m).unwrap();
            let s = seg_metrics(&m).unwrap();

            // Direct set-based recomputation.
            let mut correct = 0u64;
            let mut evaluated = 0u64;
            let mut oracle_sum = 0.0;
            let mut oracle_n = 0;
            for c in 0..classes as u8 {
                let mut tp = 0u64;
                let mut fp = 0u64;
                let mut fn_ = 0u64;
                for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
                    if g == IGNORE_LABEL {
                        continue;
                    }
                    if g == c && p == c {
                        tp += 1;
                    }
                    if g != c && p == c {
                        fp += 1;
                    }
                    if g == c && p != c {
                        fn_ += 1;
                    }
                }
                if tp + fp + fn_ > 0 {
                    let iou = tp as f64 / (tp + fp + fn_) as f64;
                    assert_eq!(s.per_class_iou[c as usize].1, Some(iou));
                    oracle_sum += iou;
                    oracle_n += 1;
                } else {
                    assert_eq!(s.per_class_iou[c as usize].1, None);
                }
            }
            for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
                if g != IGNORE_LABEL {
                    evaluated += 1;
                    if g == p {
                        correct += 1;
                    }
                }
            }
            assert_eq!(s.miou, oracle_sum / oracle_n as f64);
            assert_eq!(s.pixel_acc, correct as f64 / evaluated as f64);
        }
    }

    #[test]
    fn grouping_commutes_with_confusion() {
        let space = space19();
        let grouping = space.grouping().unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..10 {
            let gt = LabelMap::from_fn(8, 8, |_, _| {
                if rng.gen_bool(0.1) {
                    IGNORE_LABEL
                } else {
                    rng.gen_range(0..19)
                }
            });
            let pred = LabelMap::from_fn(8, 8, |_, _| {
                if rng.gen_bool(0.1) {
                    BACKGROUND_LABEL
                } else {
                    rng.gen_range(0..19)
                }
            });
            // Path 1: group label maps, then accumulate at category level.
            let mut direct = ConfusionMatrix::new(7);
            accumulate_confusion(
                &group_to_categories(&pred, &space).unwrap(),
                &group_to_categories(&gt, &space).unwrap(),
                &mut direct,
            )
            .unwrap();
            // Path 2: accumulate at class level, then group the matrix.
            let mut fine = ConfusionMatrix::new(19);
            accumulate_confusion(&pred, &gt, &mut fine).unwrap();
            let grouped = fine.group(&grouping, 7).unwrap();
            assert_eq!(direct, grouped);
        }
    }

    #[test]
    fn merge_is_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let maps: Vec<(LabelMap, LabelMap)> = (0..4)
            .map(|_| {
                (
                    LabelMap::from_fn(4, 4, |_, _| rng.gen_range(0..3)),
                    LabelMap::from_fn(4, 4, |_, _| rng.gen_range(0..3)),
                )
            })
            .collect();
        let mut forward = ConfusionMatrix::new(3);
        for (pred, gt) in &maps {
            accumulate_confusion(pred, gt, &mut forward).unwrap();
        }
        let mut backward = ConfusionMatrix::new(3);
        for (pred, gt) in maps.iter().rev() {
            let mut one = ConfusionMatrix::new(3);
            accumulate_confusion(pred, gt, &mut one).unwrap();
            backward.merge(&one).unwrap();
        }
        assert_eq!(forward, backward);
    }
}
