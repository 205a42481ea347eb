//! Analytic ray-cast scenes: exact depth, normals, and labels by
//! construction.
//!
//! The camera sits at the origin of a right-handed frame with x right,
//! y down, z forward. Pixel `(i, j)` casts the ray `s * d` with
//! `d = ((i + 0.5 - cx) / fx, (j + 0.5 - cy) / fy, 1)`, so the hit parameter
//! `s` is exactly the depth along the optical axis. Stored normals are
//! oriented away from the viewer (`n · d > 0`): a camera-facing wall reads
//! `(0, 0, 1)`, matching the light-blue center of the normal-map color
//! convention.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::label::{LabelMap, IGNORE_LABEL};
use crate::normals::encode_normals;
use crate::raster::{NormalField, RasterImage, ScalarField};

use super::{ensure_layout, rawdepth::write_dcf32, GtKind, PreparedSample};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    /// Square pixels with a horizontal field of view of about 53 degrees and
    /// the principal point at the image center.
    pub fn standard(width: u32, height: u32) -> Self {
        Self {
            fx: width as f64,
            fy: width as f64,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    /// Infinite plane through `point` with the given (not necessarily unit)
    /// normal.
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
}

/// One renderable scene; serializable so scene files can drive generation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    /// Defaults to [`CameraIntrinsics::standard`] when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<CameraIntrinsics>,
    pub surfaces: Vec<Surface>,
}

/// All four aligned outputs of one ray cast.
#[derive(Debug, Clone)]
pub struct SceneRender {
    pub image: RasterImage,
    pub depth: ScalarField,
    pub normals: NormalField,
    pub labels: LabelMap,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(v: [f64; 3]) -> f64 {
    dot(v, v).sqrt()
}

const HIT_EPS: f64 = 1e-9;

impl Surface {
    /// Smallest `s > 0` with `s * d` on the surface, if any.
    fn intersect(&self, d: [f64; 3]) -> Option<f64> {
        match *self {
            Surface::Plane { point, normal } => {
                let denom = dot(normal, d);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let s = dot(normal, point) / denom;
                (s > HIT_EPS).then_some(s)
            }
            Surface::Sphere { center, radius } => {
                let a = dot(d, d);
                let b = -2.0 * dot(d, center);
                let c = dot(center, center) - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sqrt_disc = disc.sqrt();
                for s in [(-b - sqrt_disc) / (2.0 * a), (-b + sqrt_disc) / (2.0 * a)] {
                    if s > HIT_EPS {
                        return Some(s);
                    }
                }
                None
            }
        }
    }

    /// Geometric normal at `s * d`, oriented away from the viewer.
    fn normal_at(&self, s: f64, d: [f64; 3]) -> [f64; 3] {
        let n = match *self {
            Surface::Plane { normal, .. } => {
                let len = norm(normal);
                [normal[0] / len, normal[1] / len, normal[2] / len]
            }
            Surface::Sphere { center, radius } => [
                (s * d[0] - center[0]) / radius,
                (s * d[1] - center[1]) / radius,
                (s * d[2] - center[2]) / radius,
            ],
        };
        if dot(n, d) < 0.0 {
            [-n[0], -n[1], -n[2]]
        } else {
            n
        }
    }
}

/// Base colors cycled over surface indices for the shaded preview image.
const SURFACE_COLORS: [[f64; 3]; 5] = [
    [0.85, 0.78, 0.62],
    [0.55, 0.65, 0.90],
    [0.80, 0.45, 0.45],
    [0.50, 0.80, 0.55],
    [0.75, 0.60, 0.85],
];

fn validate(spec: &SceneSpec) -> Result<()> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidScene("zero-sized image".into()));
    }
    if spec.surfaces.is_empty() {
        return Err(Error::InvalidScene("scene has no surfaces".into()));
    }
    if spec.surfaces.len() >= IGNORE_LABEL as usize {
        return Err(Error::InvalidScene(format!(
            "{} surfaces exceed the label range",
            spec.surfaces.len()
        )));
    }
    for (i, s) in spec.surfaces.iter().enumerate() {
        match *s {
            Surface::Plane { point, normal } => {
                if norm(normal) == 0.0 {
                    return Err(Error::InvalidScene(format!("surface {i}: zero normal")));
                }
                if dot(normal, point).abs() < 1e-9 {
                    return Err(Error::InvalidScene(format!(
                        "surface {i}: plane passes through the camera"
                    )));
                }
            }
            Surface::Sphere { center, radius } => {
                if radius <= 0.0 {
                    return Err(Error::InvalidScene(format!(
                        "surface {i}: non-positive radius"
                    )));
                }
                if norm(center) <= radius {
                    return Err(Error::InvalidScene(format!(
                        "surface {i}: camera inside the sphere"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Ray-casts the scene into aligned image, depth, normal, and label planes.
/// Pixels no surface covers are invalid (depth, normals) and ignore (labels).
pub fn synth_scene(spec: &SceneSpec) -> Result<SceneRender> {
    validate(spec)?;
    let intr = spec
        .intrinsics
        .unwrap_or_else(|| CameraIntrinsics::standard(spec.width, spec.height));
    let (w, h) = (spec.width, spec.height);
    let n_px = w as usize * h as usize;
    let mut image = Vec::with_capacity(n_px);
    let mut depth = Vec::with_capacity(n_px);
    let mut depth_valid = Vec::with_capacity(n_px);
    let mut normals = Vec::with_capacity(n_px);
    let mut normals_valid = Vec::with_capacity(n_px);
    let mut labels = Vec::with_capacity(n_px);
    for j in 0..h {
        for i in 0..w {
            let d = [
                (i as f64 + 0.5 - intr.cx) / intr.fx,
                (j as f64 + 0.5 - intr.cy) / intr.fy,
                1.0,
            ];
            let mut hit: Option<(usize, f64)> = None;
            for (k, surface) in spec.surfaces.iter().enumerate() {
                if let Some(s) = surface.intersect(d) {
                    if hit.is_none_or(|(_, best)| s < best) {
                        hit = Some((k, s));
                    }
                }
            }
            match hit {
                Some((k, s)) => {
                    let n = spec.surfaces[k].normal_at(s, d);
                    // Headlight shading: incidence cosine of the view ray.
                    let cos = dot(n, d) / norm(d);
                    let shade = 0.25 + 0.7 * cos.clamp(0.0, 1.0);
                    let base = SURFACE_COLORS[k % SURFACE_COLORS.len()];
                    image.push([base[0] * shade, base[1] * shade, base[2] * shade]);
                    depth.push(s);
                    depth_valid.push(true);
                    normals.push(n);
                    normals_valid.push(true);
                    labels.push(k as u8);
                }
                None => {
                    image.push([0.08, 0.08, 0.10]);
                    depth.push(0.0);
                    depth_valid.push(false);
                    normals.push([0.0, 0.0, 0.0]);
                    normals_valid.push(false);
                    labels.push(IGNORE_LABEL);
                }
            }
        }
    }
    Ok(SceneRender {
        image: RasterImage::new(w, h, image)?,
        depth: ScalarField::new(w, h, depth, depth_valid)?,
        normals: NormalField::new(w, h, normals, normals_valid)?,
        labels: LabelMap::new(w, h, labels)?,
    })
}

/// Deterministic random scene: a gently tilted back wall plus one to three
/// spheres. Every ray hits the wall, so all pixels are valid, depth spans
/// roughly 1.8 to 6.5 meters, and depth is never constant.
pub fn random_scene(seed: u64, width: u32, height: u32) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut surfaces = Vec::new();
    let z0: f64 = rng.gen_range(4.5..5.5);
    surfaces.push(Surface::Plane {
        point: [0.0, 0.0, z0],
        normal: [rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15), 1.0],
    });
    for _ in 0..rng.gen_range(1..=3) {
        let z: f64 = rng.gen_range(2.5..3.8);
        surfaces.push(Surface::Sphere {
            center: [
                rng.gen_range(-0.3 * z..0.3 * z),
                rng.gen_range(-0.3 * z..0.3 * z),
                z,
            ],
            radius: rng.gen_range(0.4..0.7),
        });
    }
    SceneSpec {
        width,
        height,
        intrinsics: None,
        surfaces,
    }
}

/// Which ground-truth plane a synthetic prepared dataset materializes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthTask {
    Depth,
    Normals,
    Seg,
}

/// Batch request consumed by the `synth` subcommand.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthBatchSpec {
    pub task: SynthTask,
    pub count: usize,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_id: Option<String>,
}

impl SynthBatchSpec {
    pub fn dataset_id(&self) -> String {
        self.dataset_id.clone().unwrap_or_else(|| {
            match self.task {
                SynthTask::Depth => "synth_depth",
                SynthTask::Normals => "synth_normals",
                SynthTask::Seg => "synth_seg",
            }
            .to_string()
        })
    }
}

/// Renders `count` random scenes into a prepared dataset. Scene `i` derives
/// from `seed + i`, so outputs are byte-identical across runs.
pub fn synth_batch(spec: &SynthBatchSpec, out: &Path) -> Result<Vec<PreparedSample>> {
    if spec.count == 0 {
        return Err(Error::InvalidScene("batch count is zero".into()));
    }
    ensure_layout(out)?;
    let dataset_id = spec.dataset_id();
    let mut samples = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let scene_seed = spec.seed.wrapping_add(i as u64);
        let render = synth_scene(&random_scene(scene_seed, spec.width, spec.height))?;
        let sample_id = format!("scene_{i:04}");
        let rel_input = format!("images/{sample_id}.png");
        io::save_image(&render.image, &out.join(&rel_input))?;
        let (rel_gt, gt_kind) = match spec.task {
            SynthTask::Depth => {
                let rel = format!("gt/{sample_id}.dcf32");
                write_dcf32(&out.join(&rel), &render.depth)?;
                (rel, GtKind::DepthRawF32)
            }
            SynthTask::Normals => {
                let rel = format!("gt/{sample_id}.png");
                io::save_image(&encode_normals(&render.normals), &out.join(&rel))?;
                (rel, GtKind::NormalsPng)
            }
            SynthTask::Seg => {
                let rel = format!("gt/{sample_id}.png");
                io::save_labels(&render.labels, &out.join(&rel))?;
                (rel, GtKind::LabelsPng)
            }
        };
        samples.push(PreparedSample {
            sample_id,
            input_path: rel_input,
            gt_path: rel_gt,
            gt_kind,
            width: spec.width,
            height: spec.height,
            dataset_id: dataset_id.clone(),
            provenance: Some(format!("synthetic: scene seed {scene_seed}")),
        });
    }
    super::write_manifest(&out.join("manifest.jsonl"), &samples)?;
    Ok(samples)
}
