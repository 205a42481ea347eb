//! Deterministic codecs, calibration, and metrics for evaluating dense
//! predictions that arrive as ordinary RGB images.
//!
//! Instruction-following image editors can be asked to repaint a photo as a
//! depth map, a surface-normal map, or a color-coded segmentation mask. This
//! crate turns those repainted images back into numbers: fixed prompt
//! templates describe the expected visual code, decoders invert it, and
//! standard metrics score the result against ground truth. Everything is
//! deterministic, so two runs over the same files produce byte-identical
//! reports.

pub mod datasets;
pub mod depth;
pub mod error;
pub mod io;
pub mod label;
pub mod normals;
pub mod raster;
pub mod resample;
pub mod runner;
pub mod segmentation;

pub use error::{Error, Result};
pub use label::{LabelMap, LabelSpace, IGNORE_LABEL};
pub use raster::{masked_pairs, NormalField, RasterImage, ScalarField};
