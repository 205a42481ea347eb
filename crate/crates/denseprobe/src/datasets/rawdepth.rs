//! DCF32: a trivially parseable raw depth-plane format.
//!
//! Layout: 16-byte header (magic `DCF32\0`, u32 LE width, u32 LE height,
//! u16 reserved zero) followed by `width * height` little-endian float32
//! values in row-major order. Non-positive values mark invalid pixels.

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::ScalarField;

const MAGIC: &[u8; 6] = b"DCF32\0";
const HEADER_LEN: usize = 16;

pub fn write_dcf32(path: &Path, field: &ScalarField) -> Result<()> {
    let mut bytes = Vec::with_capacity(HEADER_LEN + field.values().len() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&field.width().to_le_bytes());
    bytes.extend_from_slice(&field.height().to_le_bytes());
    bytes.extend_from_slice(&0u16.to_le_bytes());
    for (value, valid) in field.iter() {
        let v = if valid { value as f32 } else { 0.0 };
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_dcf32(path: &Path) -> Result<ScalarField> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let fmt_err = |reason: String| Error::Format {
        path: path.display().to_string(),
        reason,
    };
    if bytes.len() < HEADER_LEN || &bytes[..6] != MAGIC {
        return Err(fmt_err("missing DCF32 magic".into()));
    }
    let width = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
    let n = width as usize * height as usize;
    let expected = HEADER_LEN + n * 4;
    if bytes.len() != expected {
        return Err(fmt_err(format!(
            "expected {expected} bytes for {width}x{height}, found {}",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for chunk in bytes[HEADER_LEN..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        values.push(v);
        valid.push(v > 0.0);
    }
    ScalarField::new(width, height, values, valid)
}
