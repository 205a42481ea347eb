//! Minimal NPY array reader for DIODE depth and mask planes.
//!
//! Supports exactly what those files use: versions 1–3, little-endian f32 or
//! f64, C order, shape `(H, W)` or `(H, W, 1)`. Everything else is rejected
//! with a format error rather than guessed at.

use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// Reads a 2-D float array as row-major f64 values with its dimensions.
pub fn read_npy_2d(path: &Path) -> Result<(Vec<f64>, u32, u32)> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let fmt_err = |reason: String| Error::Format {
        path: path.display().to_string(),
        reason,
    };
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(fmt_err("missing NPY magic".into()));
    }
    let major = bytes[6];
    let (header_len, header_start) = match major {
        1 => (
            u16::from_le_bytes(bytes[8..10].try_into().unwrap()) as usize,
            10,
        ),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(fmt_err("truncated header length".into()));
            }
            (
                u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize,
                12,
            )
        }
        v => return Err(fmt_err(format!("unsupported NPY version {v}"))),
    };
    let data_start = header_start + header_len;
    if bytes.len() < data_start {
        return Err(fmt_err("truncated header".into()));
    }
    let header = std::str::from_utf8(&bytes[header_start..data_start])
        .map_err(|_| fmt_err("header is not ASCII".into()))?;

    let descr = dict_value(header, "descr").ok_or_else(|| fmt_err("missing descr".into()))?;
    let descr = descr.trim_matches(|c| c == '\'' || c == '"');
    let item_size = match descr {
        "<f4" => 4,
        "<f8" => 8,
        other => return Err(fmt_err(format!("unsupported dtype {other:?}"))),
    };
    let fortran = dict_value(header, "fortran_order")
        .ok_or_else(|| fmt_err("missing fortran_order".into()))?;
    if fortran.trim() != "False" {
        return Err(fmt_err("fortran-order arrays are not supported".into()));
    }
    let shape_text = dict_value(header, "shape").ok_or_else(|| fmt_err("missing shape".into()))?;
    let dims: Vec<usize> = shape_text
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| fmt_err(format!("bad shape component {s:?}")))
        })
        .collect::<Result<_>>()?;
    let (h, w) = match dims.as_slice() {
        [h, w] => (*h, *w),
        [h, w, 1] => (*h, *w),
        other => return Err(fmt_err(format!("unsupported shape {other:?}"))),
    };
    let n = h * w;
    if bytes.len() != data_start + n * item_size {
        return Err(fmt_err(format!(
            "expected {n} elements of {item_size} bytes, found {} data bytes",
            bytes.len() - data_start
        )));
    }
    let data = &bytes[data_start..];
    let values: Vec<f64> = match item_size {
        4 => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        _ => data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok((values, w as u32, h as u32))
}

/// Extracts the raw value text for `key` out of a Python dict literal. Values
/// here are flat tokens or one parenthesized tuple, so a bracket-free scan to
/// the next top-level comma suffices.
fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let needle = format!("'{key}':");
    let start = header.find(&needle)? + needle.len();
    let rest = &header[start..];
    let mut depth = 0usize;
    for (i, c) in rest.char_indices() {
        match c {
            '(' => depth += 1,
            ')' if depth > 0 => depth -= 1,
            ',' | '}' if depth == 0 => return Some(rest[..i].trim()),
            _ => {}
        }
    }
    None
}

/// Writes a row-major f32 array as NPY version 1.0 (used for test fixtures).
pub fn write_npy_2d(path: &Path, values: &[f32], width: u32, height: u32) -> Result<()> {
    assert_eq!(values.len(), width as usize * height as usize);
    let dict =
        format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({height}, {width}), }}");
    // Header (magic + lengths + dict + newline) padded to a 64-byte multiple.
    let unpadded = 10 + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header_len = (dict.len() + padding + 1) as u16;
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&[1, 0]);
    bytes.extend_from_slice(&header_len.to_le_bytes());
    bytes.extend_from_slice(dict.as_bytes());
    bytes.extend(std::iter::repeat_n(b' ', padding));
    bytes.push(b'\n');
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
