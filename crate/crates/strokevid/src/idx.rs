//! Glyphs from IDX unsigned-byte image files (the MNIST layout).

use std::path::Path;

use strokevid_core::data::Glyph;

use crate::{format_err, io_err, Result};

/// Magic number of a three-dimensional unsigned-byte IDX file.
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

/// Parses square images from IDX bytes, scaling each byte by 1/255.
pub fn parse_digit_bitmaps(bytes: &[u8]) -> Result<Vec<Glyph>> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| format_err("IDX header is truncated"))
    };
    let magic = word(0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format_err(format!("bad IDX magic {magic:#010x}")));
    }
    let (count, rows, cols) = (word(1)? as usize, word(2)? as usize, word(3)? as usize);
    if rows != cols || rows == 0 {
        return Err(format_err(format!("glyph images must be square, got {rows}x{cols}")));
    }
    let body = &bytes[16..];
    let size = rows * cols;
    let expected = count
        .checked_mul(size)
        .ok_or_else(|| format_err("IDX dimensions overflow"))?;
    if body.len() != expected {
        return Err(format_err(format!(
            "IDX body holds {} bytes, header announces {expected}",
            body.len()
        )));
    }
    body.chunks_exact(size)
        .map(|img| Glyph::from_bytes(rows, img).map_err(Into::into))
        .collect()
}

pub fn load_digit_bitmaps(path: &Path) -> Result<Vec<Glyph>> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    parse_digit_bitmaps(&bytes)
}

/// Serializes square 8-bit images in the same layout.
pub fn write_idx_images(count: usize, size: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.len());
    for w in [IDX_IMAGES_MAGIC, count as u32, size as u32, size as u32] {
        out.extend_from_slice(&w.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}
