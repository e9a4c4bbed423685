//! HSIF native raster format plus 8-bit PGM/PPM previews.
//!
//! HSIF layout: the magic `HSIF`, three little-endian `u32` (height, width,
//! channels), then `height * width * channels` little-endian `f32` samples,
//! row-major and channel-last.

use std::fs;
use std::path::Path;

use super::Image;
use crate::error::{format_err, invalid, Result};

pub const HSIF_MAGIC: &[u8; 4] = b"HSIF";
const HEADER_LEN: usize = 16;

pub fn encode_hsif(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + img.data().len() * 4);
    out.extend_from_slice(HSIF_MAGIC);
    for dim in [img.height(), img.width(), img.channels()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_hsif(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 4 || &bytes[..4] != HSIF_MAGIC {
        return Err(format_err(0, "bad magic, expected HSIF"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(format_err(bytes.len(), "truncated header"));
    }
    let dim = |i: usize| {
        let o = 4 + 4 * i;
        u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as u64
    };
    let (h, w, c) = (dim(0), dim(1), dim(2));
    let samples = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(c))
        .filter(|&n| n.checked_mul(4).is_some_and(|b| b <= usize::MAX as u64))
        .ok_or_else(|| format_err(4, format!("dimension overflow: {h}x{w}x{c}")))?
        as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < samples * 4 {
        return Err(format_err(
            bytes.len(),
            format!("truncated payload: expected {} bytes, found {}", samples * 4, payload.len()),
        ));
    }
    if payload.len() > samples * 4 {
        return Err(format_err(HEADER_LEN + samples * 4, "trailing bytes after payload"));
    }
    let mut data = Vec::with_capacity(samples);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(format_err(HEADER_LEN + 4 * i, "non-finite sample"));
        }
        data.push(v);
    }
    Image::new(h as usize, w as usize, c as usize, data)
}

pub fn write_hsif(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    fs::write(path, encode_hsif(img))?;
    Ok(())
}

pub fn read_hsif(path: impl AsRef<Path>) -> Result<Image> {
    decode_hsif(&fs::read(path)?)
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a single-channel image as binary PGM (P5).
pub fn write_pgm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    if img.channels() != 1 {
        return Err(invalid("PGM needs a single-channel image"));
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    fs::write(path, out)?;
    Ok(())
}

/// Writes three chosen channels of `img` as binary PPM (P6).
pub fn write_ppm(path: impl AsRef<Path>, img: &Image, rgb: [usize; 3]) -> Result<()> {
    if rgb.iter().any(|&c| c >= img.channels()) {
        return Err(invalid("PPM channel index out of range"));
    }
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    for px in img.data().chunks_exact(img.channels()) {
        out.extend(rgb.iter().map(|&c| quantize(px[c])));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads an 8-bit binary PGM or PPM back into `[0, 1]` samples.
pub fn read_pnm(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path)?;
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(format_err(0, "bad magic, expected P5 or P6")),
    };
    // Header: magic, width, height, maxval separated by whitespace.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(start, "malformed header field"))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(format_err(pos, "only 8-bit maxval 255 is supported"));
    }
    pos += 1;
    let n = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| format_err(3, "dimension overflow"))?;
    let payload = bytes.get(pos..pos + n).ok_or_else(|| format_err(bytes.len(), "truncated payload"))?;
    let data = payload.iter().map(|&b| f32::from(b) / 255.0).collect();
    Image::new(h, w, channels, data)
}
