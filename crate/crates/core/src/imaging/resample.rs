use super::Image;
use crate::error::{invalid, Result};

const KEYS_A: f64 = -0.5;

fn keys(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        ((KEYS_A + 2.0) * t - (KEYS_A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((KEYS_A * t - 5.0 * KEYS_A) * t + 8.0 * KEYS_A) * t - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// For each output coordinate: base source index and the four tap weights.
fn taps(n_in: usize, scale: usize) -> Vec<(isize, [f64; 4])> {
    (0..n_in * scale)
        .map(|o| {
            let u = (o as f64 + 0.5) / scale as f64 - 0.5;
            let base = u.floor();
            let t = u - base;
            (
                base as isize,
                [keys(t + 1.0), keys(t), keys(1.0 - t), keys(2.0 - t)],
            )
        })
        .collect()
}

fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn resample_axis(
    src: &[f64],
    h: usize,
    w: usize,
    scale: usize,
    horizontal: bool,
) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = if horizontal { (h, w * scale) } else { (h * scale, w) };
    let table = taps(if horizontal { w } else { h }, scale);
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let (base, wts) = table[if horizontal { x } else { y }];
            let fetch = |k: isize| {
                if horizontal {
                    src[y * w + clamp_idx(base + k, w)]
                } else {
                    src[clamp_idx(base + k, h) * w + x]
                }
            };
            // Relative to the nearest-left tap: constants stay bit-exact.
            let anchor = fetch(0);
            let mut acc = 0.0;
            for (k, wt) in wts.iter().enumerate() {
                acc += wt * (fetch(k as isize - 1) - anchor);
            }
            out[y * ow + x] = anchor + acc;
        }
    }
    (out, oh, ow)
}

pub(crate) fn upsample_plane(src: &[f64], h: usize, w: usize, scale: usize) -> Vec<f64> {
    let (rows, h1, w1) = resample_axis(src, h, w, scale, true);
    resample_axis(&rows, h1, w1, scale, false).0
}

/// Keys (a = -0.5) bicubic upsampling with clamp-to-edge borders.
///
/// Output sample centres map back to `(o + 0.5) / scale - 0.5` in the input.
/// Results are clamped to `[0, 1]`.
pub fn upsample_bicubic(img: &Image, scale: usize) -> Result<Image> {
    if scale == 0 {
        return Err(invalid("scale must be at least 1"));
    }
    if scale == 1 {
        return Ok(img.clone());
    }
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let (oh, ow) = (h * scale, w * scale);
    let mut data = vec![0.0f32; oh * ow * c];
    for ch in 0..c {
        let plane = upsample_plane(&img.channel_f64(ch), h, w, scale);
        for (p, v) in plane.into_iter().enumerate() {
            data[p * c + ch] = v.clamp(0.0, 1.0) as f32;
        }
    }
    Image::new(oh, ow, c, data)
}
