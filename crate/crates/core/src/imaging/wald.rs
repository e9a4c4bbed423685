//! Wald-protocol degradation: Gaussian low-pass followed by decimation.

use super::{Image, ScenePair};
use crate::error::{invalid, shape_err, Result};

/// Normalized 1-D Gaussian taps with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

// Accumulates relative to the centre sample so constant inputs come back
// bit-exact regardless of how the taps round.
fn convolve_axis(src: &[f64], h: usize, w: usize, taps: &[f64], horizontal: bool) -> Vec<f64> {
    let radius = (taps.len() / 2) as isize;
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let centre = src[y * w + x];
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let off = k as isize - radius;
                let v = if horizontal {
                    src[y * w + reflect(x as isize + off, w)]
                } else {
                    src[reflect(y as isize + off, h) * w + x]
                };
                acc += t * (v - centre);
            }
            out[y * w + x] = centre + acc;
        }
    }
    out
}

pub(crate) fn blur_plane(src: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let taps = gaussian_kernel(sigma);
    let rows = convolve_axis(src, h, w, &taps, true);
    convolve_axis(&rows, h, w, &taps, false)
}

/// Separable Gaussian blur of every channel with reflective borders.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut data = vec![0.0f32; h * w * c];
    for ch in 0..c {
        let plane = blur_plane(&img.channel_f64(ch), h, w, sigma);
        for (p, v) in plane.into_iter().enumerate() {
            data[p * c + ch] = v.clamp(0.0, 1.0) as f32;
        }
    }
    Image::new(h, w, c, data).expect("shape preserved")
}

/// Keeps pixel `(s*y + s/2, s*x + s/2)` of every `s x s` block.
pub fn decimate(img: &Image, scale: usize) -> Result<Image> {
    if scale == 0 {
        return Err(invalid("scale must be positive"));
    }
    let (h, w, c) = (img.height(), img.width(), img.channels());
    if h % scale != 0 || w % scale != 0 {
        return Err(shape_err(format!("{h}x{w} is not divisible by scale {scale}")));
    }
    let (oh, ow) = (h / scale, w / scale);
    let off = scale / 2;
    let mut data = Vec::with_capacity(oh * ow * c);
    for y in 0..oh {
        for x in 0..ow {
            for ch in 0..c {
                data.push(img.get(y * scale + off, x * scale + off, ch));
            }
        }
    }
    Image::new(oh, ow, c, data)
}

/// Low-pass with `sigma = scale / 2` then decimate by `scale`.
pub fn degrade(img: &Image, scale: usize) -> Result<Image> {
    if scale == 0 {
        return Err(invalid("scale must be positive"));
    }
    if img.height() % scale != 0 || img.width() % scale != 0 {
        return Err(shape_err(format!(
            "{}x{} is not divisible by scale {scale}",
            img.height(),
            img.width()
        )));
    }
    if scale == 1 {
        return Ok(img.clone());
    }
    decimate(&gaussian_blur(img, scale as f64 / 2.0), scale)
}

/// Synthesizes the reduced-resolution inputs for a reference HR-MS image.
///
/// The returned pair keeps `pan_hr` as the PAN input and `gt` as reference.
pub fn wald_degrade(gt: &Image, pan_hr: &Image, scale: usize) -> Result<ScenePair> {
    if gt.height() != pan_hr.height() || gt.width() != pan_hr.width() {
        return Err(shape_err("GT and PAN must share spatial size"));
    }
    let lrms = degrade(gt, scale)?;
    ScenePair::new(pan_hr.clone(), lrms, Some(gt.clone()), scale)
}
