//! Deterministic synthetic scenes for tests, demos and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{wald_degrade, Image, ScenePair, DEFAULT_SCALE, MS_BANDS};
use crate::error::{invalid, Result};

struct Blob {
    cy: f64,
    cx: f64,
    radius: f64,
    amp: f64,
}

struct Rect {
    y0: usize,
    x0: usize,
    y1: usize,
    x1: usize,
    amp: f64,
}

fn random_field(rng: &mut ChaCha8Rng, size: usize, blobs: usize, rects: usize) -> Vec<f64> {
    let s = size as f64;
    let blobs: Vec<Blob> = (0..blobs)
        .map(|_| Blob {
            cy: rng.gen_range(0.0..s),
            cx: rng.gen_range(0.0..s),
            radius: rng.gen_range(1.0..(s / 6.0).max(1.5)),
            amp: rng.gen_range(-1.0..1.0),
        })
        .collect();
    let rects: Vec<Rect> = (0..rects)
        .map(|_| {
            let h = rng.gen_range(2..(size / 3).max(3));
            let w = rng.gen_range(2..(size / 3).max(3));
            let y0 = rng.gen_range(0..size - h.min(size - 1));
            let x0 = rng.gen_range(0..size - w.min(size - 1));
            Rect {
                y0,
                x0,
                y1: (y0 + h).min(size),
                x1: (x0 + w).min(size),
                amp: rng.gen_range(-1.0..1.0),
            }
        })
        .collect();
    let mut field = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let (fy, fx) = (y as f64 + 0.5, x as f64 + 0.5);
            let mut v = 0.0;
            for b in &blobs {
                let d2 = (fy - b.cy).powi(2) + (fx - b.cx).powi(2);
                v += b.amp * (-d2 / (2.0 * b.radius * b.radius)).exp();
            }
            for r in &rects {
                if (r.y0..r.y1).contains(&y) && (r.x0..r.x1).contains(&x) {
                    v += r.amp;
                }
            }
            field[y * size + x] = v;
        }
    }
    field
}

fn normalize(field: &mut [f64], lo: f64, hi: f64) {
    let min = field.iter().copied().fold(f64::INFINITY, f64::min);
    let max = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(1e-12);
    field.iter_mut().for_each(|v| *v = lo + (hi - lo) * (*v - min) / span);
}

/// Generates a reproducible scene of `size x size` pixels at scale 4.
///
/// Every band shares one piecewise field (Gaussian blobs plus rectangles)
/// with a band-specific gain, offset and a weaker private component, so
/// bands are strongly but not perfectly correlated. PAN is the band mean and
/// LR-MS comes from Wald degradation of the reference.
pub fn synth_scene(seed: u64, size: usize) -> Result<ScenePair> {
    if size == 0 || size % DEFAULT_SCALE != 0 {
        return Err(invalid(format!("size {size} must be a positive multiple of 4")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_blobs = 6 + size / 4;
    let n_rects = 3 + size / 8;
    let mut shared = random_field(&mut rng, size, n_blobs, n_rects);
    normalize(&mut shared, 0.0, 1.0);

    let mut gt = Image::zeros(size, size, MS_BANDS);
    for b in 0..MS_BANDS {
        let gain = rng.gen_range(0.8..1.0);
        let offset = rng.gen_range(-0.03..0.03);
        let mut private = random_field(&mut rng, size, 4, 1);
        normalize(&mut private, -0.5, 0.5);
        for y in 0..size {
            for x in 0..size {
                let i = y * size + x;
                let v = 0.1 + 0.8 * (gain * shared[i] + 0.1 * private[i]) + offset;
                gt.set(y, x, b, v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    let pan = gt.channel_mean();
    wald_degrade(&gt, &pan, DEFAULT_SCALE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synth_scene(3, 32).unwrap(), synth_scene(3, 32).unwrap());
        assert_ne!(synth_scene(3, 32).unwrap(), synth_scene(4, 32).unwrap());
    }

    #[test]
    fn sizes_follow_scale() {
        let s = synth_scene(0, 64).unwrap();
        assert_eq!((s.lrms.height(), s.lrms.width(), s.lrms.channels()), (16, 16, 4));
        assert_eq!((s.pan.height(), s.pan.channels()), (64, 1));
        assert!(synth_scene(0, 30).is_err());
    }

    #[test]
    fn bands_are_positively_correlated() {
        for seed in 0..5 {
            let gt = synth_scene(seed, 32).unwrap().gt.unwrap();
            for a in 0..MS_BANDS {
                for b in a + 1..MS_BANDS {
                    let r = pearson(&gt.channel_f64(a), &gt.channel_f64(b));
                    assert!(r > 0.0, "seed {seed} bands {a},{b}: r={r}");
                }
            }
        }
    }

    #[test]
    fn values_stay_in_unit_range() {
        let s = synth_scene(9, 48).unwrap();
        for img in [&s.pan, &s.lrms, s.gt.as_ref().unwrap()] {
            assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
