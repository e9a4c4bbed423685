//! Full-reference and no-reference quality metrics, and histogram priors.
//!
//! All metrics assume samples in `[0, 1]` and compute in `f64`.

use std::fmt::Write as _;

use crate::error::{invalid, shape_err, Result};
use crate::imaging::{degrade, upsample_bicubic, Image, ScenePair};

/// Reported PSNR for identical inputs.
pub const PSNR_CAP: f64 = 99.0;
/// Resolution ratio used by ERGAS.
pub const ERGAS_RATIO: f64 = 4.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;
/// Side of the sliding block behind the Q-index.
pub const Q_BLOCK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub sam: f64,
    pub ergas: f64,
    pub scc: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoRefReport {
    pub d_lambda: f64,
    pub d_s: f64,
    pub qnr: f64,
}

impl NoRefReport {
    pub fn new(d_lambda: f64, d_s: f64) -> Self {
        Self {
            d_lambda,
            d_s,
            qnr: (1.0 - d_lambda) * (1.0 - d_s),
        }
    }
}

/// A single band as a dense `f64` plane.
#[derive(Clone, Debug)]
struct Plane {
    h: usize,
    w: usize,
    v: Vec<f64>,
}

impl Plane {
    fn of(img: &Image, c: usize) -> Self {
        Self {
            h: img.height(),
            w: img.width(),
            v: img.channel_f64(c),
        }
    }

    fn bands(img: &Image) -> Vec<Self> {
        (0..img.channels()).map(|c| Self::of(img, c)).collect()
    }
}

fn check_pair(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(shape_err(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )));
    }
    if a.data().is_empty() {
        return Err(invalid("metrics need a nonempty image"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Band-averaged MSE in dB against a peak of 1, capped at [`PSNR_CAP`].
pub fn psnr(fused: &Image, gt: &Image) -> Result<f64> {
    check_pair(fused, gt)?;
    let (f, g) = (Plane::bands(fused), Plane::bands(gt));
    let m = f.iter().zip(&g).map(|(a, b)| mse(&a.v, &b.v)).sum::<f64>() / f.len() as f64;
    Ok(if m == 0.0 {
        PSNR_CAP
    } else {
        (-10.0 * m.log10()).min(PSNR_CAP)
    })
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

/// Separable "valid" filtering: output is `(h - n + 1) x (w - n + 1)`.
fn filter_valid(p: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * p[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &Plane, b: &Plane) -> f64 {
    let size = SSIM_WINDOW.min(a.h).min(a.w);
    let taps = gaussian_window(size, SSIM_SIGMA);
    let f = |v: &[f64]| filter_valid(v, a.h, a.w, &taps);
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let (mu_a, mu_b) = (f(&a.v), f(&b.v));
    let (e_aa, e_bb, e_ab) = (f(&prod(&a.v, &a.v)), f(&prod(&b.v, &b.v)), f(&prod(&a.v, &b.v)));
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    total / mu_a.len() as f64
}

/// Gaussian-window SSIM over the valid region, averaged over bands. Images
/// smaller than the 11 x 11 window use a window as large as they allow.
pub fn ssim(fused: &Image, gt: &Image) -> Result<f64> {
    check_pair(fused, gt)?;
    let (f, g) = (Plane::bands(fused), Plane::bands(gt));
    Ok(f.iter().zip(&g).map(|(a, b)| ssim_plane(a, b)).sum::<f64>() / f.len() as f64)
}

/// Angle between two spectra, 0 if either vanishes.
pub fn spectral_angle(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Mean spectral angle in radians.
pub fn sam(fused: &Image, gt: &Image) -> Result<f64> {
    check_pair(fused, gt)?;
    let c = fused.channels();
    let (f, g) = (fused.to_f64(), gt.to_f64());
    let n = f.len() / c;
    Ok(f.chunks_exact(c)
        .zip(g.chunks_exact(c))
        .map(|(a, b)| spectral_angle(a, b))
        .sum::<f64>()
        / n as f64)
}

/// `100 / ratio * sqrt(mean_b(rmse_b^2 / mu_b^2))` with `mu_b` the reference
/// band mean. A zero-mean reference band is only accepted when it is matched
/// exactly.
pub fn ergas(fused: &Image, gt: &Image) -> Result<f64> {
    check_pair(fused, gt)?;
    let (f, g) = (Plane::bands(fused), Plane::bands(gt));
    let mut acc = 0.0;
    for (a, b) in f.iter().zip(&g) {
        let e = mse(&a.v, &b.v);
        let mu = mean(&b.v);
        if mu == 0.0 {
            if e != 0.0 {
                return Err(invalid("ERGAS is undefined for a zero-mean reference band"));
            }
            continue;
        }
        acc += e / (mu * mu);
    }
    Ok(100.0 / ERGAS_RATIO * (acc / f.len() as f64).sqrt())
}

fn laplacian(p: &Plane) -> Vec<f64> {
    let mut out = Vec::with_capacity((p.h - 2) * (p.w - 2));
    for y in 1..p.h - 1 {
        for x in 1..p.w - 1 {
            let mut s = 8.0 * p.v[y * p.w + x];
            for dy in [0, 1, 2] {
                for dx in [0, 1, 2] {
                    if dy != 1 || dx != 1 {
                        s -= p.v[(y + dy - 1) * p.w + x + dx - 1];
                    }
                }
            }
            out.push(s);
        }
    }
    out
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x - ma, y - mb);
        sab += u * v;
        saa += u * u;
        sbb += v * v;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Band-averaged correlation of 8-neighbour Laplacian responses on the
/// interior.
pub fn scc(fused: &Image, gt: &Image) -> Result<f64> {
    check_pair(fused, gt)?;
    if fused.height() < 3 || fused.width() < 3 {
        return Err(invalid("SCC needs at least 3 x 3 pixels"));
    }
    let (f, g) = (Plane::bands(fused), Plane::bands(gt));
    Ok(f.iter()
        .zip(&g)
        .map(|(a, b)| pearson(&laplacian(a), &laplacian(b)))
        .sum::<f64>()
        / f.len() as f64)
}

pub fn full_reference(fused: &Image, gt: &Image) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(fused, gt)?,
        ssim: ssim(fused, gt)?,
        sam: sam(fused, gt)?,
        ergas: ergas(fused, gt)?,
        scc: scc(fused, gt)?,
    })
}

/// Summed-area table with a zero first row and column.
fn integral(v: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut s = vec![0.0; (h + 1) * (w + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += v[y * w + x];
            s[(y + 1) * (w + 1) + x + 1] = s[y * (w + 1) + x + 1] + row;
        }
    }
    s
}

fn block_sum(s: &[f64], w: usize, y: usize, x: usize, n: usize) -> f64 {
    let w1 = w + 1;
    s[(y + n) * w1 + x + n] - s[y * w1 + x + n] - s[(y + n) * w1 + x] + s[y * w1 + x]
}

/// Universal quality index of one block from its moments.
fn q_from_moments(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64) -> f64 {
    let den_v = vx + vy;
    let den_m = mx * mx + my * my;
    match (den_v == 0.0, den_m == 0.0) {
        (true, true) => 1.0,
        (true, false) => 2.0 * mx * my / den_m,
        (false, true) => 2.0 * cxy / den_v,
        (false, false) => 4.0 * cxy * mx * my / (den_v * den_m),
    }
}

fn q_planes(a: &Plane, b: &Plane) -> f64 {
    let (h, w) = (a.h, a.w);
    let n = Q_BLOCK.min(h).min(w);
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let sa = integral(&a.v, h, w);
    let sb = integral(&b.v, h, w);
    let saa = integral(&prod(&a.v, &a.v), h, w);
    let sbb = integral(&prod(&b.v, &b.v), h, w);
    let sab = integral(&prod(&a.v, &b.v), h, w);
    let area = (n * n) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - n {
        for x in 0..=w - n {
            let mx = block_sum(&sa, w, y, x, n) / area;
            let my = block_sum(&sb, w, y, x, n) / area;
            let vx = (block_sum(&saa, w, y, x, n) / area - mx * mx).max(0.0);
            let vy = (block_sum(&sbb, w, y, x, n) / area - my * my).max(0.0);
            let cxy = block_sum(&sab, w, y, x, n) / area - mx * my;
            total += q_from_moments(mx, my, vx, vy, cxy);
            count += 1;
        }
    }
    total / count as f64
}

/// Q-index of two single-band images averaged over sliding 32 x 32 blocks
/// (or the whole image when smaller).
pub fn q_index(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    if a.channels() != 1 {
        return Err(invalid("Q-index compares single bands"));
    }
    Ok(q_planes(&Plane::of(a, 0), &Plane::of(b, 0)))
}

/// Spectral and spatial distortion with exponents `p = q = 1` and their
/// QNR product.
pub fn no_reference(fused: &Image, pan: &Image, lrms: &Image, scale: usize) -> Result<NoRefReport> {
    if pan.channels() != 1 || pan.height() != fused.height() || pan.width() != fused.width() {
        return Err(shape_err("PAN must be single-band at the fused resolution"));
    }
    if lrms.channels() != fused.channels()
        || lrms.height() * scale != fused.height()
        || lrms.width() * scale != fused.width()
    {
        return Err(shape_err("LR-MS must match the fused bands at 1/scale size"));
    }
    let nb = fused.channels();
    let (f, l) = (Plane::bands(fused), Plane::bands(lrms));
    let mut d_lambda = 0.0;
    let mut pairs = 0usize;
    for i in 0..nb {
        for j in i + 1..nb {
            d_lambda += (q_planes(&f[i], &f[j]) - q_planes(&l[i], &l[j])).abs();
            pairs += 1;
        }
    }
    if pairs > 0 {
        d_lambda /= pairs as f64;
    }
    let p_hr = Plane::of(pan, 0);
    let p_lr = Plane::of(&degrade(pan, scale)?, 0);
    let d_s = (0..nb)
        .map(|b| (q_planes(&f[b], &p_hr) - q_planes(&l[b], &p_lr)).abs())
        .sum::<f64>()
        / nb as f64;
    Ok(NoRefReport::new(d_lambda, d_s))
}

/// Normalized intensity histogram over `[0, 1]`; out-of-range values land in
/// the end bins.
pub fn histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    let n = values.len().max(1) as f64;
    h.iter_mut().for_each(|c| *c /= n);
    h
}

/// 1-D earth mover's distance in bin units: L1 distance of the cumulative sums.
pub fn emd(a: &[f64], b: &[f64]) -> f64 {
    let (mut ca, mut cb, mut d) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ca += x;
        cb += y;
        d += (ca - cb).abs();
    }
    d
}

pub fn emd_coefficient(emd: f64) -> f64 {
    1.0 / (1.0 + emd)
}

/// Which comparison a prior row belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    PanVsGt,
    LrmsVsGt,
    LrmsAdjacent,
    GtAdjacent,
}

impl PriorKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::PanVsGt => "pan-gt",
            Self::LrmsVsGt => "lrms-gt",
            Self::LrmsAdjacent => "lrms-adjacent",
            Self::GtAdjacent => "gt-adjacent",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorRow {
    pub kind: PriorKind,
    pub a: String,
    pub b: String,
    pub emd: f64,
    pub coefficient: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PriorTable {
    pub rows: Vec<PriorRow>,
}

impl PriorTable {
    pub fn mean(&self, kind: PriorKind) -> f64 {
        let v: Vec<f64> = self.rows.iter().filter(|r| r.kind == kind).map(|r| r.coefficient).collect();
        if v.is_empty() {
            0.0
        } else {
            mean(&v)
        }
    }

    /// CSV with header `kind,a,b,emd,coefficient`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,a,b,emd,coefficient\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.6},{:.6}", r.kind.label(), r.a, r.b, r.emd, r.coefficient);
        }
        out
    }
}

/// Histogram correlations between PAN, upsampled LR-MS bands and reference
/// bands.
pub fn prior_analysis(scene: &ScenePair, bins: usize) -> Result<PriorTable> {
    let gt = scene
        .gt
        .as_ref()
        .ok_or_else(|| invalid("prior analysis needs a reference image"))?;
    if bins < 2 {
        return Err(invalid("need at least two histogram bins"));
    }
    let up = upsample_bicubic(&scene.lrms, scene.scale)?;
    let hist = |img: &Image, c: usize| histogram(&img.channel_f64(c), bins);
    let pan = hist(&scene.pan, 0);
    let gts: Vec<_> = (0..gt.channels()).map(|c| hist(gt, c)).collect();
    let ms: Vec<_> = (0..up.channels()).map(|c| hist(&up, c)).collect();
    let mut rows = Vec::new();
    let mut push = |kind, a: String, b: String, ha: &[f64], hb: &[f64]| {
        let e = emd(ha, hb);
        rows.push(PriorRow {
            kind,
            a,
            b,
            emd: e,
            coefficient: emd_coefficient(e),
        });
    };
    for (b, g) in gts.iter().enumerate() {
        push(PriorKind::PanVsGt, "pan".into(), format!("gt{b}"), &pan, g);
    }
    for (b, (m, g)) in ms.iter().zip(&gts).enumerate() {
        push(PriorKind::LrmsVsGt, format!("lrms{b}"), format!("gt{b}"), m, g);
    }
    for b in 1..ms.len() {
        push(PriorKind::LrmsAdjacent, format!("lrms{}", b - 1), format!("lrms{b}"), &ms[b - 1], &ms[b]);
    }
    for b in 1..gts.len() {
        push(PriorKind::GtAdjacent, format!("gt{}", b - 1), format!("gt{b}"), &gts[b - 1], &gts[b]);
    }
    Ok(PriorTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::synth_scene;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(h, w, c, (0..h * w * c).map(|_| rng.gen_range(0.05..0.95)).collect()).unwrap()
    }

    #[test]
    fn identity_anchors() {
        let a = random_image(20, 24, 4, 0);
        let r = full_reference(&a, &a).unwrap();
        assert_eq!(r.psnr, PSNR_CAP);
        assert!((r.ssim - 1.0).abs() < 1e-9);
        assert!(r.sam.abs() < 1e-9);
        assert!(r.ergas.abs() < 1e-9);
        assert!((r.scc - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_offset_psnr() {
        let a = Image::filled(8, 8, 4, 0.6);
        let b = Image::filled(8, 8, 4, 0.5);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 0.01);
    }

    #[test]
    fn symmetric_metrics() {
        let a = random_image(16, 16, 4, 1);
        let b = random_image(16, 16, 4, 2);
        assert!((sam(&a, &b).unwrap() - sam(&b, &a).unwrap()).abs() < 1e-15);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn angle_cases() {
        assert_eq!(spectral_angle(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
        let right = spectral_angle(&[1.0, 0.0, 0.0, 0.0], &[0.0, 3.0, 0.0, 0.0]);
        assert!((right - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let tiny = spectral_angle(&[1.0, 1.0], &[1.0, 1.0 + 1e-12]);
        assert!(tiny > 0.0 && tiny < 1e-11);
    }

    #[test]
    fn scc_zero_variance_band() {
        let a = Image::filled(6, 6, 4, 0.3);
        assert_eq!(scc(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn q_index_cases() {
        let a = random_image(40, 40, 1, 3);
        assert!((q_index(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let flat = Image::filled(8, 8, 1, 0.4);
        assert!((q_index(&flat, &flat).unwrap() - 1.0).abs() < 1e-12);
        let neg = Image::new(40, 40, 1, a.data().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(q_index(&a, &neg).unwrap() < 0.0);
    }

    #[test]
    fn q_matches_direct_block_average() {
        let a = random_image(34, 35, 1, 4);
        let b = random_image(34, 35, 1, 5);
        let (pa, pb) = (Plane::of(&a, 0), Plane::of(&b, 0));
        let n = 32;
        let mut total = 0.0;
        let mut count = 0.0;
        for y in 0..=34 - n {
            for x in 0..=35 - n {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for dy in 0..n {
                    for dx in 0..n {
                        xs.push(pa.v[(y + dy) * 35 + x + dx]);
                        ys.push(pb.v[(y + dy) * 35 + x + dx]);
                    }
                }
                let (mx, my) = (mean(&xs), mean(&ys));
                let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / xs.len() as f64;
                let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / ys.len() as f64;
                let c = xs.iter().zip(&ys).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / xs.len() as f64;
                total += 4.0 * c * mx * my / ((vx + vy) * (mx * mx + my * my));
                count += 1.0;
            }
        }
        assert!((q_index(&a, &b).unwrap() - total / count).abs() < 1e-9);
    }

    #[test]
    fn qnr_product_and_upsampled_scene() {
        let r = NoRefReport::new(0.0, 0.0);
        assert_eq!(r.qnr, 1.0);
        let r = NoRefReport::new(0.1, 0.2);
        assert_eq!(r.qnr, (1.0 - 0.1) * (1.0 - 0.2));

        let scene = synth_scene(0, 64).unwrap();
        let fused = upsample_bicubic(&scene.lrms, 4).unwrap();
        let pan = fused.channel_mean();
        let r = no_reference(&fused, &pan, &scene.lrms, 4).unwrap();
        assert!(r.d_lambda < 0.05, "{r:?}");
        assert_eq!(r.qnr, (1.0 - r.d_lambda) * (1.0 - r.d_s));
        assert!(no_reference(&fused, &pan, &fused, 4).is_err());
    }

    #[test]
    fn emd_examples() {
        assert_eq!(emd(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
        assert_eq!(emd_coefficient(0.0), 1.0);
        assert_eq!(emd(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(emd_coefficient(1.0), 0.5);
        let a = histogram(&[0.1, 0.5, 0.9], 4);
        let b = histogram(&[0.3, 0.3, 1.0], 4);
        assert_eq!(emd(&a, &b), emd(&b, &a));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn prior_table_shape() {
        let scene = synth_scene(2, 32).unwrap();
        let t = prior_analysis(&scene, 64).unwrap();
        assert_eq!(t.rows.len(), 4 + 4 + 3 + 3);
        assert!(t.rows.iter().all(|r| r.coefficient > 0.0 && r.coefficient <= 1.0));
        assert!(t.to_csv().starts_with("kind,a,b,emd,coefficient\npan-gt,pan,gt0,"));
        let mut no_gt = scene.clone();
        no_gt.gt = None;
        assert!(prior_analysis(&no_gt, 64).is_err());
        assert!(prior_analysis(&scene, 1).is_err());
    }
}
