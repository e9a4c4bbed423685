//! Overlapping square patches and their overlap-averaged reassembly.

use super::Image;
use crate::error::{invalid, shape_err, Result};

/// Geometry of a regular grid of `patch x patch` windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchLayout {
    pub patch: usize,
    pub stride: usize,
    pub rows: usize,
    pub cols: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl PatchLayout {
    pub fn new(height: usize, width: usize, channels: usize, patch: usize, stride: usize) -> Result<Self> {
        if patch == 0 || patch > height.min(width) {
            return Err(invalid(format!(
                "patch size {patch} must be in 1..={}",
                height.min(width)
            )));
        }
        if stride == 0 || stride > patch {
            return Err(invalid(format!("stride {stride} must be in 1..={patch}")));
        }
        Ok(Self {
            patch,
            stride,
            rows: (height - patch) / stride + 1,
            cols: (width - patch) / stride + 1,
            height,
            width,
            channels,
        })
    }

    /// Number of patches `N`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples per patch: `patch^2 * channels`.
    pub fn block_len(&self) -> usize {
        self.patch * self.patch * self.channels
    }

    /// Top-left pixel of patch `i` (row-major patch order).
    pub fn origin(&self, i: usize) -> (usize, usize) {
        ((i / self.cols) * self.stride, (i % self.cols) * self.stride)
    }

    /// Copies every patch out of a channel-last buffer matching this layout.
    pub fn extract<T: Copy>(&self, data: &[T]) -> Vec<T> {
        debug_assert_eq!(data.len(), self.height * self.width * self.channels);
        let (p, c) = (self.patch, self.channels);
        let mut out = Vec::with_capacity(self.len() * self.block_len());
        for i in 0..self.len() {
            let (y0, x0) = self.origin(i);
            for y in y0..y0 + p {
                let start = (y * self.width + x0) * c;
                out.extend_from_slice(&data[start..start + p * c]);
            }
        }
        out
    }

    /// Number of patches covering each pixel.
    pub fn coverage(&self) -> Vec<u32> {
        let p = self.patch;
        let mut counts = vec![0u32; self.height * self.width];
        for i in 0..self.len() {
            let (y0, x0) = self.origin(i);
            for y in y0..y0 + p {
                for x in x0..x0 + p {
                    counts[y * self.width + x] += 1;
                }
            }
        }
        counts
    }

    /// Overlap-averages per-patch blocks back into a channel-last buffer.
    /// Pixels no patch covers are left at zero.
    pub fn reassemble_f64(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.len() * self.block_len());
        let (p, c) = (self.patch, self.channels);
        let mut sum = vec![0.0; self.height * self.width * c];
        for (i, block) in values.chunks_exact(self.block_len()).enumerate() {
            let (y0, x0) = self.origin(i);
            for dy in 0..p {
                let start = ((y0 + dy) * self.width + x0) * c;
                for (s, v) in sum[start..start + p * c].iter_mut().zip(&block[dy * p * c..]) {
                    *s += v;
                }
            }
        }
        for (px, &n) in sum.chunks_exact_mut(c).zip(&self.coverage()) {
            if n > 0 {
                px.iter_mut().for_each(|v| *v /= f64::from(n));
            }
        }
        sum
    }

    /// Adjoint of [`reassemble_f64`](Self::reassemble_f64): maps a gradient on
    /// the reassembled buffer back to per-patch blocks.
    pub fn reassemble_adjoint(&self, grad: &[f64]) -> Vec<f64> {
        let counts = self.coverage();
        let c = self.channels;
        let scaled: Vec<f64> = grad
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let n = counts[k / c];
                if n > 0 {
                    g / f64::from(n)
                } else {
                    0.0
                }
            })
            .collect();
        self.extract(&scaled)
    }
}

/// Patches of one image, in row-major patch order.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchGrid {
    pub layout: PatchLayout,
    pub patches: Vec<f32>,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn patch(&self, i: usize) -> &[f32] {
        let n = self.layout.block_len();
        &self.patches[i * n..(i + 1) * n]
    }
}

pub fn extract_patches(img: &Image, patch: usize, stride: usize) -> Result<PatchGrid> {
    let layout = PatchLayout::new(img.height(), img.width(), img.channels(), patch, stride)?;
    Ok(PatchGrid {
        patches: layout.extract(img.data()),
        layout,
    })
}

/// Averages every pixel over the patches that cover it.
pub fn reassemble_patches(layout: &PatchLayout, values: &[f32]) -> Result<Image> {
    if values.len() != layout.len() * layout.block_len() {
        return Err(shape_err(format!(
            "expected {} patch samples, got {}",
            layout.len() * layout.block_len(),
            values.len()
        )));
    }
    let wide: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
    let data = layout.reassemble_f64(&wide).into_iter().map(|v| v as f32).collect();
    Image::new(layout.height, layout.width, layout.channels, data)
}
