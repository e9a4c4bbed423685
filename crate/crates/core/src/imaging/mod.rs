//! Rasters, file formats, Wald-protocol degradation, resampling and patching.
//!
//! Every raster is stored as [`Image`]: row-major, channel-last `f32`
//! samples normalized to `[0, 1]`. Numerical work elsewhere in the crate
//! happens in `f64`; images are the storage and interchange type.

mod io;
mod patches;
mod resample;
mod synth;
mod wald;

pub use io::{
    decode_hsif, encode_hsif, read_hsif, read_pnm, write_hsif, write_pgm, write_ppm, HSIF_MAGIC,
};
pub use patches::{extract_patches, reassemble_patches, PatchGrid, PatchLayout};
pub use resample::upsample_bicubic;
pub use synth::synth_scene;
pub use wald::{decimate, degrade, gaussian_blur, gaussian_kernel, wald_degrade};

use crate::error::{invalid, shape_err, Result};

/// Default resolution ratio between PAN and LR-MS.
pub const DEFAULT_SCALE: usize = 4;

/// Number of multispectral bands handled by the pipeline.
pub const MS_BANDS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let expected = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| invalid("image dimensions overflow"))?;
        if data.len() != expected {
            return Err(shape_err(format!(
                "{height}x{width}x{channels} image needs {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    /// Builds an image from `f64` samples, clamping to `[0, 1]`.
    pub fn from_f64(height: usize, width: usize, channels: usize, data: &[f64]) -> Result<Self> {
        let data = data.iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect();
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    /// Copies one channel out as a single-channel image.
    pub fn channel(&self, c: usize) -> Image {
        assert!(c < self.channels, "channel {c} out of range");
        let data = self
            .data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// One channel as `f64` samples, row-major.
    pub fn channel_f64(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .map(|&v| f64::from(v))
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    /// Interleaves single-channel images into one multi-channel image.
    pub fn from_channels(bands: &[Image]) -> Result<Image> {
        let first = bands.first().ok_or_else(|| invalid("no channels given"))?;
        let (h, w) = (first.height, first.width);
        for b in bands {
            if b.height != h || b.width != w || b.channels != 1 {
                return Err(shape_err("channels must be single-channel and equally sized"));
            }
        }
        let c = bands.len();
        let mut data = vec![0.0; h * w * c];
        for (ci, b) in bands.iter().enumerate() {
            for (p, &v) in b.data.iter().enumerate() {
                data[p * c + ci] = v;
            }
        }
        Image::new(h, w, c, data)
    }

    /// Mean over channels, giving a single-channel image.
    pub fn channel_mean(&self) -> Image {
        let c = self.channels;
        let data = self
            .data
            .chunks_exact(c)
            .map(|px| (px.iter().map(|&v| f64::from(v)).sum::<f64>() / c as f64) as f32)
            .collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn clamp01(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }
}

/// A co-registered PAN / LR-MS pair, optionally with its HR-MS reference.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenePair {
    pub pan: Image,
    pub lrms: Image,
    pub gt: Option<Image>,
    pub scale: usize,
}

impl ScenePair {
    pub fn new(pan: Image, lrms: Image, gt: Option<Image>, scale: usize) -> Result<Self> {
        let scene = Self {
            pan,
            lrms,
            gt,
            scale,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale == 0 {
            return Err(invalid("scale must be positive"));
        }
        if self.pan.channels() != 1 {
            return Err(shape_err("PAN must have one channel"));
        }
        if self.lrms.channels() != MS_BANDS {
            return Err(shape_err(format!("LR-MS must have {MS_BANDS} bands")));
        }
        if self.pan.height() != self.scale * self.lrms.height()
            || self.pan.width() != self.scale * self.lrms.width()
        {
            return Err(shape_err(format!(
                "PAN {}x{} is not {}x the LR-MS {}x{}",
                self.pan.height(),
                self.pan.width(),
                self.scale,
                self.lrms.height(),
                self.lrms.width()
            )));
        }
        if let Some(gt) = &self.gt {
            if gt.height() != self.pan.height()
                || gt.width() != self.pan.width()
                || gt.channels() != MS_BANDS
            {
                return Err(shape_err("GT must match PAN size with 4 bands"));
            }
        }
        Ok(())
    }
}
