//! The raster type shared by every module.
//!
//! Samples are stored as `f64` in planar order: all of channel 0, then all
//! of channel 1, and so on. Inside a plane the layout is row-major, so the
//! sample at row `y`, column `x`, channel `c` lives at
//! `c * height * width + y * width + x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value range an image's samples are nominally expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NominalRange {
    /// Samples nominally in `[0, 1]`.
    #[default]
    Unit,
    /// Samples nominally in `[0, 255]`.
    Byte,
}

impl NominalRange {
    pub fn max(self) -> f64 {
        match self {
            NominalRange::Unit => 1.0,
            NominalRange::Byte => 255.0,
        }
    }

    /// Multiplier that converts a byte-scale quantity into this range.
    pub fn from_byte_scale(self) -> f64 {
        self.max() / 255.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    range: NominalRange,
}

pub(crate) fn check_shape(height: usize, width: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::invalid(format!(
            "image dimensions must be non-zero, got {height}x{width}"
        )));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::invalid(format!(
            "channel count must be 1 or 3, got {channels}"
        )));
    }
    Ok(())
}

impl Image {
    /// Builds an image from planar samples, validating every invariant.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
        range: NominalRange,
    ) -> Result<Self> {
        check_shape(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "expected {} samples for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
            range,
        })
    }

    pub fn filled(
        height: usize,
        width: usize,
        channels: usize,
        value: f64,
        range: NominalRange,
    ) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
            range,
        )
    }

    /// Builds an image by evaluating `f(y, x, c)` at every sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        range: NominalRange,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_shape(height, width, channels)?;
        let mut data = Vec::with_capacity(height * width * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data, range)
    }

    /// Internal constructor for results computed from already-valid inputs.
    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
        range: NominalRange,
    ) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Image {
            height,
            width,
            channels,
            data,
            range,
        }
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

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn range(&self) -> NominalRange {
        self.range
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[c * self.plane_len() + y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Clamps samples into the nominal range; returns how many were changed.
    pub fn clamp_to_range(&mut self) -> usize {
        let hi = self.range.max();
        let mut changed = 0;
        for v in &mut self.data {
            let c = v.clamp(0.0, hi);
            if c != *v {
                *v = c;
                changed += 1;
            }
        }
        changed
    }

    /// Returns a copy with samples rescaled into another nominal range.
    pub fn to_range(&self, range: NominalRange) -> Image {
        if range == self.range {
            return self.clone();
        }
        let k = range.max() / self.range.max();
        Image {
            data: self.data.iter().map(|v| v * k).collect(),
            range,
            ..*self
        }
    }

    pub(crate) fn with_data(&self, data: Vec<f64>) -> Image {
        debug_assert_eq!(data.len(), self.data.len());
        Image { data, ..*self }
    }
}
