use image::imageops::{self, FilterType};
use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::FramepipeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelScale {
    /// `[0, 255] -> [-1, 1]` via `v / 127.5 - 1`.
    #[default]
    SymmetricUnit,
    /// `[0, 255] -> [0, 1]` via `v / 255`.
    Unit,
}

impl PixelScale {
    pub fn apply(self, v: u8) -> f32 {
        match self {
            PixelScale::SymmetricUnit => v as f32 / 127.5 - 1.0,
            PixelScale::Unit => v as f32 / 255.0,
        }
    }

    pub fn range(self) -> (f32, f32) {
        match self {
            PixelScale::SymmetricUnit => (-1.0, 1.0),
            PixelScale::Unit => (0.0, 1.0),
        }
    }

    /// Inverse of [`apply`](Self::apply), rounded back to 8 bits.
    pub fn quantize(self, v: f32) -> u8 {
        let raw = match self {
            PixelScale::SymmetricUnit => (v + 1.0) * 127.5,
            PixelScale::Unit => v * 255.0,
        };
        raw.round().clamp(0.0, 255.0) as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSpec {
    pub side_px: u32,
    #[serde(default)]
    pub pixel_scale: PixelScale,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        Self {
            side_px: 224,
            pixel_scale: PixelScale::SymmetricUnit,
        }
    }
}

impl PreprocessSpec {
    pub fn values_per_frame(&self) -> usize {
        self.side_px as usize * self.side_px as usize * 3
    }
}

/// Bilinear stretch to `side_px` square (aspect ratio not preserved), then
/// per-channel scaling. Output is row-major `side x side x 3`.
pub fn resize_normalize(frame: &RgbImage, spec: &PreprocessSpec) -> Result<Vec<f32>, FramepipeError> {
    let (w, h) = frame.dimensions();
    if w == 0 || h == 0 {
        return Err(FramepipeError::ZeroDimension { width: w, height: h });
    }
    if spec.side_px == 0 {
        return Err(FramepipeError::ZeroDimension {
            width: spec.side_px,
            height: spec.side_px,
        });
    }
    let side = spec.side_px;
    let resized;
    let src = if (w, h) == (side, side) {
        frame
    } else {
        resized = imageops::resize(frame, side, side, FilterType::Triangle);
        &resized
    };
    Ok(src.as_raw().iter().map(|&v| spec.pixel_scale.apply(v)).collect())
}
