//! Turns a video interval into exactly `T` standardized frames: decode,
//! sample or pad to `T`, stretch to the backbone's square input and scale
//! pixel values.

mod decode;
mod preprocess;
mod standardize;

use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LocalId;
use crate::tensor_file::{self, Sidecar, TensorFileError, DTYPE_F32};

pub use decode::{Decoder, RawFrames, TIMESTAMPS_FILE};
pub use preprocess::{resize_normalize, PixelScale, PreprocessSpec};
pub use standardize::{pad_middle, standardize, uniform_sample, uniform_sample_indices};

pub const DEFAULT_TARGET_FRAMES: usize = 31;

#[derive(Debug, Error)]
pub enum FramepipeError {
    #[error("no frames to standardize")]
    EmptyInput,
    #[error("target frame count must be at least 1")]
    ZeroTarget,
    #[error("uniform sampling needs at least {target} frames, have {available}")]
    TooFewFrames { available: usize, target: usize },
    #[error("padding applies only below the target ({available} >= {target})")]
    NothingToPad { available: usize, target: usize },
    #[error("frame has zero dimension ({width}x{height})")]
    ZeroDimension { width: u32, height: u32 },
    #[error("empty interval [{start_s}, {end_s}]")]
    EmptyInterval { start_s: f64, end_s: f64 },
    #[error("undecodable video: {0}")]
    Undecodable(String),
    #[error("decoder failed: {0}")]
    DecoderFailure(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    TensorFile(#[from] TensorFileError),
    #[error("frame tensor {0} is malformed: {1}")]
    BadTensor(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePolicy {
    pub target_count: usize,
}

impl Default for SamplePolicy {
    fn default() -> Self {
        Self {
            target_count: DEFAULT_TARGET_FRAMES,
        }
    }
}

/// `T` frames of `side x side x 3` scaled floats, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub local_id: LocalId,
    pub side_px: usize,
    pub native_count: usize,
    data: Vec<f32>,
}

impl FrameSequence {
    pub fn new(local_id: LocalId, side_px: usize, native_count: usize, data: Vec<f32>) -> Result<Self, FramepipeError> {
        let per = side_px * side_px * 3;
        if per == 0 || data.is_empty() || data.len() % per != 0 {
            return Err(FramepipeError::BadTensor(
                local_id.to_string(),
                format!("{} values do not form {side_px}x{side_px}x3 frames", data.len()),
            ));
        }
        Ok(Self {
            local_id,
            side_px,
            native_count,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.values_per_frame()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values_per_frame(&self) -> usize {
        self.side_px * self.side_px * 3
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        let per = self.values_per_frame();
        &self.data[i * per..(i + 1) * per]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.values_per_frame())
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn save(&self, stem: &Path) -> Result<(), FramepipeError> {
        let sidecar = Sidecar {
            shape: vec![self.len(), self.side_px, self.side_px, 3],
            dtype: DTYPE_F32.to_owned(),
            local_id: self.local_id.to_string(),
            native_count: Some(self.native_count),
        };
        Ok(tensor_file::write_with(stem, sidecar, &self.data)?)
    }

    pub fn load(stem: &Path) -> Result<Self, FramepipeError> {
        let file = tensor_file::read(stem)?;
        let shape = &file.sidecar.shape;
        if shape.len() != 4 || shape[1] != shape[2] || shape[3] != 3 {
            return Err(FramepipeError::BadTensor(
                file.sidecar.local_id.clone(),
                format!("expected shape [T, side, side, 3], found {shape:?}"),
            ));
        }
        let native = file.sidecar.native_count.unwrap_or(shape[0]);
        Self::new(LocalId::new(file.sidecar.local_id), shape[1], native, file.data)
    }
}

/// Standardizes decoded frames to the policy's count, then resizes and
/// scales each one.
pub fn build_sequence(
    local_id: LocalId,
    raw: &[RgbImage],
    policy: &SamplePolicy,
    spec: &PreprocessSpec,
) -> Result<FrameSequence, FramepipeError> {
    let chosen = standardize(&raw.iter().collect::<Vec<_>>(), policy.target_count)?;
    let mut data = Vec::with_capacity(chosen.len() * spec.values_per_frame());
    for frame in chosen {
        data.extend(resize_normalize(frame, spec)?);
    }
    FrameSequence::new(local_id, spec.side_px as usize, raw.len(), data)
}
