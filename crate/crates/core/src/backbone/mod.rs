//! Per-frame embeddings from a frozen image network with global average
//! pooling.
//!
//! Two implementations sit behind [`Backbone`]: an ONNX model file (for the
//! real pretrained network) and [`TinyBackbone`], a seeded two-layer
//! convolution stack used for desk-scale runs and tests.

mod builtin;
mod features;
#[cfg(feature = "onnx")]
mod onnx;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framepipe::{FrameSequence, PixelScale};

pub use builtin::{builtin_tiny_backbone, TinyBackbone, BUILTIN_DIM, BUILTIN_MIN_SIDE};
pub use features::{FeatureCache, FeatureSequence};
#[cfg(feature = "onnx")]
pub use onnx::{OnnxBackbone, TensorLayout};

#[derive(Debug, Error)]
pub enum BackboneError {
    #[error("model file {0} not found")]
    MissingFile(PathBuf),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("invalid backbone spec: {0}")]
    InvalidSpec(String),
    #[error("frame is {found_side}px, backbone expects {expected_side}px")]
    DimensionMismatch { expected_side: usize, found_side: usize },
    #[error("inference failed: {0}")]
    Inference(String),
    #[error("backbone produced non-finite features for {0}")]
    NonFinite(String),
    #[error(transparent)]
    TensorFile(#[from] crate::tensor_file::TensorFileError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub name: String,
    pub input_side_px: usize,
    pub output_dim: usize,
    #[serde(default)]
    pub pixel_scale: PixelScale,
    /// ONNX model file. Absent selects the built-in backbone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    /// Weight seed, built-in backbone only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl BackboneSpec {
    pub fn builtin(seed: u64) -> Self {
        Self {
            name: "builtin".into(),
            input_side_px: 224,
            output_dim: BUILTIN_DIM,
            pixel_scale: PixelScale::SymmetricUnit,
            model_path: None,
            seed: Some(seed),
        }
    }

    pub fn onnx(name: impl Into<String>, path: impl Into<PathBuf>, input_side_px: usize, output_dim: usize) -> Self {
        Self {
            name: name.into(),
            input_side_px,
            output_dim,
            pixel_scale: PixelScale::SymmetricUnit,
            model_path: Some(path.into()),
            seed: None,
        }
    }

    pub fn is_builtin(&self) -> bool {
        self.model_path.is_none()
    }
}

/// A frozen per-frame feature extractor. Read-only after construction and
/// shareable across extraction workers.
pub trait Backbone: Send + Sync {
    fn name(&self) -> &str;
    fn input_side_px(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn pixel_scale(&self) -> PixelScale;
    /// Embeds one `side x side x 3` frame (row-major, channels last).
    fn embed(&self, frame: &[f32]) -> Result<Vec<f32>, BackboneError>;
}

pub fn load_backbone(spec: &BackboneSpec) -> Result<Box<dyn Backbone>, BackboneError> {
    if spec.output_dim == 0 {
        return Err(BackboneError::InvalidSpec("output_dim must be positive".into()));
    }
    match &spec.model_path {
        None => {
            let seed = spec.seed.unwrap_or(0);
            if spec.output_dim != BUILTIN_DIM {
                return Err(BackboneError::ShapeMismatch(format!(
                    "built-in backbone has output dim {BUILTIN_DIM}, spec asks for {}",
                    spec.output_dim
                )));
            }
            let b = TinyBackbone::new(seed, spec.input_side_px)?
                .with_name(&spec.name)
                .with_pixel_scale(spec.pixel_scale);
            Ok(Box::new(b))
        }
        Some(path) => {
            if spec.seed.is_some() {
                return Err(BackboneError::InvalidSpec(
                    "seed applies only to the built-in backbone; drop it or model_path".into(),
                ));
            }
            load_model_file(spec, path)
        }
    }
}

#[cfg(feature = "onnx")]
fn load_model_file(spec: &BackboneSpec, path: &std::path::Path) -> Result<Box<dyn Backbone>, BackboneError> {
    Ok(Box::new(OnnxBackbone::load(spec, path)?))
}

#[cfg(not(feature = "onnx"))]
fn load_model_file(_spec: &BackboneSpec, path: &std::path::Path) -> Result<Box<dyn Backbone>, BackboneError> {
    if !path.exists() {
        return Err(BackboneError::MissingFile(path.to_path_buf()));
    }
    Err(BackboneError::Unsupported(
        "this build has no ONNX support (enable the `onnx` feature)".into(),
    ))
}

/// Runs every frame through the backbone. Output is `T x D`.
pub fn extract(backbone: &dyn Backbone, frames: &FrameSequence) -> Result<FeatureSequence, BackboneError> {
    if frames.side_px != backbone.input_side_px() {
        return Err(BackboneError::DimensionMismatch {
            expected_side: backbone.input_side_px(),
            found_side: frames.side_px,
        });
    }
    let dim = backbone.output_dim();
    let mut data = Vec::with_capacity(frames.len() * dim);
    for frame in frames.frames() {
        let v = backbone.embed(frame)?;
        if v.len() != dim {
            return Err(BackboneError::ShapeMismatch(format!(
                "backbone returned {} values, declared {dim}",
                v.len()
            )));
        }
        data.extend(v);
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(BackboneError::NonFinite(frames.local_id.to_string()));
    }
    Ok(FeatureSequence::new(frames.local_id.clone(), dim, data).expect("shape checked above"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(side: usize, t: usize, value: f32) -> FrameSequence {
        FrameSequence::new("vid_0001".into(), side, t, vec![value; t * side * side * 3]).unwrap()
    }

    #[test]
    fn builtin_selected_without_model_path() {
        let mut spec = BackboneSpec::builtin(7);
        spec.input_side_px = 32;
        let b = load_backbone(&spec).unwrap();
        assert_eq!(b.output_dim(), 8);
        assert_eq!(b.input_side_px(), 32);
    }

    #[test]
    fn builtin_rejects_other_dims() {
        let mut spec = BackboneSpec::builtin(7);
        spec.output_dim = 100;
        assert!(matches!(load_backbone(&spec), Err(BackboneError::ShapeMismatch(_))));
    }

    #[test]
    fn model_path_and_seed_are_exclusive() {
        let mut spec = BackboneSpec::onnx("m", "/nonexistent.onnx", 224, 2048);
        spec.seed = Some(3);
        assert!(matches!(load_backbone(&spec), Err(BackboneError::InvalidSpec(_))));
    }

    #[test]
    fn missing_model_file() {
        let spec = BackboneSpec::onnx("m", "/nonexistent/model.onnx", 224, 2048);
        assert!(matches!(load_backbone(&spec), Err(BackboneError::MissingFile(_))));
    }

    #[test]
    fn extract_shape_and_determinism() {
        let mut spec = BackboneSpec::builtin(7);
        spec.input_side_px = 24;
        let b = load_backbone(&spec).unwrap();
        let seq = FrameSequence::new(
            "vid_0002".into(),
            24,
            31,
            (0..31 * 24 * 24 * 3).map(|i| ((i * 37 % 255) as f32) / 127.5 - 1.0).collect(),
        )
        .unwrap();
        let a = extract(b.as_ref(), &seq).unwrap();
        assert_eq!((a.steps(), a.dim()), (31, 8));
        let again = extract(b.as_ref(), &seq).unwrap();
        assert_eq!(
            a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            again.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn extract_rejects_wrong_side() {
        let mut spec = BackboneSpec::builtin(7);
        spec.input_side_px = 24;
        let b = load_backbone(&spec).unwrap();
        assert!(matches!(
            extract(b.as_ref(), &frames(16, 3, 0.0)),
            Err(BackboneError::DimensionMismatch { expected_side: 24, found_side: 16 })
        ));
    }
}
