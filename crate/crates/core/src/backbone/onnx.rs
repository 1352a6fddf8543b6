use std::path::Path;
use std::sync::Arc;

use tract_onnx::pb::{self, tensor_shape_proto::dimension, type_proto};
use tract_onnx::prelude::*;

use super::{Backbone, BackboneError, BackboneSpec};
use crate::framepipe::PixelScale;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorLayout {
    /// `[N, 3, S, S]`
    Nchw,
    /// `[N, S, S, 3]`
    Nhwc,
}

/// A frozen network loaded from an ONNX file. Input and output shapes come
/// from the graph's declared value infos, so the spec is checked against
/// the file rather than trusted.
pub struct OnnxBackbone {
    name: String,
    side: usize,
    dim: usize,
    scale: PixelScale,
    layout: TensorLayout,
    plan: Arc<TypedRunnableModel>,
}

impl std::fmt::Debug for OnnxBackbone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxBackbone")
            .field("name", &self.name)
            .field("side", &self.side)
            .field("dim", &self.dim)
            .field("layout", &self.layout)
            .finish_non_exhaustive()
    }
}

type Dims = Vec<Option<i64>>;

fn dims_of(info: &pb::ValueInfoProto) -> Option<Dims> {
    let Some(type_proto::Value::TensorType(t)) = info.r#type.as_ref()?.value.as_ref() else {
        return None;
    };
    Some(
        t.shape
            .as_ref()?
            .dim
            .iter()
            .map(|d| match d.value {
                Some(dimension::Value::DimValue(v)) if v > 0 => Some(v),
                _ => None,
            })
            .collect(),
    )
}

fn layout_of(input: &Dims) -> Option<(TensorLayout, Option<usize>)> {
    if input.len() != 4 {
        return None;
    }
    let side = |a: Option<i64>, b: Option<i64>| match (a, b) {
        (Some(a), Some(b)) if a == b => Some(Some(a as usize)),
        (None, None) => Some(None),
        _ => None,
    };
    if input[1] == Some(3) {
        return side(input[2], input[3]).map(|s| (TensorLayout::Nchw, s));
    }
    if input[3] == Some(3) {
        return side(input[1], input[2]).map(|s| (TensorLayout::Nhwc, s));
    }
    None
}

impl OnnxBackbone {
    pub fn load(spec: &BackboneSpec, path: &Path) -> Result<Self, BackboneError> {
        if !path.is_file() {
            return Err(BackboneError::MissingFile(path.to_path_buf()));
        }
        let onnx = tract_onnx::onnx();
        let proto = onnx
            .proto_model_for_path(path)
            .map_err(|e| BackboneError::Unsupported(format!("cannot parse {}: {e}", path.display())))?;
        let graph = proto
            .graph
            .as_ref()
            .ok_or_else(|| BackboneError::Unsupported("model has no graph".into()))?;

        let inputs: Vec<&pb::ValueInfoProto> = graph
            .input
            .iter()
            .filter(|i| !graph.initializer.iter().any(|init| init.name == i.name))
            .collect();
        if inputs.len() != 1 || graph.output.is_empty() {
            return Err(BackboneError::ShapeMismatch(format!(
                "expected one image input and an output, found {} inputs and {} outputs",
                inputs.len(),
                graph.output.len()
            )));
        }
        let in_dims = dims_of(inputs[0])
            .ok_or_else(|| BackboneError::ShapeMismatch("input declares no tensor shape".into()))?;
        let (layout, file_side) = layout_of(&in_dims).ok_or_else(|| {
            BackboneError::ShapeMismatch(format!("input shape {in_dims:?} is neither [N,3,S,S] nor [N,S,S,3]"))
        })?;
        if let Some(s) = file_side {
            if s != spec.input_side_px {
                return Err(BackboneError::ShapeMismatch(format!(
                    "model input side is {s}, spec says {}",
                    spec.input_side_px
                )));
            }
        }
        let declared_dim = dims_of(&graph.output[0]).and_then(|d| {
            d.iter()
                .skip(1)
                .try_fold(1usize, |acc, v| v.map(|v| acc * v as usize))
        });
        if let Some(d) = declared_dim {
            if d != spec.output_dim {
                return Err(BackboneError::ShapeMismatch(format!(
                    "model output dim is {d}, spec says {}",
                    spec.output_dim
                )));
            }
        }

        let s = spec.input_side_px;
        let shape: [usize; 4] = match layout {
            TensorLayout::Nchw => [1, 3, s, s],
            TensorLayout::Nhwc => [1, s, s, 3],
        };
        let unsupported = |e: TractError| BackboneError::Unsupported(format!("{e:#}"));
        let plan = onnx
            .model_for_proto_model(&proto)
            .map_err(unsupported)?
            .with_input_fact(0, f32::fact(shape).into())
            .map_err(unsupported)?
            .into_optimized()
            .map_err(unsupported)?
            .into_runnable()
            .map_err(unsupported)?;

        let mut backbone = Self {
            name: spec.name.clone(),
            side: s,
            dim: declared_dim.unwrap_or(0),
            scale: spec.pixel_scale,
            layout,
            plan,
        };
        if declared_dim.is_none() {
            // Symbolic output dims: probe once to learn D.
            let probe = backbone.run(&vec![0.0; s * s * 3])?;
            if probe.len() != spec.output_dim {
                return Err(BackboneError::ShapeMismatch(format!(
                    "model output dim is {}, spec says {}",
                    probe.len(),
                    spec.output_dim
                )));
            }
            backbone.dim = probe.len();
        }
        Ok(backbone)
    }

    pub fn layout(&self) -> TensorLayout {
        self.layout
    }

    fn run(&self, frame: &[f32]) -> Result<Vec<f32>, BackboneError> {
        let s = self.side;
        let tensor = match self.layout {
            TensorLayout::Nhwc => Tensor::from_shape(&[1, s, s, 3], frame),
            TensorLayout::Nchw => {
                let mut planar = vec![0.0f32; frame.len()];
                for (i, px) in frame.chunks_exact(3).enumerate() {
                    for c in 0..3 {
                        planar[c * s * s + i] = px[c];
                    }
                }
                Tensor::from_shape(&[1, 3, s, s], &planar)
            }
        }
        .map_err(|e| BackboneError::Inference(e.to_string()))?;
        let out = self
            .plan
            .run(tvec!(tensor.into()))
            .map_err(|e| BackboneError::Inference(format!("{e:#}")))?;
        let view = out[0]
            .to_plain_array_view::<f32>()
            .map_err(|e| BackboneError::Inference(e.to_string()))?;
        Ok(view.iter().copied().collect())
    }
}

impl Backbone for OnnxBackbone {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_side_px(&self) -> usize {
        self.side
    }

    fn output_dim(&self) -> usize {
        self.dim
    }

    fn pixel_scale(&self) -> PixelScale {
        self.scale
    }

    fn embed(&self, frame: &[f32]) -> Result<Vec<f32>, BackboneError> {
        if frame.len() != self.side * self.side * 3 {
            return Err(BackboneError::ShapeMismatch(format!(
                "frame has {} values, expected {}",
                frame.len(),
                self.side * self.side * 3
            )));
        }
        self.run(frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: i64) -> Option<i64> {
        Some(v)
    }

    #[test]
    fn layouts() {
        assert_eq!(layout_of(&vec![None, d(3), d(224), d(224)]), Some((TensorLayout::Nchw, Some(224))));
        assert_eq!(layout_of(&vec![None, d(299), d(299), d(3)]), Some((TensorLayout::Nhwc, Some(299))));
        assert_eq!(layout_of(&vec![None, None, None, d(3)]), Some((TensorLayout::Nhwc, None)));
        assert_eq!(layout_of(&vec![None, d(3), d(224), d(200)]), None);
        assert_eq!(layout_of(&vec![d(1), d(224), d(224)]), None);
    }
}
