use rand::Rng;

use super::{Backbone, BackboneError};
use crate::framepipe::PixelScale;
use crate::seed::rng_from_seed;

pub const BUILTIN_DIM: usize = 8;
/// Two unpadded stride-2 3x3 convolutions need at least this many pixels.
pub const BUILTIN_MIN_SIDE: usize = 7;

const KERNEL: usize = 3;
const STRIDE: usize = 2;
const CHANNELS: usize = 8;

/// 3x3 stride-2 convolution without padding, channels-last, tanh activation.
#[derive(Debug, Clone)]
struct Conv {
    in_ch: usize,
    out_ch: usize,
    /// `[out][ky][kx][in]`
    weights: Vec<f32>,
    bias: Vec<f32>,
}

impl Conv {
    fn seeded(in_ch: usize, out_ch: usize, rng: &mut impl Rng) -> Self {
        let fan_in = (KERNEL * KERNEL * in_ch) as f32;
        let fan_out = (KERNEL * KERNEL * out_ch) as f32;
        let limit = (6.0 / (fan_in + fan_out)).sqrt();
        let weights = (0..out_ch * KERNEL * KERNEL * in_ch)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        let bias = (0..out_ch).map(|_| rng.random_range(-0.5f32..0.5)).collect();
        Self {
            in_ch,
            out_ch,
            weights,
            bias,
        }
    }

    fn out_side(side: usize) -> usize {
        (side - KERNEL) / STRIDE + 1
    }

    fn forward(&self, input: &[f32], side: usize) -> (Vec<f32>, usize) {
        let out_side = Self::out_side(side);
        let mut out = vec![0.0f32; out_side * out_side * self.out_ch];
        for oy in 0..out_side {
            for ox in 0..out_side {
                let dst = &mut out[(oy * out_side + ox) * self.out_ch..][..self.out_ch];
                for (o, d) in dst.iter_mut().enumerate() {
                    let mut acc = self.bias[o];
                    let w = &self.weights[o * KERNEL * KERNEL * self.in_ch..];
                    for ky in 0..KERNEL {
                        let row = (oy * STRIDE + ky) * side;
                        for kx in 0..KERNEL {
                            let px = &input[(row + ox * STRIDE + kx) * self.in_ch..][..self.in_ch];
                            let wk = &w[(ky * KERNEL + kx) * self.in_ch..][..self.in_ch];
                            for (a, b) in px.iter().zip(wk) {
                                acc += a * b;
                            }
                        }
                    }
                    *d = acc.tanh();
                }
            }
        }
        (out, out_side)
    }
}

/// Seeded stand-in for a pretrained backbone: two convolutions with
/// downsampling, then global average pooling to 8 features.
#[derive(Debug, Clone)]
pub struct TinyBackbone {
    name: String,
    side: usize,
    scale: PixelScale,
    conv1: Conv,
    conv2: Conv,
}

pub fn builtin_tiny_backbone(seed: u64) -> TinyBackbone {
    TinyBackbone::new(seed, 224).expect("224 exceeds the minimum side")
}

impl TinyBackbone {
    pub fn new(seed: u64, side: usize) -> Result<Self, BackboneError> {
        if side < BUILTIN_MIN_SIDE {
            return Err(BackboneError::InvalidSpec(format!(
                "built-in backbone needs input side >= {BUILTIN_MIN_SIDE}, got {side}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let conv1 = Conv::seeded(3, CHANNELS, &mut rng);
        let conv2 = Conv::seeded(CHANNELS, BUILTIN_DIM, &mut rng);
        Ok(Self {
            name: "builtin".into(),
            side,
            scale: PixelScale::SymmetricUnit,
            conv1,
            conv2,
        })
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_owned();
        self
    }

    pub fn with_pixel_scale(mut self, scale: PixelScale) -> Self {
        self.scale = scale;
        self
    }

    /// Features for an all-zero frame: every layer sees only its bias path.
    pub fn bias_only_features(&self) -> Vec<f32> {
        let h1: Vec<f32> = self.conv1.bias.iter().map(|b| b.tanh()).collect();
        (0..BUILTIN_DIM)
            .map(|o| {
                let w = &self.conv2.weights[o * KERNEL * KERNEL * CHANNELS..][..KERNEL * KERNEL * CHANNELS];
                let mut acc = self.conv2.bias[o];
                for k in 0..KERNEL * KERNEL {
                    for (c, h) in h1.iter().enumerate() {
                        acc += h * w[k * CHANNELS + c];
                    }
                }
                acc.tanh()
            })
            .collect()
    }
}

impl Backbone for TinyBackbone {
    fn name(&self) -> &str {
        &self.name
    }

    fn input_side_px(&self) -> usize {
        self.side
    }

    fn output_dim(&self) -> usize {
        BUILTIN_DIM
    }

    fn pixel_scale(&self) -> PixelScale {
        self.scale
    }

    fn embed(&self, frame: &[f32]) -> Result<Vec<f32>, BackboneError> {
        let expected = self.side * self.side * 3;
        if frame.len() != expected {
            return Err(BackboneError::ShapeMismatch(format!(
                "frame has {} values, expected {expected}",
                frame.len()
            )));
        }
        let (h1, s1) = self.conv1.forward(frame, self.side);
        let (h2, s2) = self.conv2.forward(&h1, s1);
        let cells = (s2 * s2) as f32;
        let mut pooled = vec![0.0f32; BUILTIN_DIM];
        for px in h2.chunks_exact(BUILTIN_DIM) {
            for (p, v) in pooled.iter_mut().zip(px) {
                *p += v;
            }
        }
        for p in &mut pooled {
            *p /= cells;
        }
        Ok(pooled)
    }
}
