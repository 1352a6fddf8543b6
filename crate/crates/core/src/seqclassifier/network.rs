use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gru::{backward_layer, check_sequence, run_layer, GruParams, StepCache, GRU_BLOCKS};
use super::linalg::Matrix;
use super::SeqError;
use crate::corpus::Label;

pub const LOSS_EPSILON: f64 = 1e-12;
pub const DEFAULT_DROPOUT: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub hidden1: usize,
    pub hidden2: usize,
    pub hidden3: usize,
    pub dropout_rate: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden1: 16,
            hidden2: 8,
            hidden3: 8,
            dropout_rate: DEFAULT_DROPOUT,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<(), SeqError> {
        if self.hidden1 == 0 || self.hidden2 == 0 || self.hidden3 == 0 {
            return Err(SeqError::InvalidConfig("hidden sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(SeqError::InvalidConfig(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Matrix::zeros(input, output),
            b: vec![0.0; output],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.clone();
        self.w.vecmul_acc(x, &mut y);
        y
    }
}

/// Two stacked GRUs, dropout, a ReLU dense layer and a two-way softmax
/// layer. Output index 0 is irrelevant, 1 is relevant.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub gru1: GruParams,
    pub gru2: GruParams,
    pub dense1: Dense,
    pub dense2: Dense,
    pub dropout_rate: f64,
}

impl NetworkParams {
    pub fn zeros(input_dim: usize, arch: &Architecture) -> Self {
        Self {
            gru1: GruParams::zeros(input_dim, arch.hidden1),
            gru2: GruParams::zeros(arch.hidden1, arch.hidden2),
            dense1: Dense::zeros(arch.hidden2, arch.hidden3),
            dense2: Dense::zeros(arch.hidden3, 2),
            dropout_rate: arch.dropout_rate,
        }
    }

    pub fn init(input_dim: usize, arch: &Architecture, rng: &mut impl Rng) -> Self {
        Self {
            gru1: GruParams::init(input_dim, arch.hidden1, rng),
            gru2: GruParams::init(arch.hidden1, arch.hidden2, rng),
            dense1: Dense {
                w: Matrix::glorot_uniform(arch.hidden2, arch.hidden3, rng),
                b: vec![0.0; arch.hidden3],
            },
            dense2: Dense {
                w: Matrix::glorot_uniform(arch.hidden3, 2, rng),
                b: vec![0.0; 2],
            },
            dropout_rate: arch.dropout_rate,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            hidden1: self.gru1.hidden_dim(),
            hidden2: self.gru2.hidden_dim(),
            hidden3: self.dense1.w.cols(),
            dropout_rate: self.dropout_rate,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.gru1.input_dim()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), &self.architecture())
    }

    pub fn check(&self) -> Result<(), SeqError> {
        self.gru1.check()?;
        self.gru2.check()?;
        let a = self.architecture();
        let ok = self.gru2.input_dim() == a.hidden1
            && self.dense1.w.rows() == a.hidden2
            && self.dense1.b.len() == a.hidden3
            && self.dense2.w.shape() == [a.hidden3, 2]
            && self.dense2.b.len() == 2;
        if ok {
            Ok(())
        } else {
            Err(SeqError::ShapeMismatch("network layer shapes disagree".into()))
        }
    }

    /// `(name, shape)` for every parameter block, in checkpoint order.
    pub fn block_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::with_capacity(22);
        for (layer, g) in [("gru1", &self.gru1), ("gru2", &self.gru2)] {
            for (name, shape) in GRU_BLOCKS.iter().zip(g.shapes()) {
                out.push((format!("{layer}.{name}"), shape));
            }
        }
        for (layer, d) in [("dense1", &self.dense1), ("dense2", &self.dense2)] {
            out.push((format!("{layer}.w"), d.w.shape().to_vec()));
            out.push((format!("{layer}.b"), vec![d.b.len()]));
        }
        out
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(22);
        out.extend(self.gru1.blocks());
        out.extend(self.gru2.blocks());
        out.extend([self.dense1.w.as_slice(), &self.dense1.b, self.dense2.w.as_slice(), &self.dense2.b]);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(22);
        out.extend(self.gru1.blocks_mut());
        out.extend(self.gru2.blocks_mut());
        out.push(self.dense1.w.as_mut_slice());
        out.push(&mut self.dense1.b);
        out.push(self.dense2.w.as_mut_slice());
        out.push(&mut self.dense2.b);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Per-unit multipliers applied to gru2's final state: `0` for dropped
/// units, `1 / (1 - rate)` for kept ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(Vec<f64>);

impl DropoutMask {
    pub fn sample(units: usize, rate: f64, rng: &mut impl Rng) -> Self {
        let keep = 1.0 / (1.0 - rate);
        Self(
            (0..units)
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                .collect(),
        )
    }

    pub fn keep_all(units: usize, rate: f64) -> Self {
        Self(vec![1.0 / (1.0 - rate); units])
    }

    pub fn factors(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Eval,
    Train(&'a DropoutMask),
}

/// Forward activations retained for [`gradients`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub probs: [f64; 2],
    seq1: Vec<StepCache>,
    seq2: Vec<StepCache>,
    mask: Option<Vec<f64>>,
    dropped: Vec<f64>,
    a1: Vec<f64>,
    y1: Vec<f64>,
}

pub fn softmax(logits: [f64; 2]) -> Result<[f64; 2], SeqError> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(SeqError::NonFinite("softmax logits".into()));
    }
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let s = e[0] + e[1];
    Ok([e[0] / s, e[1] / s])
}

pub fn sparse_ce(probs: [f64; 2], label: usize) -> Result<f64, SeqError> {
    let p = probs.get(label).ok_or(SeqError::InvalidLabel(label))?;
    Ok(-p.max(LOSS_EPSILON).ln())
}

pub fn forward(net: &NetworkParams, seq: &[Vec<f64>], mode: Mode<'_>) -> Result<ForwardPass, SeqError> {
    net.check()?;
    check_sequence(&net.gru1, seq)?;
    let mask = match mode {
        Mode::Eval => None,
        Mode::Train(m) => {
            if m.0.len() != net.gru2.hidden_dim() {
                return Err(SeqError::ShapeMismatch(format!(
                    "dropout mask has {} units, layer has {}",
                    m.0.len(),
                    net.gru2.hidden_dim()
                )));
            }
            Some(m.0.clone())
        }
    };
    let seq1 = run_layer(&net.gru1, seq);
    let h1: Vec<Vec<f64>> = seq1.iter().map(|c| c.h.clone()).collect();
    let seq2 = run_layer(&net.gru2, &h1);
    let last = &seq2.last().expect("sequence checked non-empty").h;
    let dropped: Vec<f64> = match &mask {
        None => last.clone(),
        Some(m) => last.iter().zip(m).map(|(h, f)| h * f).collect(),
    };
    let a1 = net.dense1.apply(&dropped);
    let y1: Vec<f64> = a1.iter().map(|v| v.max(0.0)).collect();
    let logits = net.dense2.apply(&y1);
    let probs = softmax([logits[0], logits[1]])?;
    Ok(ForwardPass {
        probs,
        seq1,
        seq2,
        mask,
        dropped,
        a1,
        y1,
    })
}

/// Accumulates `scale * d loss / d params` for one example into `grad`.
fn backward(net: &NetworkParams, pass: &ForwardPass, label: usize, scale: f64, grad: &mut NetworkParams) {
    let mut dlogits = pass.probs;
    dlogits[label] -= 1.0;
    dlogits.iter_mut().for_each(|v| *v *= scale);

    grad.dense2.w.add_outer(&pass.y1, &dlogits);
    grad.dense2.b.iter_mut().zip(&dlogits).for_each(|(g, d)| *g += d);
    let mut dy1 = vec![0.0; pass.y1.len()];
    net.dense2.w.vecmul_t_acc(&dlogits, &mut dy1);
    let da1: Vec<f64> = dy1
        .iter()
        .zip(&pass.a1)
        .map(|(d, a)| if *a > 0.0 { *d } else { 0.0 })
        .collect();

    grad.dense1.w.add_outer(&pass.dropped, &da1);
    grad.dense1.b.iter_mut().zip(&da1).for_each(|(g, d)| *g += d);
    let mut dh2 = vec![0.0; pass.dropped.len()];
    net.dense1.w.vecmul_t_acc(&da1, &mut dh2);
    if let Some(m) = &pass.mask {
        dh2.iter_mut().zip(m).for_each(|(d, f)| *d *= f);
    }

    let t = pass.seq2.len();
    let mut dh_out2 = vec![vec![0.0; dh2.len()]; t];
    dh_out2[t - 1] = dh2;
    let dh1 = backward_layer(&net.gru2, &pass.seq2, &dh_out2, &mut grad.gru2);
    backward_layer(&net.gru1, &pass.seq1, &dh1, &mut grad.gru1);
}

/// Gradient of the mean loss over the batch. With `masks` absent dropout is
/// off; otherwise `masks[i]` is the fixed mask for item `i`. Items are
/// reduced in batch order.
pub fn gradients(
    net: &NetworkParams,
    batch: &[(&[Vec<f64>], Label)],
    masks: Option<&[DropoutMask]>,
) -> Result<(NetworkParams, f64), SeqError> {
    if batch.is_empty() {
        return Err(SeqError::EmptyDataset);
    }
    if let Some(m) = masks {
        if m.len() != batch.len() {
            return Err(SeqError::ShapeMismatch(format!(
                "{} dropout masks for {} examples",
                m.len(),
                batch.len()
            )));
        }
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grad = net.zeros_like();
    let mut loss = 0.0;
    for (i, (seq, label)) in batch.iter().enumerate() {
        let mode = match masks {
            Some(m) => Mode::Train(&m[i]),
            None => Mode::Eval,
        };
        let pass = forward(net, seq, mode)?;
        loss += sparse_ce(pass.probs, label.index())?;
        backward(net, &pass, label.index(), scale, &mut grad);
    }
    Ok((grad, loss * scale))
}
