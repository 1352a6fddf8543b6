//! The recurrent head: two stacked GRU layers, dropout, a ReLU dense layer
//! and a softmax over {irrelevant, relevant}, trained with sparse
//! cross-entropy. Everything runs in `f64`; gradients are computed by hand
//! through the unrolled sequence.

pub mod checkpoint;
mod gru;
mod linalg;
mod network;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backbone::FeatureSequence;
use crate::corpus::Label;

pub use gru::{gru_cell, gru_layer, GruOutput, GruParams, GRU_BLOCKS};
pub use linalg::{sigmoid, Matrix};
pub use network::{
    forward, gradients, softmax, sparse_ce, Architecture, Dense, DropoutMask, ForwardPass, Mode, NetworkParams,
    DEFAULT_DROPOUT, LOSS_EPSILON,
};
pub use train::{to_rows, train, train_rows, Adam, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("example {index} has feature dim {found}, expected {expected}")]
    InconsistentDims { index: usize, expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("label index {0} is not 0 or 1")]
    InvalidLabel(usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: [f64; 2],
    pub label: Label,
    pub confidence: f64,
}

impl Prediction {
    /// Picks the more probable class; an exact tie goes to relevant.
    pub fn from_probs(probs: [f64; 2]) -> Self {
        let label = if probs[0] > probs[1] {
            Label::Irrelevant
        } else {
            Label::Relevant
        };
        Self {
            probs,
            label,
            confidence: probs[label.index()],
        }
    }
}

pub fn predict_rows(net: &NetworkParams, rows: &[Vec<f64>]) -> Result<Prediction, SeqError> {
    Ok(Prediction::from_probs(forward(net, rows, Mode::Eval)?.probs))
}

pub fn predict(net: &NetworkParams, features: &FeatureSequence) -> Result<Prediction, SeqError> {
    predict_rows(net, &to_rows(features))
}
