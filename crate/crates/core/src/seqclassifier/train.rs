use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{gradients, Architecture, DropoutMask, NetworkParams};
use super::SeqError;
use crate::backbone::FeatureSequence;
use crate::corpus::Label;
use crate::seed::stage_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SeqError> {
        // A zero step size is allowed: it freezes the initial parameters.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(SeqError::InvalidConfig(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(SeqError::InvalidConfig("moment decay rates must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(SeqError::InvalidConfig("epsilon must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(SeqError::InvalidConfig("batch size must be at least 1".into()));
        }
        self.arch.validate()
    }
}

/// Adaptive moment estimation over every parameter block.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: NetworkParams,
    v: NetworkParams,
}

impl Adam {
    pub fn new(config: &TrainConfig, like: &NetworkParams) -> Self {
        Self {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            step: 0,
            m: like.zeros_like(),
            v: like.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut NetworkParams, grad: &NetworkParams) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        let grads = grad.blocks();
        for (((p, m), v), g) in params
            .blocks_mut()
            .into_iter()
            .zip(self.m.blocks_mut())
            .zip(self.v.blocks_mut())
            .zip(grads)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    /// Mean training loss of each epoch, with dropout active.
    pub history: Vec<f64>,
}

/// One example as `T` rows of `D` values in 64-bit precision.
pub fn to_rows(features: &FeatureSequence) -> Vec<Vec<f64>> {
    features
        .rows()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect()
}

pub fn train(dataset: &[(FeatureSequence, Label)], config: &TrainConfig) -> Result<TrainOutcome, SeqError> {
    let rows: Vec<(Vec<Vec<f64>>, Label)> = dataset.iter().map(|(f, l)| (to_rows(f), *l)).collect();
    train_rows(&rows, config)
}

/// Mini-batch training. Initialization, shuffling and dropout masks each
/// draw from their own stream derived from `config.seed`.
pub fn train_rows(dataset: &[(Vec<Vec<f64>>, Label)], config: &TrainConfig) -> Result<TrainOutcome, SeqError> {
    config.validate()?;
    let dim = match dataset.first() {
        None => return Err(SeqError::EmptyDataset),
        Some((seq, _)) => seq.first().map(Vec::len).ok_or(SeqError::EmptySequence)?,
    };
    for (i, (seq, _)) in dataset.iter().enumerate() {
        if seq.is_empty() {
            return Err(SeqError::EmptySequence);
        }
        if let Some(bad) = seq.iter().find(|r| r.len() != dim) {
            return Err(SeqError::InconsistentDims {
                index: i,
                expected: dim,
                found: bad.len(),
            });
        }
    }

    let mut init_rng = stage_rng(config.seed, "init");
    let mut shuffle_rng = stage_rng(config.seed, "shuffle");
    let mut dropout_rng = stage_rng(config.seed, "dropout");

    let mut params = NetworkParams::init(dim, &config.arch, &mut init_rng);
    let mut adam = Adam::new(config, &params);
    let units = config.arch.hidden2;
    let rate = config.arch.dropout_rate;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[Vec<f64>], Label)> =
                chunk.iter().map(|&i| (dataset[i].0.as_slice(), dataset[i].1)).collect();
            let masks: Vec<DropoutMask> = chunk
                .iter()
                .map(|_| DropoutMask::sample(units, rate, &mut dropout_rng))
                .collect();
            let (grad, loss) = gradients(&params, &batch, Some(&masks))?;
            epoch_loss += loss * chunk.len() as f64;
            adam.update(&mut params, &grad);
        }
        if !params.is_finite() {
            return Err(SeqError::NonFinite("parameters diverged during training".into()));
        }
        history.push(epoch_loss / dataset.len() as f64);
    }
    Ok(TrainOutcome { params, history })
}
