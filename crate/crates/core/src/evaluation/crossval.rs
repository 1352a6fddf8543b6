use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::folds::{stratified_folds, FoldSpec};
use super::metrics::{average, metrics, ConfusionMatrix, CvSummary, FoldReport};
use super::EvalError;
use crate::backbone::FeatureSequence;
use crate::corpus::{Label, LocalId};
use crate::seed::derive_seed;
use crate::seqclassifier::{predict_rows, to_rows, train_rows, Prediction, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOutPrediction {
    pub local_id: LocalId,
    /// 1-based fold number.
    pub fold: usize,
    pub truth: Label,
    pub prediction: Prediction,
}

#[derive(Debug, Clone)]
pub struct CrossvalOutcome {
    pub spec: FoldSpec,
    pub summary: CvSummary,
    pub predictions: Vec<HeldOutPrediction>,
    /// Per-fold training loss history.
    pub histories: Vec<Vec<f64>>,
}

/// Seed for training the model of fold `fold` (0-based).
pub fn fold_train_seed(root: u64, fold: usize) -> u64 {
    derive_seed(root, &format!("fold-{fold}"))
}

/// Stratified k-fold cross-validation: for each fold, train a fresh network
/// on the other folds and score it on the held-out one. Folds run in order
/// and the result depends only on the data and the two seeds.
pub fn run_crossval(
    dataset: &[(FeatureSequence, Label)],
    k: usize,
    fold_seed: u64,
    config: &TrainConfig,
) -> Result<CrossvalOutcome, EvalError> {
    let mut labels = BTreeMap::new();
    let mut rows = BTreeMap::new();
    for (features, label) in dataset {
        if labels.insert(features.local_id.clone(), *label).is_some() {
            return Err(EvalError::DuplicateId(features.local_id.clone()));
        }
        rows.insert(features.local_id.clone(), to_rows(features));
    }
    let spec = stratified_folds(&labels, k, fold_seed)?;

    let mut reports = Vec::with_capacity(k);
    let mut predictions = Vec::with_capacity(dataset.len());
    let mut histories = Vec::with_capacity(k);
    for fold in 0..k {
        let train: Vec<(Vec<Vec<f64>>, Label)> = spec
            .train_ids(fold)
            .into_iter()
            .map(|id| (rows[id].clone(), labels[id]))
            .collect();
        let fold_config = TrainConfig {
            seed: fold_train_seed(config.seed, fold),
            ..config.clone()
        };
        let outcome = train_rows(&train, &fold_config)?;
        let mut matrix = ConfusionMatrix::default();
        for id in spec.test_ids(fold) {
            let prediction = predict_rows(&outcome.params, &rows[id])?;
            matrix.record(labels[id], prediction.label);
            predictions.push(HeldOutPrediction {
                local_id: id.clone(),
                fold: fold + 1,
                truth: labels[id],
                prediction,
            });
        }
        reports.push(FoldReport {
            fold: fold + 1,
            scores: metrics(&matrix)?,
            confusion: Some(matrix),
        });
        histories.push(outcome.history);
    }
    Ok(CrossvalOutcome {
        spec,
        summary: average(reports)?,
        predictions,
        histories,
    })
}
