//! Stratified k-fold cross-validation and the per-fold accuracy, precision,
//! recall and F1 table.

mod crossval;
mod folds;
mod metrics;
mod report;

use thiserror::Error;

use crate::corpus::{Label, LocalId};
use crate::seqclassifier::SeqError;

pub use crossval::{fold_train_seed, run_crossval, CrossvalOutcome, HeldOutPrediction};
pub use folds::{stratified_folds, FoldSpec, DEFAULT_FOLDS};
pub use metrics::{average, confusion, metrics, ConfusionMatrix, CvSummary, FoldReport, Scores};
pub use report::{parse_csv, render_report, ReportFormat, CSV_HEADER};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("class {label} has {count} items, fewer than k = {k}")]
    TooFewInClass { label: Label, count: usize, k: usize },
    #[error("{preds} predictions for {truths} truths")]
    LengthMismatch { preds: usize, truths: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("duplicate id {0} in dataset")]
    DuplicateId(LocalId),
    #[error("report parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Classifier(#[from] SeqError),
}
