use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::Label;

/// Rows are the true class, columns the predicted class, both ordered
/// irrelevant, relevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn record(&mut self, truth: Label, pred: Label) {
        self.counts[truth.index()][pred.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..2 {
            for j in 0..2 {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }
}

pub fn confusion(preds: &[Label], truths: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            truths: truths.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut m = ConfusionMatrix::default();
    for (p, t) in preds.iter().zip(truths) {
        m.record(*t, *p);
    }
    Ok(m)
}

/// Percentages, unrounded. Pairs are `[irrelevant, relevant]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub f1: [f64; 2],
}

impl Scores {
    pub fn values(&self) -> [f64; 7] {
        [
            self.accuracy,
            self.precision[0],
            self.precision[1],
            self.recall[0],
            self.recall[1],
            self.f1[0],
            self.f1[1],
        ]
    }

    pub fn from_values(v: [f64; 7]) -> Self {
        Self {
            accuracy: v[0],
            precision: [v[1], v[2]],
            recall: [v[3], v[4]],
            f1: [v[5], v[6]],
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn metrics(m: &ConfusionMatrix) -> Result<Scores, EvalError> {
    let total = m.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let c = m.counts.map(|row| row.map(|v| v as f64));
    let mut s = Scores {
        accuracy: 100.0 * (c[0][0] + c[1][1]) / total as f64,
        ..Scores::default()
    };
    for k in 0..2 {
        let p = ratio(c[k][k], c[0][k] + c[1][k]);
        let r = ratio(c[k][k], c[k][0] + c[k][1]);
        s.precision[k] = 100.0 * p;
        s.recall[k] = 100.0 * r;
        s.f1[k] = 100.0 * ratio(2.0 * p * r, p + r);
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    /// 1-based, as printed.
    pub fold: usize,
    pub scores: Scores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: Vec<FoldReport>,
    pub average: Scores,
}

pub fn average(reports: Vec<FoldReport>) -> Result<CvSummary, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = reports.len() as f64;
    let mut sums = [0.0; 7];
    for r in &reports {
        for (s, v) in sums.iter_mut().zip(r.scores.values()) {
            *s += v;
        }
    }
    Ok(CvSummary {
        average: Scores::from_values(sums.map(|s| s / n)),
        folds: reports,
    })
}
