use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{Label, LocalId};
use crate::seed::stage_rng;

pub const DEFAULT_FOLDS: usize = 5;

/// Assignment of every id to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<LocalId, usize>,
}

impl FoldSpec {
    pub fn fold_of(&self, id: &LocalId) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn test_ids(&self, fold: usize) -> Vec<&LocalId> {
        self.assignment.iter().filter(|(_, f)| **f == fold).map(|(id, _)| id).collect()
    }

    pub fn train_ids(&self, fold: usize) -> Vec<&LocalId> {
        self.assignment.iter().filter(|(_, f)| **f != fold).map(|(id, _)| id).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for f in self.assignment.values() {
            sizes[*f] += 1;
        }
        sizes
    }

    /// Per-fold counts of one class.
    pub fn class_sizes(&self, labels: &BTreeMap<LocalId, Label>, class: Label) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for (id, f) in &self.assignment {
            if labels.get(id) == Some(&class) {
                sizes[*f] += 1;
            }
        }
        sizes
    }
}

/// Stratified split. Each class is sorted, shuffled with its own seeded
/// stream, then dealt round-robin. The second class picks up the deal where
/// the first stopped, so total fold sizes also differ by at most one.
pub fn stratified_folds(labels: &BTreeMap<LocalId, Label>, k: usize, seed: u64) -> Result<FoldSpec, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidFoldCount(k));
    }
    let mut assignment = BTreeMap::new();
    let mut next = 0usize;
    for class in Label::ALL {
        let mut ids: Vec<&LocalId> = labels.iter().filter(|(_, l)| **l == class).map(|(id, _)| id).collect();
        if ids.len() < k {
            return Err(EvalError::TooFewInClass {
                label: class,
                count: ids.len(),
                k,
            });
        }
        ids.shuffle(&mut stage_rng(seed, &format!("folds/{class}")));
        for id in ids {
            assignment.insert(id.clone(), next);
            next = (next + 1) % k;
        }
    }
    Ok(FoldSpec { k, seed, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(irrelevant: usize, relevant: usize) -> BTreeMap<LocalId, Label> {
        (1..=irrelevant + relevant)
            .map(|i| {
                let label = if i <= irrelevant { Label::Irrelevant } else { Label::Relevant };
                (LocalId::from_counter(i as u64), label)
            })
            .collect()
    }

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn paper_sized_corpus() {
        let labels = corpus(204, 203);
        let spec = stratified_folds(&labels, 5, 11).unwrap();
        assert_eq!(sorted(spec.class_sizes(&labels, Label::Relevant)), vec![40, 40, 41, 41, 41]);
        assert_eq!(sorted(spec.class_sizes(&labels, Label::Irrelevant)), vec![40, 41, 41, 41, 41]);
        let sizes = spec.fold_sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(sizes.iter().sum::<usize>(), 407);
    }

    #[test]
    fn five_and_five() {
        let labels = corpus(5, 5);
        let spec = stratified_folds(&labels, 5, 0).unwrap();
        assert_eq!(spec.class_sizes(&labels, Label::Relevant), vec![1; 5]);
        assert_eq!(spec.class_sizes(&labels, Label::Irrelevant), vec![1; 5]);
    }

    #[test]
    fn same_seed_same_assignment() {
        let labels = corpus(30, 27);
        assert_eq!(stratified_folds(&labels, 5, 3).unwrap(), stratified_folds(&labels, 5, 3).unwrap());
        assert_ne!(stratified_folds(&labels, 5, 3).unwrap(), stratified_folds(&labels, 5, 4).unwrap());
    }

    #[test]
    fn too_few_in_a_class() {
        assert!(matches!(
            stratified_folds(&corpus(10, 4), 5, 0),
            Err(EvalError::TooFewInClass { label: Label::Relevant, count: 4, k: 5 })
        ));
        assert!(matches!(stratified_folds(&corpus(10, 10), 1, 0), Err(EvalError::InvalidFoldCount(1))));
    }

    #[test]
    fn train_and_test_split() {
        let labels = corpus(10, 10);
        let spec = stratified_folds(&labels, 5, 1).unwrap();
        for f in 0..5 {
            let test = spec.test_ids(f);
            let train = spec.train_ids(f);
            assert_eq!(test.len() + train.len(), 20);
            assert!(test.iter().all(|id| !train.contains(id)));
        }
    }

    proptest! {
        #[test]
        fn partition_invariants(irr in 2usize..60, rel in 2usize..60, k in 2usize..8, seed in any::<u64>()) {
            prop_assume!(irr >= k && rel >= k);
            let labels = corpus(irr, rel);
            let spec = stratified_folds(&labels, k, seed).unwrap();
            prop_assert_eq!(spec.assignment.len(), irr + rel);
            prop_assert!(spec.assignment.keys().eq(labels.keys()));
            prop_assert!(spec.assignment.values().all(|f| *f < k));
            for class in Label::ALL {
                let s = spec.class_sizes(&labels, class);
                prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
            }
            let s = spec.fold_sizes();
            prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        }
    }
}
