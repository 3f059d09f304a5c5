use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row indices of each fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// `(train, test)` indices for fold `i`, both sorted.
    pub fn split(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let test = self.folds[i].clone();
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train.sort_unstable();
        (train, test)
    }
}

/// Shuffles each class with a seeded generator and deals its members over
/// the folds in turn, continuing where the previous class stopped.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                members: members.len(),
                folds: k,
            });
        }
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { folds, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn per_class(plan: &FoldPlan, labels: &[u8]) -> Vec<[usize; 2]> {
        plan.folds
            .iter()
            .map(|f| {
                let ones = f.iter().filter(|&&i| labels[i] == 1).count();
                [f.len() - ones, ones]
            })
            .collect()
    }

    #[test]
    fn exact_stratification() {
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let plan = stratified_kfold(&labels, 5, 7).unwrap();
        assert!(per_class(&plan, &labels).iter().all(|c| *c == [1, 1]));
    }

    #[test]
    fn deterministic() {
        let labels: Vec<u8> = (0..50).map(|i| (i % 3 == 0) as u8).collect();
        assert_eq!(stratified_kfold(&labels, 5, 3).unwrap(), stratified_kfold(&labels, 5, 3).unwrap());
        assert_ne!(stratified_kfold(&labels, 5, 3).unwrap(), stratified_kfold(&labels, 5, 4).unwrap());
    }

    #[test]
    fn two_folds_on_uneven_classes() {
        let labels = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        let plan = stratified_kfold(&labels, 2, 0).unwrap();
        assert_eq!(per_class(&plan, &labels), vec![[3, 2], [3, 2]]);
    }

    #[test]
    fn class_too_small() {
        let labels = [0, 0, 0, 1];
        assert!(matches!(
            stratified_kfold(&labels, 2, 0),
            Err(Error::ClassTooSmall { class: 1, members: 1, folds: 2 })
        ));
        assert!(matches!(stratified_kfold(&labels, 1, 0), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn folds_partition_rows() {
        let labels: Vec<u8> = (0..97).map(|i| (i % 4 == 0) as u8).collect();
        let plan = stratified_kfold(&labels, 5, 11).unwrap();
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..97).collect::<Vec<_>>());
        let global = labels.iter().filter(|&&l| l == 1).count() as f64 / 97.0;
        for f in &plan.folds {
            let ones = f.iter().filter(|&&i| labels[i] == 1).count() as f64;
            assert!((ones - global * f.len() as f64).abs() <= 1.0);
        }
        let (train, test) = plan.split(2);
        assert_eq!(train.len() + test.len(), 97);
    }
}
