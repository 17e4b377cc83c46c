use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dataset::ClassLabel;

/// Disjoint validation folds covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Validation indices per fold, each sorted ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_samples(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Stratified k-fold split.
///
/// Each class's indices (in ascending code order) are shuffled with a
/// generator seeded by `seed` and dealt round-robin over the folds. Dealing
/// for the next class resumes at the fold after the last one served, so
/// fold totals also stay within one of each other.
pub fn stratified_kfold(labels: &[ClassLabel], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(EvalError::BadK { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for idx in members {
            folds[next].push(idx);
            next = (next + 1) % k;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { k, seed, folds })
}
