use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Label;
use crate::error::{Error, Result};

/// Stratified k-fold partition of `0..labels.len()`.
///
/// Each class is shuffled with `seed`, the classes are concatenated (NonUTI
/// first) and position `i` goes to fold `i mod k`, so fold sizes and per-class
/// counts each differ by at most one.
pub fn kfold_split(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::InvalidConfig(format!("k={k} exceeds {} samples", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(labels.len());
    for class in [Label::NonUti, Label::Uti] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        order.extend(idx);
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Complement of fold `f`, in ascending order.
pub fn train_indices(folds: &[Vec<usize>], f: usize) -> Vec<usize> {
    let mut v: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != f)
        .flat_map(|(_, fold)| fold.iter().copied())
        .collect();
    v.sort_unstable();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(pos: usize, neg: usize) -> Vec<Label> {
        let mut v = vec![Label::Uti; pos];
        v.extend(vec![Label::NonUti; neg]);
        v
    }

    #[test]
    fn sixty_into_five() {
        let folds = kfold_split(&labels(24, 36), 5, 0).unwrap();
        assert!(folds.iter().all(|f| f.len() == 12));
    }

    #[test]
    fn small_stratification() {
        let y = labels(4, 6);
        for seed in 0..20 {
            for f in kfold_split(&y, 5, seed).unwrap() {
                assert!(f.iter().any(|&i| y[i] == Label::NonUti));
            }
        }
        // 4 positives across 5 folds: exactly four folds get one
        let folds = kfold_split(&y, 5, 1).unwrap();
        let with_pos = folds.iter().filter(|f| f.iter().any(|&i| y[i] == Label::Uti)).count();
        assert_eq!(with_pos, 4);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(kfold_split(&labels(2, 2), 1, 0).is_err());
        assert!(kfold_split(&labels(2, 2), 5, 0).is_err());
    }

    proptest! {
        #[test]
        fn disjoint_exhaustive_balanced(pos in 0usize..30, neg in 0usize..30, k in 2usize..8, seed: u64) {
            prop_assume!(k <= pos + neg);
            let y = labels(pos, neg);
            let folds = kfold_split(&y, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..pos + neg).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for class in [Label::Uti, Label::NonUti] {
                let c: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| y[i] == class).count()).collect();
                prop_assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
            }
            prop_assert_eq!(train_indices(&folds, 0).len() + folds[0].len(), pos + neg);
        }
    }
}
