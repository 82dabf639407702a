use rand::seq::SliceRandom;

use super::{Result, TrainError};
use crate::seed;

/// Index sets of one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Seeded shuffle of `0..n` cut into `folds` contiguous validation blocks;
/// the first `n % folds` blocks get one extra sample.
pub fn split_cv(n: usize, folds: usize, seed_value: u64) -> Result<Vec<Fold>> {
    if folds < 2 || folds > n {
        return Err(TrainError::InvalidArgument(format!("cannot split {n} samples into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive_seed(seed_value, "cv")));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let end = start + base + usize::from(k < extra);
        let mut val = order[start..end].to_vec();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[end..]).copied().collect();
        val.sort_unstable();
        train.sort_unstable();
        out.push(Fold { train, val });
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_sizes() {
        let sizes = |n| split_cv(n, 3, 1).unwrap().iter().map(|f| f.val.len()).collect::<Vec<_>>();
        assert_eq!(sizes(9), vec![3, 3, 3]);
        assert_eq!(sizes(10), vec![4, 3, 3]);
        assert_eq!(sizes(11), vec![4, 4, 3]);
    }

    #[test]
    fn folds_partition_the_samples() {
        for n in [3, 7, 50] {
            let folds = split_cv(n, 3, 9).unwrap();
            let mut all: Vec<usize> = folds.iter().flat_map(|f| f.val.clone()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            for f in &folds {
                assert_eq!(f.train.len() + f.val.len(), n);
                assert!(f.train.iter().all(|i| !f.val.contains(i)));
            }
        }
    }

    #[test]
    fn rejects_bad_fold_counts() {
        assert!(split_cv(2, 3, 0).is_err());
        assert!(split_cv(5, 1, 0).is_err());
        assert_eq!(split_cv(8, 2, 4).unwrap(), split_cv(8, 2, 4).unwrap());
    }
}
