use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Disjoint, stratified folds over the instance indices of one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Vec<usize>>,
    /// Share of each training fold held out for tree pruning, in per-mille
    /// so the plan stays `Eq`.
    pub prune_permille: u32,
    pub seed: u64,
}

impl SplitPlan {
    pub fn prune_fraction(&self) -> f64 {
        self.prune_permille as f64 / 1000.0
    }

    pub fn with_prune_fraction(mut self, fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!(
                "prune fraction {fraction} outside [0, 1)"
            )));
        }
        self.prune_permille = (fraction * 1000.0).round() as u32;
        Ok(self)
    }

    /// `(train, test)` indices for fold `i`: test is the fold itself.
    pub fn train_test(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
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

/// Deals each class's shuffled members round-robin over `k` folds, carrying
/// the offset across classes so fold sizes differ by at most one.
pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    let counts = ds.class_counts();
    for (c, &n) in counts.iter().enumerate() {
        if n < k {
            return Err(Error::ClassTooSmall {
                class: ds.classes[c].clone(),
                count: n,
                k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for c in 0..ds.classes.len() {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == c).collect();
        members.shuffle(&mut rng);
        for idx in members {
            folds[next].push(idx);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(SplitPlan {
        folds,
        prune_permille: 200,
        seed,
    })
}

/// Stratified `(grow, prune)` split of `indices` with `|prune| = round(fraction·N)`.
///
/// Per-class prune quotas use largest remainders, ties to the lowest class.
pub fn train_prune_split(
    indices: &[usize],
    labels: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "prune fraction {fraction} outside (0, 1)"
        )));
    }
    let classes = indices.iter().map(|&i| labels[i] + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for &i in indices {
        by_class[labels[i]].push(i);
    }

    let total = (fraction * indices.len() as f64).round() as usize;
    let exact: Vec<f64> = by_class.iter().map(|m| fraction * m.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..classes).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = quota.iter().sum();
    for &c in order.iter().cycle().take(classes * 2) {
        if assigned >= total {
            break;
        }
        if quota[c] < by_class[c].len() {
            quota[c] += 1;
            assigned += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grow = Vec::with_capacity(indices.len() - total);
    let mut prune = Vec::with_capacity(total);
    for (members, &q) in by_class.iter_mut().zip(&quota) {
        members.shuffle(&mut rng);
        prune.extend_from_slice(&members[..q]);
        grow.extend_from_slice(&members[q..]);
    }
    grow.sort_unstable();
    prune.sort_unstable();
    Ok((grow, prune))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureSpec;
    use proptest::prelude::*;

    fn labelled(labels: Vec<usize>, classes: usize) -> Dataset {
        Dataset::new(
            vec![FeatureSpec::binary("x")],
            labels.iter().map(|_| vec![0.0]).collect(),
            labels,
            (0..classes).map(|c| c.to_string()).collect(),
            false,
        )
        .unwrap()
    }

    #[test]
    fn vote_sized_folds() {
        // 267 democrats, 168 republicans
        let labels: Vec<usize> = (0..435).map(|i| usize::from(i >= 267)).collect();
        let ds = labelled(labels, 2);
        let plan = stratified_kfold(&ds, 10, 3).unwrap();
        for fold in &plan.folds {
            assert!(fold.len() == 43 || fold.len() == 44, "{}", fold.len());
            let dem = fold.iter().filter(|&&i| ds.labels[i] == 0).count() as f64;
            let rep = fold.len() as f64 - dem;
            assert!((dem - 26.7).abs() <= 1.0);
            assert!((rep - 16.8).abs() <= 1.0);
        }
    }

    #[test]
    fn k_must_be_at_least_two() {
        let ds = labelled(vec![0, 1, 0, 1], 2);
        assert!(stratified_kfold(&ds, 1, 0).is_err());
        assert!(matches!(
            stratified_kfold(&ds, 3, 0),
            Err(Error::ClassTooSmall { count: 2, k: 3, .. })
        ));
    }

    #[test]
    fn grow_prune_sizes() {
        let labels: Vec<usize> = (0..100).map(|i| i % 3 % 2).collect();
        let idx: Vec<usize> = (0..100).collect();
        let (grow, prune) = train_prune_split(&idx, &labels, 0.2, 9).unwrap();
        assert_eq!((grow.len(), prune.len()), (80, 20));
        assert!(train_prune_split(&idx, &labels, 0.0, 9).is_err());
        assert!(train_prune_split(&idx, &labels, 1.0, 9).is_err());
        assert_eq!(train_prune_split(&idx, &labels, 0.2, 9).unwrap(), (grow, prune));
    }

    proptest! {
        #[test]
        fn kfold_invariants(
            labels in proptest::collection::vec(0usize..3, 30..120),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let mut labels = labels;
            // every class needs at least k members
            for c in 0..3 {
                for _ in 0..k { labels.push(c); }
            }
            let ds = labelled(labels, 3);
            let plan = stratified_kfold(&ds, k, seed).unwrap();
            prop_assert_eq!(&plan, &stratified_kfold(&ds, k, seed).unwrap());
            let mut all: Vec<usize> = plan.folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
            let counts = ds.class_counts();
            for fold in &plan.folds {
                for (c, &n) in counts.iter().enumerate() {
                    let got = fold.iter().filter(|&&i| ds.labels[i] == c).count() as f64;
                    prop_assert!((got - n as f64 / k as f64).abs() <= 1.0);
                }
            }
            let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn grow_prune_partition(
            labels in proptest::collection::vec(0usize..3, 2..200),
            fraction in 0.01f64..0.99,
            seed in any::<u64>(),
        ) {
            let idx: Vec<usize> = (0..labels.len()).collect();
            let (grow, prune) = train_prune_split(&idx, &labels, fraction, seed).unwrap();
            prop_assert_eq!(prune.len(), (fraction * labels.len() as f64).round() as usize);
            let mut all = grow.clone();
            all.extend(&prune);
            all.sort_unstable();
            prop_assert_eq!(all, idx);
        }
    }
}
