//! Comparison methods: a tree grown directly on the data, and a single tree
//! imitating the network's labels ("Trepan-lite": no query synthesis, no
//! m-of-n tests).

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::fidelity;
use crate::network::Network;
use crate::sampler::InputKind;
use crate::tree::DecisionTree;

pub fn input_kinds(ds: &Dataset) -> Vec<InputKind> {
    ds.schema
        .iter()
        .map(|f| {
            if f.is_real() {
                InputKind::Real
            } else {
                InputKind::Binary
            }
        })
        .collect()
}

fn check_shared(train: &Dataset, other: &Dataset) -> Result<()> {
    if !train.encoded || !other.encoded {
        return Err(Error::InvalidArgument("baselines need encoded datasets".into()));
    }
    if train.schema != other.schema || train.classes != other.classes {
        return Err(Error::Schema("datasets do not share an encoded schema".into()));
    }
    Ok(())
}

fn grow_and_prune(
    train: &Dataset,
    labels: &[usize],
    prune: &Dataset,
    prune_labels: &[usize],
    min_leaf: usize,
) -> Result<DecisionTree> {
    let tree = DecisionTree::fit(
        &train.rows,
        labels,
        train.classes.len(),
        train.feature_names(),
        input_kinds(train),
        min_leaf,
    )?;
    Ok(tree.prune(&prune.rows, prune_labels).tree)
}

/// A multi-class tree grown on `train`, pruned on `prune`, applied to `test`.
pub fn c45_direct(
    train: &Dataset,
    prune: &Dataset,
    test: &Dataset,
    min_leaf: usize,
) -> Result<(Vec<usize>, DecisionTree)> {
    check_shared(train, prune)?;
    check_shared(train, test)?;
    let tree = grow_and_prune(train, &train.labels, prune, &prune.labels, min_leaf)?;
    Ok((tree.predict_all(&test.rows)?, tree))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrepanLite {
    pub predictions: Vec<usize>,
    /// Agreement with the network on `test`.
    pub fidelity: f64,
    pub tree: DecisionTree,
}

/// A tree grown and pruned on network-relabelled data.
pub fn trepan_lite(
    net: &Network,
    train: &Dataset,
    prune: &Dataset,
    test: &Dataset,
    min_leaf: usize,
) -> Result<TrepanLite> {
    check_shared(train, prune)?;
    check_shared(train, test)?;
    let train_labels = net.predict_all(&train.rows)?;
    let prune_labels = net.predict_all(&prune.rows)?;
    let tree = grow_and_prune(train, &train_labels, prune, &prune_labels, min_leaf)?;
    let predictions = tree.predict_all(&test.rows)?;
    let fidelity = fidelity(&predictions, &net.predict_all(&test.rows)?)?;
    Ok(TrepanLite {
        predictions,
        fidelity,
        tree,
    })
}
