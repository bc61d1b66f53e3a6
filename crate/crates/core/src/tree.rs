//! Univariate binary decision trees: C4.5-style gain-ratio induction and
//! reduced-error pruning on a held-out set.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::majority;
use crate::error::{Error, Result};
use crate::sampler::{InputKind, NeuronSampleSet};

/// Gains at or below this are treated as zero.
const GAIN_EPSILON: f64 = 1e-12;

pub const DEFAULT_MIN_LEAF: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Test {
    /// Passes when the feature is 1.
    Bit { feature: usize },
    /// Passes when the feature is at most `threshold`.
    Threshold { feature: usize, threshold: f64 },
}

impl Test {
    #[inline]
    pub fn passes(&self, x: &[f64]) -> bool {
        match *self {
            Test::Bit { feature } => x[feature] >= 0.5,
            Test::Threshold { feature, threshold } => x[feature] <= threshold,
        }
    }

    pub fn feature(&self) -> usize {
        match *self {
            Test::Bit { feature } | Test::Threshold { feature, .. } => feature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: usize,
        /// Training class distribution that reached this leaf.
        counts: Vec<usize>,
    },
    Split {
        test: Test,
        pass: Box<Node>,
        fail: Box<Node>,
        counts: Vec<usize>,
    },
}

impl Node {
    pub fn counts(&self) -> &[usize] {
        match self {
            Node::Leaf { counts, .. } | Node::Split { counts, .. } => counts,
        }
    }

    pub fn support(&self) -> usize {
        self.counts().iter().sum()
    }

    fn route(&self, x: &[f64]) -> &Node {
        let mut node = self;
        while let Node::Split { test, pass, fail, .. } = node {
            node = if test.passes(x) { pass } else { fail };
        }
        node
    }

    fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { pass, fail, .. } => pass.leaves() + fail.leaves(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { pass, fail, .. } => 1 + pass.depth().max(fail.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
    pub classes: usize,
    pub input_names: Vec<String>,
    pub input_kinds: Vec<InputKind>,
}

/// Result of [`DecisionTree::prune`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    pub tree: DecisionTree,
    pub warning: Option<String>,
}

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Information gain and split information of a two-way partition.
fn gain_and_split_info(pass: &[usize], fail: &[usize]) -> (f64, f64) {
    let np: usize = pass.iter().sum();
    let nf: usize = fail.iter().sum();
    let n = (np + nf) as f64;
    let total: Vec<usize> = pass.iter().zip(fail).map(|(a, b)| a + b).collect();
    let gain = entropy(&total) - (np as f64 / n) * entropy(pass) - (nf as f64 / n) * entropy(fail);
    (gain.max(0.0), entropy(&[np, nf]))
}

/// Gain ratio (base-2) of `test` over the rows; 0 if either side is empty.
pub fn gain_ratio(inputs: &[Vec<f64>], labels: &[usize], classes: usize, test: &Test) -> f64 {
    let mut pass = vec![0; classes];
    let mut fail = vec![0; classes];
    for (x, &y) in inputs.iter().zip(labels) {
        if test.passes(x) {
            pass[y] += 1;
        } else {
            fail[y] += 1;
        }
    }
    ratio(&pass, &fail)
}

fn ratio(pass: &[usize], fail: &[usize]) -> f64 {
    if pass.iter().sum::<usize>() == 0 || fail.iter().sum::<usize>() == 0 {
        return 0.0;
    }
    let (gain, split) = gain_and_split_info(pass, fail);
    if split <= 0.0 {
        0.0
    } else {
        gain / split
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    test: Test,
    gain: f64,
    ratio: f64,
}

struct Grower<'a> {
    inputs: &'a [Vec<f64>],
    labels: &'a [usize],
    kinds: &'a [InputKind],
    classes: usize,
    min_leaf: usize,
}

impl Grower<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &r in rows {
            c[self.labels[r]] += 1;
        }
        c
    }

    fn grow(&self, rows: Vec<usize>) -> Node {
        let counts = self.counts(&rows);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || rows.len() < 2 * self.min_leaf {
            return leaf(counts);
        }
        let Some(best) = self.choose(&rows, &counts) else {
            return leaf(counts);
        };
        let (pass, fail): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| best.test.passes(&self.inputs[r]));
        Node::Split {
            test: best.test,
            pass: Box::new(self.grow(pass)),
            fail: Box::new(self.grow(fail)),
            counts,
        }
    }

    /// Among tests with at least average gain, the one with the best gain
    /// ratio. Falls back to zero-gain tests so consistent data is always fit.
    fn choose(&self, rows: &[usize], counts: &[usize]) -> Option<Candidate> {
        let candidates: Vec<Candidate> = (0..self.kinds.len())
            .filter_map(|f| match self.kinds[f] {
                InputKind::Binary => self.bit_candidate(rows, f),
                InputKind::Real => self.threshold_candidate(rows, counts, f),
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let informative: Vec<&Candidate> = candidates.iter().filter(|c| c.gain > GAIN_EPSILON).collect();
        let pool: Vec<&Candidate> = if informative.is_empty() {
            candidates.iter().collect()
        } else {
            let mean = informative.iter().map(|c| c.gain).sum::<f64>() / informative.len() as f64;
            informative
                .into_iter()
                .filter(|c| c.gain >= mean - GAIN_EPSILON)
                .collect()
        };
        // Earlier candidates win ties: features are scanned in order.
        let mut best = *pool[0];
        for c in &pool[1..] {
            if c.ratio > best.ratio + GAIN_EPSILON {
                best = **c;
            }
        }
        Some(best)
    }

    fn bit_candidate(&self, rows: &[usize], f: usize) -> Option<Candidate> {
        let test = Test::Bit { feature: f };
        let mut pass = vec![0; self.classes];
        let mut fail = vec![0; self.classes];
        for &r in rows {
            if test.passes(&self.inputs[r]) {
                pass[self.labels[r]] += 1;
            } else {
                fail[self.labels[r]] += 1;
            }
        }
        self.candidate(test, &pass, &fail)
    }

    fn candidate(&self, test: Test, pass: &[usize], fail: &[usize]) -> Option<Candidate> {
        let np: usize = pass.iter().sum();
        let nf: usize = fail.iter().sum();
        if np < self.min_leaf.max(1) || nf < self.min_leaf.max(1) {
            return None;
        }
        let (gain, split) = gain_and_split_info(pass, fail);
        Some(Candidate {
            test,
            gain,
            ratio: if split > 0.0 { gain / split } else { 0.0 },
        })
    }

    /// Best midpoint threshold by gain, lowest threshold on ties.
    fn threshold_candidate(&self, rows: &[usize], counts: &[usize], f: usize) -> Option<Candidate> {
        let mut sorted: Vec<(f64, usize)> = rows.iter().map(|&r| (self.inputs[r][f], self.labels[r])).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut below = vec![0; self.classes];
        let mut best: Option<Candidate> = None;
        for i in 0..sorted.len() - 1 {
            below[sorted[i].1] += 1;
            if sorted[i].0 == sorted[i + 1].0 {
                continue;
            }
            let above: Vec<usize> = counts.iter().zip(&below).map(|(t, b)| t - b).collect();
            let threshold = sorted[i].0 + (sorted[i + 1].0 - sorted[i].0) / 2.0;
            let test = Test::Threshold { feature: f, threshold };
            if let Some(c) = self.candidate(test, &below, &above) {
                if best.is_none_or(|b| c.gain > b.gain + GAIN_EPSILON) {
                    best = Some(c);
                }
            }
        }
        best
    }
}

fn leaf(counts: Vec<usize>) -> Node {
    Node::Leaf {
        class: majority(&counts),
        counts,
    }
}

impl DecisionTree {
    /// Grows an unpruned tree. Splits need at least `min_leaf` rows on each
    /// side; ties between tests go to the lowest feature index, then the
    /// lowest threshold.
    pub fn fit(
        inputs: &[Vec<f64>],
        labels: &[usize],
        classes: usize,
        input_names: Vec<String>,
        input_kinds: Vec<InputKind>,
        min_leaf: usize,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::NoInstances);
        }
        if inputs.len() != labels.len() {
            return Err(Error::Dimension {
                expected: inputs.len(),
                found: labels.len(),
            });
        }
        if input_names.len() != input_kinds.len() {
            return Err(Error::Dimension {
                expected: input_kinds.len(),
                found: input_names.len(),
            });
        }
        if let Some(x) = inputs.iter().find(|x| x.len() != input_kinds.len()) {
            return Err(Error::Dimension {
                expected: input_kinds.len(),
                found: x.len(),
            });
        }
        if classes == 0 || labels.iter().any(|&l| l >= classes) {
            return Err(Error::InvalidArgument("label out of range".into()));
        }
        let grower = Grower {
            inputs,
            labels,
            kinds: &input_kinds,
            classes,
            min_leaf,
        };
        let root = grower.grow((0..inputs.len()).collect());
        Ok(DecisionTree {
            root,
            classes,
            input_names,
            input_kinds,
        })
    }

    /// A tree that always predicts `class`.
    pub fn constant(
        class: usize,
        classes: usize,
        support: usize,
        input_names: Vec<String>,
        input_kinds: Vec<InputKind>,
    ) -> Self {
        let mut counts = vec![0; classes];
        counts[class] = support;
        DecisionTree {
            root: Node::Leaf { class, counts },
            classes,
            input_names,
            input_kinds,
        }
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_kinds.len() {
            return Err(Error::Dimension {
                expected: self.input_kinds.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.check_input(x)?;
        Ok(self.predict_unchecked(x))
    }

    pub fn predict_unchecked(&self, x: &[f64]) -> usize {
        match self.root.route(x) {
            Node::Leaf { class, .. } => *class,
            Node::Split { .. } => unreachable!("route ends at a leaf"),
        }
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        rows.iter().map(|x| self.predict(x)).collect()
    }

    pub fn errors(&self, inputs: &[Vec<f64>], labels: &[usize]) -> usize {
        inputs
            .iter()
            .zip(labels)
            .filter(|(x, &y)| self.predict_unchecked(x) != y)
            .count()
    }

    pub fn leaves(&self) -> usize {
        self.root.leaves()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Bottom-up reduced-error pruning: a subtree becomes a leaf predicting
    /// its training majority whenever that does not raise the error on the
    /// pruning rows that reach it.
    pub fn prune(&self, inputs: &[Vec<f64>], labels: &[usize]) -> Pruned {
        if inputs.is_empty() {
            let warning = "empty pruning set; tree left unpruned".to_string();
            log::warn!("{warning}");
            return Pruned {
                tree: self.clone(),
                warning: Some(warning),
            };
        }
        let rows: Vec<usize> = (0..inputs.len()).collect();
        let (root, _) = prune_node(&self.root, &rows, inputs, labels);
        Pruned {
            tree: DecisionTree { root, ..self.clone() },
            warning: None,
        }
    }
}

fn prune_node(node: &Node, rows: &[usize], inputs: &[Vec<f64>], labels: &[usize]) -> (Node, usize) {
    match node {
        Node::Leaf { class, .. } => {
            let errors = rows.iter().filter(|&&r| labels[r] != *class).count();
            (node.clone(), errors)
        }
        Node::Split {
            test,
            pass,
            fail,
            counts,
        } => {
            let (p_rows, f_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| test.passes(&inputs[r]));
            let (pass, pe) = prune_node(pass, &p_rows, inputs, labels);
            let (fail, fe) = prune_node(fail, &f_rows, inputs, labels);
            let class = majority(counts);
            let leaf_errors = rows.iter().filter(|&&r| labels[r] != class).count();
            if leaf_errors <= pe + fe {
                (
                    Node::Leaf {
                        class,
                        counts: counts.clone(),
                    },
                    leaf_errors,
                )
            } else {
                (
                    Node::Split {
                        test: *test,
                        pass: Box::new(pass),
                        fail: Box::new(fail),
                        counts: counts.clone(),
                    },
                    pe + fe,
                )
            }
        }
    }
}

/// Induces the tree for one neuron; outputs are the two classes 0 and 1.
pub fn induce(s: &NeuronSampleSet, min_leaf: usize) -> Result<DecisionTree> {
    let labels: Vec<usize> = s.outputs.iter().map(|&b| usize::from(b)).collect();
    DecisionTree::fit(
        &s.inputs,
        &labels,
        2,
        s.input_names.clone(),
        s.input_kinds.clone(),
        min_leaf,
    )
}

impl fmt::Display for DecisionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn walk(t: &DecisionTree, node: &Node, depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match node {
                Node::Leaf { class, counts } => {
                    writeln!(f, "{}{class} ({})", "|   ".repeat(depth), counts.iter().sum::<usize>())
                }
                Node::Split { test, pass, fail, .. } => {
                    let name = &t.input_names[test.feature()];
                    let (yes, no) = match test {
                        Test::Bit { .. } => (format!("{name} = 1"), format!("{name} = 0")),
                        Test::Threshold { threshold, .. } => {
                            (format!("{name} <= {threshold}"), format!("{name} > {threshold}"))
                        }
                    };
                    for (label, child) in [(yes, pass), (no, fail)] {
                        writeln!(f, "{}{label}:", "|   ".repeat(depth))?;
                        walk(t, child, depth + 1, f)?;
                    }
                    Ok(())
                }
            }
        }
        walk(self, &self.root, 0, f)
    }
}
