//! Rule extraction from a trained network: per-neuron samples, one pruned
//! tree per neuron, tree-to-DNF conversion, substitution down to the inputs
//! and minimisation.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{majority, Dataset};
use crate::error::{Error, Result};
use crate::minimizer::{minimize_ruleset, Minimized, Mode};
use crate::network::Network;
use crate::rules::{substitute, Exclusivity, NeuronRules, Ruleset, MAX_TERMS};
use crate::sampler::{collect_neuron_samples, NeuronSampleSet};
use crate::tree::{induce, DecisionTree, DEFAULT_MIN_LEAF};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub min_leaf: usize,
    pub minimizer: Mode,
    pub max_terms: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            min_leaf: DEFAULT_MIN_LEAF,
            minimizer: Mode::Auto,
            max_terms: MAX_TERMS,
        }
    }
}

/// One pruned tree per non-input unit, layer by layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeCascade {
    pub layers: Vec<Vec<DecisionTree>>,
}

impl TreeCascade {
    /// Output-layer bits obtained by feeding each layer's tree predictions
    /// into the next layer's trees.
    pub fn output_bits(&self, x: &[f64]) -> Result<Vec<bool>> {
        let mut current: Vec<f64> = x.to_vec();
        for layer in &self.layers {
            current = layer
                .iter()
                .map(|t| t.predict(&current).map(|b| b as f64))
                .collect::<Result<_>>()?;
        }
        Ok(current.iter().map(|&b| b == 1.0).collect())
    }

    /// Class chosen by `policy` from the cascade's output bits.
    pub fn predict(&self, x: &[f64], policy: &Ruleset) -> Result<usize> {
        Ok(policy.resolve(&self.output_bits(x)?))
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub cascade: TreeCascade,
    pub neuron_rules: Vec<NeuronRules>,
    /// Rules straight after substitution.
    pub substituted: Ruleset,
    pub minimized: Ruleset,
    pub minimization: Vec<Minimized>,
    pub rounds: usize,
    pub warnings: Vec<String>,
    /// Seconds per stage.
    pub timings: Vec<(String, f64)>,
}

/// Grows each neuron's tree on `grow`, prunes it on `prune`, and turns the
/// trees into class rules over the encoded inputs. Rule priorities and the
/// default class come from the network's behaviour on `grow ∪ prune`.
pub fn extract(net: &Network, grow: &Dataset, prune: &Dataset, cfg: &ExtractConfig) -> Result<Extraction> {
    if grow.schema != prune.schema || grow.classes != prune.classes {
        return Err(Error::Schema("grow and prune sets do not share a schema".into()));
    }
    if net.output_width() != grow.classes.len() {
        return Err(Error::Dimension {
            expected: grow.classes.len(),
            found: net.output_width(),
        });
    }
    let mut timings = Vec::new();
    let mut warnings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let grow_sets = collect_neuron_samples(net, grow).map_err(|e| e.in_stage("samples"))?;
    let prune_sets = collect_neuron_samples(net, prune).map_err(|e| e.in_stage("samples"))?;
    lap("samples", &mut timings);

    let trees: Vec<(DecisionTree, Option<String>)> = grow_sets
        .par_iter()
        .zip(&prune_sets)
        .map(|(g, p)| neuron_tree(g, p, cfg.min_leaf))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("trees"))?;
    let mut layers: Vec<Vec<DecisionTree>> = vec![Vec::new(); net.layers.len()];
    let mut neuron_rules = Vec::with_capacity(trees.len());
    for ((tree, warning), set) in trees.into_iter().zip(&grow_sets) {
        if let Some(w) = warning {
            warnings.push(format!("{}: {w}", set.neuron));
        }
        neuron_rules.push(NeuronRules::from_tree(&tree, set.neuron).map_err(|e| e.in_stage("trees"))?);
        layers[set.neuron.layer - 1].push(tree);
    }
    lap("trees", &mut timings);

    let excl = Exclusivity::from_schema(&grow.schema);
    let sub = substitute(&neuron_rules, &grow.classes, &excl, cfg.max_terms).map_err(|e| e.in_stage("substitute"))?;
    let train_rows: Vec<Vec<f64>> = grow.rows.iter().chain(&prune.rows).cloned().collect();
    let net_pred = net.predict_all(&train_rows)?;
    let mut counts = vec![0; grow.classes.len()];
    for &p in &net_pred {
        counts[p] += 1;
    }
    let substituted = Ruleset::new(
        grow.classes.clone(),
        grow.feature_names(),
        sub.rules,
        &train_rows,
        majority(&counts),
    )
    .map_err(|e| e.in_stage("substitute"))?;
    lap("substitute", &mut timings);

    let (minimized, minimization) =
        minimize_ruleset(&substituted, &excl, cfg.minimizer).map_err(|e| e.in_stage("minimize"))?;
    for (m, class) in minimization.iter().zip(&grow.classes) {
        if let Some(reason) = &m.fallback {
            warnings.push(format!("minimising rule for {class:?}: {reason}"));
        }
    }
    lap("minimize", &mut timings);

    Ok(Extraction {
        cascade: TreeCascade { layers },
        neuron_rules,
        substituted,
        minimized,
        minimization,
        rounds: sub.rounds,
        warnings,
        timings,
    })
}

fn neuron_tree(
    grow: &NeuronSampleSet,
    prune: &NeuronSampleSet,
    min_leaf: usize,
) -> Result<(DecisionTree, Option<String>)> {
    if let Some(bit) = grow.constant_output() {
        let tree = DecisionTree::constant(
            usize::from(bit),
            2,
            grow.len(),
            grow.input_names.clone(),
            grow.input_kinds.clone(),
        );
        return Ok((tree, None));
    }
    let tree = induce(grow, min_leaf)?;
    let labels: Vec<usize> = prune.outputs.iter().map(|&b| usize::from(b)).collect();
    let pruned = tree.prune(&prune.inputs, &labels);
    Ok((pruned.tree, pruned.warning))
}

/// Share of `rows` on which the rules and the tree cascade pick the same class.
pub fn cascade_agreement(ex: &Extraction, rows: &[Vec<f64>]) -> Result<f64> {
    if rows.is_empty() {
        return Ok(1.0);
    }
    let mut agree = 0usize;
    for x in rows {
        if ex.substituted.predict(x)? == ex.cascade.predict(x, &ex.substituted)? {
            agree += 1;
        }
    }
    Ok(agree as f64 / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureSpec;
    use crate::minimizer::equivalent;
    use crate::network::{Layer, NetworkConfig};
    use crate::rules::{Dnf, Literal, Term, Var};

    fn binary(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Dataset {
        Dataset::new(
            vec![FeatureSpec::binary("A"), FeatureSpec::binary("B")],
            rows,
            labels,
            vec!["negative".into(), "positive".into()],
            true,
        )
        .unwrap()
    }

    fn corners() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]
    }

    #[test]
    fn and_gate_network() {
        // output 1 fires on A ∧ B, output 0 on its negation
        let net = Network {
            steepness: 100.0,
            layers: vec![Layer {
                inputs: 2,
                outputs: 2,
                weights: vec![-1.0, -1.0, 1.0, 1.0],
                biases: vec![1.5, -1.5],
            }],
        };
        let rows: Vec<Vec<f64>> = corners().into_iter().cycle().take(16).collect();
        let ds = binary(rows.clone(), net.predict_all(&rows).unwrap());
        let cfg = ExtractConfig {
            min_leaf: 1,
            ..Default::default()
        };
        let ex = extract(&net, &ds, &ds, &cfg).unwrap();
        let want = Dnf::from_terms([Term::from_literals([
            Literal::is(Var::Input(0), true),
            Literal::is(Var::Input(1), true),
        ])
        .unwrap()]);
        assert!(
            equivalent(&ex.minimized.rules[1], &want, &Exclusivity::default(), 0)
                .unwrap()
                .equal
        );
        assert_eq!(
            ex.minimized
                .to_text()
                .lines()
                .find(|l| l.ends_with("positive"))
                .unwrap(),
            "IF A=1 AND B=1 THEN positive"
        );
        assert_eq!(ex.rounds, 0);
    }

    #[test]
    fn xor_two_layer_cascade() {
        let rows: Vec<Vec<f64>> = corners().into_iter().cycle().take(40).collect();
        let labels: Vec<usize> = rows.iter().map(|x| usize::from(x[0] != x[1])).collect();
        let ds = binary(rows.clone(), labels.clone());
        let cfg = NetworkConfig {
            hidden: vec![4],
            learning_rate: 0.0002,
            epochs: 400,
            seed: 5,
            ..Default::default()
        };
        let net = Network::train(&ds.rows, &ds.labels, 2, &cfg).unwrap();
        let ex = extract(
            &net,
            &ds,
            &ds,
            &ExtractConfig {
                min_leaf: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(ex.rounds, 1);
        assert_eq!(cascade_agreement(&ex, &corners()).unwrap(), 1.0);
        for x in corners() {
            assert_eq!(ex.minimized.predict(&x).unwrap(), ex.substituted.predict(&x).unwrap());
        }
    }

    #[test]
    fn width_mismatch() {
        let net = Network::zeros(&[3, 2], 100.0).unwrap();
        let ds = binary(corners(), vec![0, 1, 1, 0]);
        assert!(extract(&net, &ds, &ds, &ExtractConfig::default()).is_err());
    }
}
