//! Propositional rules: literals, conjunctive terms, DNF, conversion of
//! decision trees to DNF and the layer-by-layer substitution that rewrites
//! neuron symbols into rules over the original inputs.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{InputKind, NeuronId};
use crate::tree::{DecisionTree, Node, Test};

/// Cap on the number of terms any class rule may reach during substitution.
pub const MAX_TERMS: usize = 100_000;

/// Below this size, substitution results are cleaned of subsumed terms.
const ABSORB_LIMIT: usize = 50_000;

/// A Boolean symbol: an encoded input column or a hidden unit's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Var {
    Input(usize),
    Neuron(NeuronId),
}

/// An `f64` threshold ordered and hashed by its bit pattern.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Threshold(pub f64);

impl PartialEq for Threshold {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}

impl Eq for Threshold {}

impl PartialOrd for Threshold {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Threshold {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Hash for Threshold {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Literal {
    Is {
        var: Var,
        value: bool,
    },
    /// `x[feature] <= threshold`
    AtMost {
        feature: usize,
        threshold: Threshold,
    },
    /// `x[feature] > threshold`
    Above {
        feature: usize,
        threshold: Threshold,
    },
}

impl Literal {
    pub fn is(var: Var, value: bool) -> Self {
        Literal::Is { var, value }
    }

    pub fn at_most(feature: usize, threshold: f64) -> Self {
        Literal::AtMost {
            feature,
            threshold: Threshold(threshold),
        }
    }

    pub fn above(feature: usize, threshold: f64) -> Self {
        Literal::Above {
            feature,
            threshold: Threshold(threshold),
        }
    }
}

/// Half-open interval `(lower, upper]` on one real feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Interval {
    pub lower: Option<Threshold>,
    pub upper: Option<Threshold>,
}

impl Interval {
    fn is_empty(&self) -> bool {
        matches!((self.lower, self.upper), (Some(lo), Some(hi)) if lo >= hi)
    }

    fn intersect(&self, other: &Interval) -> Interval {
        Interval {
            lower: self.lower.max(other.lower),
            upper: match (self.upper, other.upper) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        }
    }

    fn contains_value(&self, v: f64) -> bool {
        self.lower.is_none_or(|lo| v > lo.0) && self.upper.is_none_or(|hi| v <= hi.0)
    }

    /// Every point of `other` lies in `self`.
    fn contains(&self, other: &Interval) -> bool {
        let lower_ok = match (self.lower, other.lower) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(a), Some(b)) => a <= b,
        };
        let upper_ok = match (self.upper, other.upper) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(a), Some(b)) => a >= b,
        };
        lower_ok && upper_ok
    }

    fn literal_count(&self) -> usize {
        usize::from(self.lower.is_some()) + usize::from(self.upper.is_some())
    }
}

/// Mutually exclusive input columns, e.g. the one-hot block of a nominal
/// feature. Exactly one member is 1 on every real instance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Exclusivity {
    group_of: HashMap<usize, usize>,
    groups: Vec<Vec<usize>>,
}

impl Exclusivity {
    pub fn new(groups: Vec<Vec<usize>>) -> Self {
        let mut group_of = HashMap::new();
        for (g, members) in groups.iter().enumerate() {
            for &m in members {
                group_of.insert(m, g);
            }
        }
        Exclusivity { group_of, groups }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Groups formed by one-hot columns of the same nominal feature.
    pub fn from_schema(schema: &[crate::dataset::FeatureSpec]) -> Self {
        let mut by_feature: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, spec) in schema.iter().enumerate() {
            if let Some(src) = &spec.one_hot {
                by_feature.entry(src.feature.as_str()).or_default().push(i);
            }
        }
        Exclusivity::new(by_feature.into_values().filter(|g| g.len() > 1).collect())
    }
}

/// A conjunction of literals. The empty term is TRUE.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Term {
    bools: BTreeMap<Var, bool>,
    bounds: BTreeMap<usize, Interval>,
}

impl Term {
    pub fn top() -> Self {
        Term::default()
    }

    /// Builds a term; `None` if the literals contradict each other.
    pub fn from_literals(lits: impl IntoIterator<Item = Literal>) -> Option<Self> {
        let mut t = Term::top();
        for lit in lits {
            t = t.with(lit)?;
        }
        Some(t)
    }

    /// Adds one literal; `None` on contradiction.
    pub fn with(mut self, lit: Literal) -> Option<Self> {
        match lit {
            Literal::Is { var, value } => match self.bools.insert(var, value) {
                Some(prev) if prev != value => return None,
                _ => {}
            },
            Literal::AtMost { feature, threshold } => {
                let iv = self.bounds.entry(feature).or_default();
                *iv = iv.intersect(&Interval {
                    lower: None,
                    upper: Some(threshold),
                });
                if iv.is_empty() {
                    return None;
                }
            }
            Literal::Above { feature, threshold } => {
                let iv = self.bounds.entry(feature).or_default();
                *iv = iv.intersect(&Interval {
                    lower: Some(threshold),
                    upper: None,
                });
                if iv.is_empty() {
                    return None;
                }
            }
        }
        Some(self)
    }

    /// Conjunction of two terms; `None` on contradiction.
    pub fn and(&self, other: &Term) -> Option<Term> {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = large.clone();
        for (&var, &value) in &small.bools {
            match out.bools.insert(var, value) {
                Some(prev) if prev != value => return None,
                _ => {}
            }
        }
        for (&f, iv) in &small.bounds {
            let merged = out.bounds.get(&f).map_or(*iv, |cur| cur.intersect(iv));
            if merged.is_empty() {
                return None;
            }
            out.bounds.insert(f, merged);
        }
        Some(out)
    }

    /// Applies one-hot exclusivity: two positive members of a group, or a
    /// group with every member negated, is a contradiction; negatives beside
    /// a positive member are implied and dropped.
    pub fn normalise(mut self, excl: &Exclusivity) -> Option<Term> {
        if excl.groups.is_empty() {
            return Some(self);
        }
        let mut positive: HashMap<usize, usize> = HashMap::new();
        let mut negatives: HashMap<usize, usize> = HashMap::new();
        for (var, &value) in &self.bools {
            if let Var::Input(i) = var {
                if let Some(&g) = excl.group_of.get(i) {
                    if value {
                        if positive.insert(g, *i).is_some() {
                            return None;
                        }
                    } else {
                        *negatives.entry(g).or_default() += 1;
                    }
                }
            }
        }
        for (&g, &n) in &negatives {
            if !positive.contains_key(&g) && n == excl.groups[g].len() {
                return None;
            }
        }
        if !positive.is_empty() {
            self.bools.retain(|var, value| match var {
                Var::Input(i) if !*value => excl.group_of.get(i).is_none_or(|g| !positive.contains_key(g)),
                _ => true,
            });
        }
        Some(self)
    }

    pub fn is_top(&self) -> bool {
        self.bools.is_empty() && self.bounds.is_empty()
    }

    /// Number of literals (an interval bounded on both sides counts two).
    pub fn len(&self) -> usize {
        self.bools.len() + self.bounds.values().map(Interval::literal_count).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.is_top()
    }

    pub fn literals(&self) -> Vec<Literal> {
        let mut out: Vec<Literal> = self
            .bools
            .iter()
            .map(|(&var, &value)| Literal::Is { var, value })
            .collect();
        for (&feature, iv) in &self.bounds {
            if let Some(threshold) = iv.lower {
                out.push(Literal::Above { feature, threshold });
            }
            if let Some(threshold) = iv.upper {
                out.push(Literal::AtMost { feature, threshold });
            }
        }
        out
    }

    pub fn bools(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.bools.iter().map(|(&v, &b)| (v, b))
    }

    pub fn bounds(&self) -> impl Iterator<Item = (usize, Interval)> + '_ {
        self.bounds.iter().map(|(&f, &iv)| (f, iv))
    }

    pub fn mentions_neurons(&self) -> bool {
        self.bools.keys().any(|v| matches!(v, Var::Neuron(_)))
    }

    /// Evaluates the term; `value` supplies inputs (`Var::Input`) and neuron
    /// bits (`Var::Neuron`) as numbers.
    pub fn holds(&self, value: &impl Fn(Var) -> f64) -> bool {
        self.bools.iter().all(|(&var, &b)| (value(var) >= 0.5) == b)
            && self
                .bounds
                .iter()
                .all(|(&f, iv)| iv.contains_value(value(Var::Input(f))))
    }

    /// Every assignment satisfying `other` satisfies `self`.
    pub fn subsumes(&self, other: &Term) -> bool {
        self.bools.len() <= other.bools.len()
            && self.bools.iter().all(|(v, b)| other.bools.get(v) == Some(b))
            && self
                .bounds
                .iter()
                .all(|(f, iv)| other.bounds.get(f).is_some_and(|o| iv.contains(o)))
    }
}

impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.literals().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let lits = Vec::<Literal>::deserialize(d)?;
        Term::from_literals(lits).ok_or_else(|| serde::de::Error::custom("contradictory term"))
    }
}

/// A disjunction of terms, kept sorted and duplicate-free. No terms is FALSE.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dnf {
    terms: Vec<Term>,
}

impl Dnf {
    pub fn falsum() -> Self {
        Dnf::default()
    }

    pub fn verum() -> Self {
        Dnf {
            terms: vec![Term::top()],
        }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = Term>) -> Self {
        let mut terms: Vec<Term> = terms.into_iter().collect();
        terms.sort();
        terms.dedup();
        Dnf { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_false(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_true(&self) -> bool {
        self.terms.iter().any(Term::is_top)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn literal_count(&self) -> usize {
        self.terms.iter().map(Term::len).sum()
    }

    pub fn holds(&self, value: &impl Fn(Var) -> f64) -> bool {
        self.terms.iter().any(|t| t.holds(value))
    }

    /// Evaluates a DNF over encoded inputs only.
    pub fn holds_on(&self, x: &[f64]) -> bool {
        self.holds(&|v| match v {
            Var::Input(i) => x[i],
            Var::Neuron(_) => f64::NAN,
        })
    }

    pub fn or(&self, other: &Dnf) -> Dnf {
        Dnf::from_terms(self.terms.iter().chain(&other.terms).cloned())
    }

    /// Drops every term subsumed by another term.
    pub fn absorb(&self) -> Dnf {
        Dnf {
            terms: absorb_terms(self.terms.clone()),
        }
    }

    pub fn mentions_neurons(&self) -> bool {
        self.terms.iter().any(Term::mentions_neurons)
    }

    /// Largest input index referenced, for schema checks.
    fn max_input(&self) -> Option<usize> {
        self.terms
            .iter()
            .flat_map(|t| {
                t.bools
                    .keys()
                    .filter_map(|v| match v {
                        Var::Input(i) => Some(*i),
                        Var::Neuron(_) => None,
                    })
                    .chain(t.bounds.keys().copied())
            })
            .max()
    }
}

/// Keeps only terms not subsumed by another, processing shorter terms first.
fn absorb_terms(mut terms: Vec<Term>) -> Vec<Term> {
    terms.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    terms.dedup();
    // Index kept terms by their first Boolean literal; a subsumer's literals
    // all appear in the subsumed term, so only those buckets need checking.
    let mut by_literal: HashMap<(Var, bool), Vec<usize>> = HashMap::new();
    let mut bounds_only: Vec<usize> = Vec::new();
    let mut kept: Vec<Term> = Vec::new();
    for t in terms {
        let covered = bounds_only.iter().any(|&k| kept[k].subsumes(&t))
            || t.bools().any(|lit| {
                by_literal
                    .get(&lit)
                    .is_some_and(|ks| ks.iter().any(|&k| kept[k].subsumes(&t)))
            });
        if covered {
            continue;
        }
        let idx = kept.len();
        match t.bools().next() {
            Some(lit) => by_literal.entry(lit).or_default().push(idx),
            None => bounds_only.push(idx),
        }
        kept.push(t);
    }
    kept.sort();
    kept
}

/// Symbols a tree's input columns stand for.
pub fn tree_vars(tree: &DecisionTree, layer: usize) -> Vec<Var> {
    (0..tree.input_kinds.len())
        .map(|i| {
            if layer <= 1 {
                Var::Input(i)
            } else {
                Var::Neuron(NeuronId::new(layer - 1, i))
            }
        })
        .collect()
}

/// One DNF per class: each root-to-leaf path becomes a term of its leaf's class.
pub fn tree_to_dnf(tree: &DecisionTree, vars: &[Var]) -> Result<Vec<Dnf>> {
    if vars.len() != tree.input_kinds.len() {
        return Err(Error::Dimension {
            expected: tree.input_kinds.len(),
            found: vars.len(),
        });
    }
    let mut per_class: Vec<Vec<Term>> = vec![Vec::new(); tree.classes];
    fn walk(node: &Node, path: Term, vars: &[Var], kinds: &[InputKind], out: &mut [Vec<Term>]) {
        match node {
            Node::Leaf { class, .. } => out[*class].push(path),
            Node::Split { test, pass, fail, .. } => {
                let (yes, no) = match *test {
                    Test::Bit { feature } => (Literal::is(vars[feature], true), Literal::is(vars[feature], false)),
                    Test::Threshold { feature, threshold } => {
                        debug_assert_eq!(kinds[feature], InputKind::Real);
                        let Var::Input(f) = vars[feature] else {
                            unreachable!("threshold tests only apply to input features")
                        };
                        (Literal::at_most(f, threshold), Literal::above(f, threshold))
                    }
                };
                // Unreachable paths (contradictory tests) contribute nothing.
                if let Some(p) = path.clone().with(yes) {
                    walk(pass, p, vars, kinds, out);
                }
                if let Some(p) = path.with(no) {
                    walk(fail, p, vars, kinds, out);
                }
            }
        }
    }
    walk(&tree.root, Term::top(), vars, &tree.input_kinds, &mut per_class);
    Ok(per_class.into_iter().map(Dnf::from_terms).collect())
}

/// The pair of complementary rules for one neuron.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronRules {
    pub neuron: NeuronId,
    /// Conditions under which the unit outputs 0.
    pub off: Dnf,
    /// Conditions under which the unit outputs 1.
    pub on: Dnf,
}

impl NeuronRules {
    pub fn from_tree(tree: &DecisionTree, neuron: NeuronId) -> Result<Self> {
        if tree.classes != 2 {
            return Err(Error::InvalidArgument(format!(
                "neuron trees must have 2 classes, found {}",
                tree.classes
            )));
        }
        let mut dnfs = tree_to_dnf(tree, &tree_vars(tree, neuron.layer))?;
        let on = dnfs.pop().unwrap_or_default();
        let off = dnfs.pop().unwrap_or_default();
        Ok(NeuronRules { neuron, off, on })
    }

    pub fn rule(&self, bit: bool) -> &Dnf {
        if bit {
            &self.on
        } else {
            &self.off
        }
    }
}

/// Per-output-unit rules over the original inputs after substitution.
#[derive(Debug, Clone, PartialEq)]
pub struct Substituted {
    pub rules: Vec<Dnf>,
    /// Layers of neuron symbols rewritten.
    pub rounds: usize,
}

/// Rewrites every output unit's bit-1 rule into a rule over the inputs by
/// replacing `h=1` with `h`'s on-rule and `h=0` with its off-rule, one layer
/// at a time from the top. Contradictory terms are dropped along the way.
pub fn substitute(
    neurons: &[NeuronRules],
    class_names: &[String],
    excl: &Exclusivity,
    max_terms: usize,
) -> Result<Substituted> {
    let by_id: BTreeMap<NeuronId, &NeuronRules> = neurons.iter().map(|r| (r.neuron, r)).collect();
    let top = by_id
        .keys()
        .map(|n| n.layer)
        .max()
        .ok_or_else(|| Error::InvalidArgument("no neuron rules".into()))?;
    let outputs: Vec<&NeuronRules> = by_id.values().filter(|r| r.neuron.layer == top).copied().collect();
    if outputs.len() != class_names.len() {
        return Err(Error::Dimension {
            expected: class_names.len(),
            found: outputs.len(),
        });
    }
    for r in neurons {
        for t in r.on.terms.iter().chain(&r.off.terms) {
            for (var, _) in t.bools() {
                if let Var::Neuron(n) = var {
                    if n.layer >= r.neuron.layer {
                        return Err(Error::SymbolCycle(format!("{} refers to {n}", r.neuron)));
                    }
                    if !by_id.contains_key(&n) {
                        return Err(Error::UnknownSymbol(n.to_string()));
                    }
                }
            }
        }
    }

    let mut rules = Vec::with_capacity(outputs.len());
    for (out, class) in outputs.iter().zip(class_names) {
        let mut current = out.on.clone();
        for layer in (1..top).rev() {
            current = substitute_layer(&current, layer, &by_id, excl, max_terms).map_err(|e| match e {
                Error::TermExplosion { limit, .. } => Error::TermExplosion {
                    class: class.clone(),
                    limit,
                },
                e => e,
            })?;
        }
        if current.mentions_neurons() {
            return Err(Error::SymbolCycle(format!(
                "rule for class {class:?} still mentions neurons after substitution"
            )));
        }
        rules.push(current);
    }
    Ok(Substituted { rules, rounds: top - 1 })
}

fn substitute_layer(
    dnf: &Dnf,
    layer: usize,
    by_id: &BTreeMap<NeuronId, &NeuronRules>,
    excl: &Exclusivity,
    max_terms: usize,
) -> Result<Dnf> {
    let explode = || Error::TermExplosion {
        class: String::new(),
        limit: max_terms,
    };
    let mut out: HashSet<Term> = HashSet::new();
    for term in &dnf.terms {
        let mut rest = Term::top();
        let mut factors: Vec<&Dnf> = Vec::new();
        for lit in term.literals() {
            match lit {
                Literal::Is {
                    var: Var::Neuron(n),
                    value,
                } if n.layer == layer => factors.push(by_id[&n].rule(value)),
                other => rest = rest.with(other).expect("literals of a valid term are consistent"),
            }
        }
        // Multiply smaller factors first so contradictions prune early.
        factors.sort_by_key(|d| d.len());
        let mut acc: Vec<Term> = match rest.normalise(excl) {
            Some(t) => vec![t],
            None => continue,
        };
        for factor in factors {
            let mut next: HashSet<Term> = HashSet::new();
            for a in &acc {
                for b in &factor.terms {
                    if let Some(t) = a.and(b).and_then(|t| t.normalise(excl)) {
                        next.insert(t);
                        if next.len() > max_terms {
                            return Err(explode());
                        }
                    }
                }
            }
            acc = next.into_iter().collect();
            if acc.len() <= ABSORB_LIMIT {
                acc = absorb_terms(acc);
            }
            if acc.is_empty() {
                break;
            }
        }
        out.extend(acc);
        if out.len() > max_terms {
            return Err(explode());
        }
    }
    let terms: Vec<Term> = out.into_iter().collect();
    Ok(if terms.len() <= ABSORB_LIMIT {
        Dnf {
            terms: absorb_terms(terms),
        }
    } else {
        Dnf::from_terms(terms)
    })
}

/// Class rules over the encoded inputs plus the policy resolving overlaps
/// and gaps between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ruleset {
    pub classes: Vec<String>,
    pub input_names: Vec<String>,
    pub rules: Vec<Dnf>,
    /// When several class rules fire, the one with the largest priority wins
    /// (lowest class index on ties).
    pub priority: Vec<usize>,
    pub default_class: usize,
}

impl Ruleset {
    /// Builds a ruleset whose priorities are the total training support of
    /// each class's terms.
    pub fn new(
        classes: Vec<String>,
        input_names: Vec<String>,
        rules: Vec<Dnf>,
        train_rows: &[Vec<f64>],
        default_class: usize,
    ) -> Result<Self> {
        if rules.len() != classes.len() {
            return Err(Error::Dimension {
                expected: classes.len(),
                found: rules.len(),
            });
        }
        let priority = rules
            .iter()
            .map(|d| {
                d.terms
                    .iter()
                    .map(|t| train_rows.iter().filter(|x| t.holds(&|v| input_value(v, x))).count())
                    .sum()
            })
            .collect();
        let rs = Ruleset {
            classes,
            input_names,
            rules,
            priority,
            default_class,
        };
        rs.validate()?;
        Ok(rs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rules.len() != self.classes.len() || self.priority.len() != self.classes.len() {
            return Err(Error::Dimension {
                expected: self.classes.len(),
                found: self.rules.len(),
            });
        }
        if self.default_class >= self.classes.len() {
            return Err(Error::InvalidArgument("default class out of range".into()));
        }
        for d in &self.rules {
            if d.mentions_neurons() {
                return Err(Error::UnknownSymbol("neuron symbol in final ruleset".into()));
            }
            if let Some(i) = d.max_input() {
                if i >= self.input_names.len() {
                    return Err(Error::UnknownSymbol(format!("input #{i}")));
                }
            }
        }
        Ok(())
    }

    /// Same policy, different rules (e.g. after minimisation).
    pub fn with_rules(&self, rules: Vec<Dnf>) -> Ruleset {
        Ruleset { rules, ..self.clone() }
    }

    /// Picks a class from the set of class rules that fired.
    pub fn resolve(&self, fired: &[bool]) -> usize {
        let mut best: Option<usize> = None;
        for (c, &f) in fired.iter().enumerate() {
            if f && best.is_none_or(|b| self.priority[c] > self.priority[b]) {
                best = Some(c);
            }
        }
        best.unwrap_or(self.default_class)
    }

    pub fn fired(&self, x: &[f64]) -> Vec<bool> {
        self.rules.iter().map(|d| d.holds_on(x)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.input_names.len() {
            return Err(Error::Dimension {
                expected: self.input_names.len(),
                found: x.len(),
            });
        }
        Ok(self.resolve(&self.fired(x)))
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        rows.iter().map(|x| self.predict(x)).collect()
    }

    pub fn term_count(&self) -> usize {
        self.rules.iter().map(Dnf::len).sum()
    }

    pub fn literal_count(&self) -> usize {
        self.rules.iter().map(Dnf::literal_count).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Ruleset> {
        let rs: Ruleset = serde_json::from_str(text)?;
        rs.validate()?;
        Ok(rs)
    }

    /// `IF ... THEN class` lines grouped by class, then the default.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, dnf) in self.rules.iter().enumerate() {
            for t in dnf.terms() {
                let body = if t.is_top() {
                    "TRUE".to_string()
                } else {
                    t.literals()
                        .iter()
                        .map(|l| render_literal(l, &self.input_names))
                        .collect::<Vec<_>>()
                        .join(" AND ")
                };
                writeln!(out, "IF {body} THEN {}", self.classes[c]).unwrap();
            }
        }
        writeln!(out, "DEFAULT {}", self.classes[self.default_class]).unwrap();
        out
    }
}

fn input_value(v: Var, x: &[f64]) -> f64 {
    match v {
        Var::Input(i) => x[i],
        Var::Neuron(_) => f64::NAN,
    }
}

/// `a1=2` for one-hot columns (negated `a1!=2`), `flag=1`/`flag=0` for
/// binary columns, `h1_3=1` for neurons, `x <= t`/`x > t` for thresholds.
pub fn render_literal(lit: &Literal, names: &[String]) -> String {
    let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
    match *lit {
        Literal::Is {
            var: Var::Input(i),
            value,
        } => {
            let n = name(i);
            match (n.split_once('='), value) {
                (Some(_), true) => n,
                (Some((f, v)), false) => format!("{f}!={v}"),
                (None, v) => format!("{n}={}", u8::from(v)),
            }
        }
        Literal::Is {
            var: Var::Neuron(id),
            value,
        } => format!("{id}={}", u8::from(value)),
        Literal::AtMost { feature, threshold } => format!("{} <= {}", name(feature), threshold.0),
        Literal::Above { feature, threshold } => format!("{} > {}", name(feature), threshold.0),
    }
}

impl fmt::Display for Dnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "FALSE");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                if t.is_top() {
                    "TRUE".to_string()
                } else {
                    format!(
                        "({})",
                        t.literals()
                            .iter()
                            .map(|l| render_literal(l, &[]))
                            .collect::<Vec<_>>()
                            .join(" & ")
                    )
                }
            })
            .collect();
        write!(f, "{}", parts.join(" | "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Node;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn input(i: usize, v: bool) -> Literal {
        Literal::is(Var::Input(i), v)
    }

    fn neuron(layer: usize, unit: usize, v: bool) -> Literal {
        Literal::is(Var::Neuron(NeuronId::new(layer, unit)), v)
    }

    fn term(lits: &[Literal]) -> Term {
        Term::from_literals(lits.iter().copied()).unwrap()
    }

    fn leaf(class: usize) -> Box<Node> {
        let mut counts = vec![0, 0];
        counts[class] = 1;
        Box::new(Node::Leaf { class, counts })
    }

    fn split(feature: usize, pass: Box<Node>, fail: Box<Node>) -> Box<Node> {
        Box::new(Node::Split {
            test: Test::Bit { feature },
            pass,
            fail,
            counts: vec![1, 1],
        })
    }

    /// A=Y → (B=Y → C1, B=N → C1), A=N → C2; C1 is class 0.
    fn figure_tree() -> DecisionTree {
        DecisionTree {
            root: *split(0, split(1, leaf(0), leaf(0)), leaf(1)),
            classes: 2,
            input_names: vec!["A".into(), "B".into()],
            input_kinds: vec![InputKind::Binary; 2],
        }
    }

    #[test]
    fn interval_reasoning() {
        assert!(Term::from_literals([Literal::at_most(0, 0.3), Literal::above(0, 0.5)]).is_none());
        assert!(Term::from_literals([Literal::at_most(0, 0.5), Literal::above(0, 0.5)]).is_none());
        let t = term(&[Literal::at_most(0, 0.3), Literal::at_most(0, 0.7)]);
        assert_eq!(t.literals(), vec![Literal::at_most(0, 0.3)]);
        assert_eq!(t.len(), 1);
        let t = term(&[Literal::above(0, 0.1), Literal::at_most(0, 0.7), Literal::above(0, 0.2)]);
        assert_eq!(t.len(), 2);
        assert!(t.holds(&|_| 0.5));
        assert!(!t.holds(&|_| 0.2));
        assert!(Term::from_literals([input(0, true), input(0, false)]).is_none());
    }

    #[test]
    fn figure_tree_to_dnf() {
        let tree = figure_tree();
        let dnfs = tree_to_dnf(&tree, &tree_vars(&tree, 1)).unwrap();
        let c1 = Dnf::from_terms([
            term(&[input(0, true), input(1, true)]),
            term(&[input(0, true), input(1, false)]),
        ]);
        let c2 = Dnf::from_terms([term(&[input(0, false)])]);
        assert_eq!(dnfs, vec![c1, c2]);
    }

    #[test]
    fn constant_tree_to_dnf() {
        let tree = DecisionTree::constant(1, 2, 5, vec!["A".into()], vec![InputKind::Binary]);
        let rules = NeuronRules::from_tree(&tree, NeuronId::new(1, 0)).unwrap();
        assert!(rules.on.is_true());
        assert_eq!(rules.on.len(), 1);
        assert!(rules.off.is_false());
    }

    fn random_tree(rng: &mut ChaCha8Rng, features: usize, depth: usize, used: &mut Vec<bool>) -> Box<Node> {
        let free: Vec<usize> = (0..features).filter(|&f| !used[f]).collect();
        if depth == 0 || free.is_empty() || rng.gen_bool(0.2) {
            return leaf(rng.gen_range(0..2));
        }
        let f = free[rng.gen_range(0..free.len())];
        used[f] = true;
        let pass = random_tree(rng, features, depth - 1, used);
        let fail = random_tree(rng, features, depth - 1, used);
        used[f] = false;
        split(f, pass, fail)
    }

    #[test]
    fn random_tree_dnf_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tree = DecisionTree {
            root: *random_tree(&mut rng, 6, 6, &mut vec![false; 6]),
            classes: 2,
            input_names: (0..6).map(|i| format!("x{i}")).collect(),
            input_kinds: vec![InputKind::Binary; 6],
        };
        let dnfs = tree_to_dnf(&tree, &tree_vars(&tree, 1)).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..6).map(|_| f64::from(rng.gen_bool(0.5))).collect();
            let p = tree.predict(&x).unwrap();
            assert!(dnfs[p].holds_on(&x));
            assert!(!dnfs[1 - p].holds_on(&x));
        }
    }

    #[test]
    fn worked_substitution_example() {
        // inputs A, B, C are 0, 1, 2; output rule X=1 ∨ (Y=0 ∧ Z=1) with X, Y, Z hidden
        let x = NeuronRules {
            neuron: NeuronId::new(1, 0),
            on: Dnf::from_terms([
                term(&[input(0, true), input(1, false)]),
                term(&[input(0, false), input(2, true)]),
            ]),
            off: Dnf::from_terms([
                term(&[input(0, false), input(1, false)]),
                term(&[input(0, true), input(2, false)]),
            ]),
        };
        // Y and Z are left as neuron symbols one layer further down, so only X is rewritten here
        let y_id = NeuronId::new(1, 1);
        let z_id = NeuronId::new(1, 2);
        let out_on = Dnf::from_terms([
            term(&[neuron(1, 0, true)]),
            term(&[neuron(1, 1, false), neuron(1, 2, true)]),
        ]);
        let mut by_id = BTreeMap::new();
        by_id.insert(x.neuron, &x);
        let y = NeuronRules {
            neuron: y_id,
            on: Dnf::from_terms([term(&[input(3, true)])]),
            off: Dnf::from_terms([term(&[input(3, false)])]),
        };
        let z = NeuronRules {
            neuron: z_id,
            on: Dnf::from_terms([term(&[input(4, true)])]),
            off: Dnf::from_terms([term(&[input(4, false)])]),
        };
        by_id.insert(y_id, &y);
        by_id.insert(z_id, &z);
        let got = substitute_layer(&out_on, 1, &by_id, &Exclusivity::default(), MAX_TERMS).unwrap();
        let want = Dnf::from_terms([
            term(&[input(0, true), input(1, false)]),
            term(&[input(0, false), input(2, true)]),
            term(&[input(3, false), input(4, true)]),
        ]);
        assert_eq!(got, want);

        let off = substitute_layer(
            &Dnf::from_terms([term(&[neuron(1, 0, false)])]),
            1,
            &by_id,
            &Exclusivity::default(),
            MAX_TERMS,
        )
        .unwrap();
        assert_eq!(off, x.off);
    }

    #[test]
    fn substitution_fixpoint_and_errors() {
        let out = NeuronRules {
            neuron: NeuronId::new(2, 0),
            on: Dnf::from_terms([term(&[input(0, true)])]),
            off: Dnf::from_terms([term(&[input(0, false)])]),
        };
        let hidden = NeuronRules {
            neuron: NeuronId::new(1, 0),
            on: Dnf::verum(),
            off: Dnf::falsum(),
        };
        let got = substitute(
            &[hidden.clone(), out.clone()],
            &["c".into()],
            &Exclusivity::default(),
            MAX_TERMS,
        )
        .unwrap();
        assert_eq!(got.rules[0], out.on);
        assert_eq!(got.rounds, 1);

        let cyclic = NeuronRules {
            neuron: NeuronId::new(1, 0),
            on: Dnf::from_terms([term(&[neuron(1, 0, true)])]),
            off: Dnf::falsum(),
        };
        assert!(matches!(
            substitute(&[cyclic, out], &["c".into()], &Exclusivity::default(), MAX_TERMS),
            Err(Error::SymbolCycle(_))
        ));
    }

    #[test]
    fn term_explosion_guard() {
        // output = ∧ of 8 hidden units, each with 4 disjoint terms → 4^8 terms
        let hidden: Vec<NeuronRules> = (0..8)
            .map(|u| NeuronRules {
                neuron: NeuronId::new(1, u),
                on: Dnf::from_terms((0..4).map(|k| term(&[input(u * 4 + k, true)]))),
                off: Dnf::falsum(),
            })
            .collect();
        let out = NeuronRules {
            neuron: NeuronId::new(2, 0),
            on: Dnf::from_terms([term(&(0..8).map(|u| neuron(1, u, true)).collect::<Vec<_>>())]),
            off: Dnf::falsum(),
        };
        let mut all = hidden;
        all.push(out);
        let err = substitute(&all, &["pos".into()], &Exclusivity::default(), 10_000).unwrap_err();
        assert!(matches!(err, Error::TermExplosion { ref class, limit: 10_000 } if class == "pos"));
        assert!(substitute(&all, &["pos".into()], &Exclusivity::default(), MAX_TERMS).is_ok());
    }

    #[test]
    fn exclusivity_prunes_terms() {
        let excl = Exclusivity::new(vec![vec![0, 1, 2]]);
        assert!(term(&[input(0, true), input(1, true)]).normalise(&excl).is_none());
        assert!(term(&[input(0, false), input(1, false), input(2, false)])
            .normalise(&excl)
            .is_none());
        let t = term(&[input(0, true), input(1, false), input(3, false)])
            .normalise(&excl)
            .unwrap();
        assert_eq!(t, term(&[input(0, true), input(3, false)]));
    }

    #[test]
    fn ruleset_policy_and_text() {
        let names: Vec<String> = ["A", "B", "C", "Y", "Z"].iter().map(|s| s.to_string()).collect();
        let class1 = Dnf::from_terms([
            term(&[input(0, true), input(1, false)]),
            term(&[input(0, false), input(2, true)]),
            term(&[input(3, false), input(4, true)]),
        ]);
        let class0 = Dnf::from_terms([
            term(&[input(0, false), input(1, false)]),
            term(&[input(0, true), input(2, false)]),
        ]);
        let rs = Ruleset {
            classes: vec!["0".into(), "1".into()],
            input_names: names,
            rules: vec![class0, class1],
            priority: vec![3, 5],
            default_class: 0,
        };
        // A=1, B=0, C=1, Y and Z false: only the class-1 rule fires
        assert_eq!(rs.predict(&[1.0, 0.0, 1.0, 0.0, 0.0]).unwrap(), 1);
        // A=1, B=1, C=1, Y=1: nothing fires → default
        assert_eq!(rs.fired(&[1.0, 1.0, 1.0, 1.0, 0.0]), vec![false, false]);
        assert_eq!(rs.predict(&[1.0, 1.0, 1.0, 1.0, 0.0]).unwrap(), 0);
        // both fire (A=1, B=0, C=0): higher priority wins
        assert_eq!(rs.fired(&[1.0, 0.0, 0.0, 0.0, 0.0]), vec![true, true]);
        assert_eq!(rs.predict(&[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), 1);
        assert!(rs.predict(&[1.0]).is_err());
        assert_eq!((rs.term_count(), rs.literal_count()), (5, 10));
        let text = rs.to_text();
        assert!(text.contains("IF A=1 AND B=0 THEN 1\n"));
        assert!(text.ends_with("DEFAULT 0\n"));
    }

    #[test]
    fn unknown_symbols_rejected() {
        let rs = Ruleset {
            classes: vec!["a".into(), "b".into()],
            input_names: vec!["x".into()],
            rules: vec![Dnf::from_terms([term(&[input(3, true)])]), Dnf::falsum()],
            priority: vec![0, 0],
            default_class: 0,
        };
        assert!(matches!(rs.validate(), Err(Error::UnknownSymbol(_))));
    }

    #[test]
    fn literal_rendering() {
        let names = vec!["colour=red".to_string(), "flag".to_string(), "size".to_string()];
        assert_eq!(render_literal(&input(0, true), &names), "colour=red");
        assert_eq!(render_literal(&input(0, false), &names), "colour!=red");
        assert_eq!(render_literal(&input(1, false), &names), "flag=0");
        assert_eq!(render_literal(&Literal::above(2, 0.25), &names), "size > 0.25");
    }

    #[test]
    fn absorption() {
        let d = Dnf::from_terms([
            term(&[input(0, true)]),
            term(&[input(0, true), input(1, true)]),
            term(&[Literal::at_most(2, 0.5)]),
            term(&[Literal::at_most(2, 0.3), input(1, false)]),
        ])
        .absorb();
        assert_eq!(
            d,
            Dnf::from_terms([term(&[input(0, true)]), term(&[Literal::at_most(2, 0.5)])])
        );
    }

    proptest! {
        #[test]
        fn term_serde_round_trip(
            bits in proptest::collection::btree_map(0usize..8, any::<bool>(), 0..5),
            lo in proptest::option::of(0.0f64..0.5),
            hi in proptest::option::of(0.5f64..1.0),
        ) {
            let mut lits: Vec<Literal> = bits.into_iter().map(|(i, v)| input(i, v)).collect();
            lits.extend(lo.map(|t| Literal::above(9, t)));
            lits.extend(hi.map(|t| Literal::at_most(9, t)));
            let t = term(&lits);
            let back: Term = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
