//! Metrics and experiment reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::Ruleset;

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    agreement(pred, truth)
}

/// Share of instances on which the rules and the network agree.
pub fn fidelity(rule_pred: &[usize], net_pred: &[usize]) -> Result<f64> {
    agreement(rule_pred, net_pred)
}

fn agreement(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::TooFew {
            field: "predictions",
            count: 0,
            min: 1,
        });
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64)
}

/// Two-sided critical values of Student's t for df = 1..=30.
const T_CRITICAL_10: [f64; 30] = [
    6.314, 2.920, 2.353, 2.132, 2.015, 1.943, 1.895, 1.860, 1.833, 1.812, 1.796, 1.782, 1.771, 1.761, 1.753, 1.746,
    1.740, 1.734, 1.729, 1.725, 1.721, 1.717, 1.714, 1.711, 1.708, 1.706, 1.703, 1.701, 1.699, 1.697,
];
const T_CRITICAL_05: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
    2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];
const T_CRITICAL_01: [f64; 30] = [
    63.657, 9.925, 5.841, 4.604, 4.032, 3.707, 3.499, 3.355, 3.250, 3.169, 3.106, 3.055, 3.012, 2.977, 2.947, 2.921,
    2.898, 2.878, 2.861, 2.845, 2.831, 2.819, 2.807, 2.797, 2.787, 2.779, 2.771, 2.763, 2.756, 2.750,
];

/// Critical value for a two-sided test; df above 30 uses the df = 30 row.
pub fn t_critical(df: usize, alpha: f64) -> Result<f64> {
    let table = if alpha == 0.10 {
        &T_CRITICAL_10
    } else if alpha == 0.05 {
        &T_CRITICAL_05
    } else if alpha == 0.01 {
        &T_CRITICAL_01
    } else {
        return Err(Error::InvalidArgument(format!(
            "alpha must be 0.10, 0.05 or 0.01, got {alpha}"
        )));
    };
    if df == 0 {
        return Err(Error::InvalidArgument("df must be at least 1".into()));
    }
    Ok(table[df.min(30) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    /// `±inf` when every difference is the same non-zero value.
    #[serde(with = "float_or_string")]
    pub t: f64,
    pub df: usize,
    pub alpha: f64,
    pub significant: bool,
}

/// Paired t-test on `a − b`.
pub fn paired_t(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooFew {
            field: "paired scores",
            count: a.len(),
            min: 2,
        });
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = a.len() - 1;
    let critical = t_critical(df, alpha)?;
    // Differences equal up to rounding count as constant.
    let constant = var.sqrt() <= 1e-12 * mean.abs().max(1e-300);
    let t = if mean == 0.0 && var == 0.0 {
        0.0
    } else if constant {
        mean.signum() * f64::INFINITY
    } else {
        mean / (var / n).sqrt()
    };
    Ok(TTest {
        t,
        df,
        alpha,
        significant: t.abs() > critical,
    })
}

/// JSON has no infinity; store non-finite values as strings.
mod float_or_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    /// Classes with at least one rule.
    pub classes: usize,
    pub terms: usize,
    pub literals: usize,
}

pub fn rule_complexity(r: &Ruleset) -> Complexity {
    Complexity {
        classes: r.rules.iter().filter(|d| !d.is_empty()).count(),
        terms: r.term_count(),
        literals: r.literal_count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Heretic,
    C45,
    TrepanLite,
    /// The trained network itself.
    Network,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Heretic => "HERETIC",
            Method::C45 => "C4.5",
            Method::TrepanLite => "Trepan-lite",
            Method::Network => "Network",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heretic" => Ok(Method::Heretic),
            "c45" => Ok(Method::C45),
            "trepan_lite" => Ok(Method::TrepanLite),
            "network" => Ok(Method::Network),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub accuracy: f64,
    /// Agreement with the network; absent for methods that ignore it.
    pub fidelity: Option<f64>,
}

/// One fold of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub scores: BTreeMap<Method, Score>,
    /// Size of the final (minimised) ruleset.
    pub rules: Option<Complexity>,
    /// Size straight after substitution.
    pub substituted: Option<Complexity>,
    /// Agreement between the substituted rules and the tree cascade over
    /// train and test instances.
    pub cascade_agreement: Option<f64>,
    /// Share of hidden and output activations away from 0 and 1.
    pub unsaturated: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Seconds per stage; kept out of the report so it stays reproducible.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        for s in self.scores.values() {
            if !unit(s.accuracy) || !s.fidelity.is_none_or(unit) {
                return Err(Error::InvalidArgument("score outside [0, 1]".into()));
            }
        }
        if self.timings.iter().any(|(_, t)| *t < 0.0 || !t.is_finite()) {
            return Err(Error::InvalidArgument("negative timing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Sample standard deviation; zero for a single value.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Summary {
            mean,
            std,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Over repeats, each repeat first averaged over its folds.
    pub accuracy: Summary,
    pub fidelity: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: Method,
    pub baseline: Method,
    pub metric: String,
    pub test: TTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dataset: String,
    pub repeats: usize,
    pub folds: usize,
    pub config: serde_json::Value,
    pub methods: Vec<MethodSummary>,
    pub comparisons: Vec<Comparison>,
    pub rule_terms: Option<Summary>,
    pub rule_literals: Option<Summary>,
    pub substituted_terms: Option<Summary>,
    pub cascade_agreement: Option<Summary>,
    pub warnings: Vec<String>,
    pub records: Vec<RunRecord>,
}

/// Published reference values (accuracy %, fidelity %) for the
/// decompositional FERNN method, shown for context only.
pub fn fernn_reference(dataset: &str) -> Option<(f64, f64)> {
    let key: String = dataset
        .to_ascii_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    Some(match key.as_str() {
        "promoters" => (91.72, 87.56),
        "breastcancer" => (95.81, 97.84),
        "heartdisease" => (82.23, 93.45),
        "vote" | "housevotes84" => (94.70, 97.90),
        "monks1" => (97.50, 98.45),
        "monks2" => (94.95, 95.32),
        "monks3" => (98.98, 99.59),
        _ => return None,
    })
}

impl Report {
    pub fn from_records(
        dataset: impl Into<String>,
        config: serde_json::Value,
        records: Vec<RunRecord>,
        alpha: f64,
        warnings: Vec<String>,
    ) -> Result<Report> {
        for r in &records {
            r.validate()?;
        }
        let repeats = records.iter().map(|r| r.repeat + 1).max().unwrap_or(0);
        let folds = records.iter().map(|r| r.fold + 1).max().unwrap_or(0);
        let methods: Vec<Method> = {
            let mut m: Vec<Method> = records.iter().flat_map(|r| r.scores.keys().copied()).collect();
            m.sort();
            m.dedup();
            m
        };

        let per_repeat = |f: &dyn Fn(&RunRecord) -> Option<f64>| -> Vec<f64> {
            (0..repeats)
                .filter_map(|rep| {
                    let vals: Vec<f64> = records.iter().filter(|r| r.repeat == rep).filter_map(f).collect();
                    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                })
                .collect()
        };

        let mut summaries = Vec::new();
        let mut acc_by_method: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
        for &m in &methods {
            let acc = per_repeat(&|r| r.scores.get(&m).map(|s| s.accuracy));
            let fid = per_repeat(&|r| r.scores.get(&m).and_then(|s| s.fidelity));
            if let Some(accuracy) = Summary::of(&acc) {
                summaries.push(MethodSummary {
                    method: m,
                    accuracy,
                    fidelity: Summary::of(&fid),
                });
            }
            acc_by_method.insert(m, acc);
        }

        let mut comparisons = Vec::new();
        if let Some(h) = acc_by_method.get(&Method::Heretic) {
            for (&m, other) in &acc_by_method {
                if m == Method::Heretic || other.len() != h.len() || h.len() < 2 {
                    continue;
                }
                comparisons.push(Comparison {
                    method: Method::Heretic,
                    baseline: m,
                    metric: "accuracy".into(),
                    test: paired_t(h, other, alpha)?,
                });
            }
        }

        let size =
            |f: &dyn Fn(&RunRecord) -> Option<f64>| Summary::of(&records.iter().filter_map(f).collect::<Vec<_>>());
        Ok(Report {
            dataset: dataset.into(),
            repeats,
            folds,
            config,
            methods: summaries,
            comparisons,
            rule_terms: size(&|r| r.rules.map(|c| c.terms as f64)),
            rule_literals: size(&|r| r.rules.map(|c| c.literals as f64)),
            substituted_terms: size(&|r| r.substituted.map(|c| c.terms as f64)),
            cascade_agreement: size(&|r| r.cascade_agreement),
            warnings,
            records,
        })
    }

    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Report> {
        Ok(serde_json::from_str(text)?)
    }

    /// Aligned text tables in percent.
    pub fn to_text(&self) -> String {
        let pct = |s: &Summary| format!("{:6.2} ± {:5.2}", 100.0 * s.mean, 100.0 * s.std);
        let mut out = String::new();
        writeln!(
            out,
            "Dataset: {}  ({} repeat(s) x {} fold(s))\n",
            self.dataset, self.repeats, self.folds
        )
        .unwrap();
        writeln!(out, "{:<13} {:>15}   {:>15}", "Method", "Accuracy (%)", "Fidelity (%)").unwrap();
        for s in &self.methods {
            let fid = s.fidelity.as_ref().map_or_else(|| format!("{:>15}", "-"), pct);
            writeln!(out, "{:<13} {:>15}   {:>15}", s.method.label(), pct(&s.accuracy), fid).unwrap();
        }
        if let Some((acc, fid)) = fernn_reference(&self.dataset) {
            writeln!(
                out,
                "{:<13} {:>15.2}   {:>15.2}   (published, not computed)",
                "FERNN", acc, fid
            )
            .unwrap();
        }
        if !self.comparisons.is_empty() {
            out.push('\n');
        }
        for c in &self.comparisons {
            writeln!(
                out,
                "Paired t ({}, {} vs {}): t = {:.3}, df = {}, {} at alpha = {}",
                c.metric,
                c.method.label(),
                c.baseline.label(),
                c.test.t,
                c.test.df,
                if c.test.significant {
                    "significant"
                } else {
                    "not significant"
                },
                c.test.alpha
            )
            .unwrap();
        }
        if let (Some(t), Some(l)) = (&self.rule_terms, &self.rule_literals) {
            writeln!(
                out,
                "\nRule size: {:.1} ± {:.1} terms, {:.1} ± {:.1} literals",
                t.mean, t.std, l.mean, l.std
            )
            .unwrap();
        }
        if let Some(s) = &self.substituted_terms {
            writeln!(out, "Terms before minimisation: {:.1} ± {:.1}", s.mean, s.std).unwrap();
        }
        if let Some(c) = &self.cascade_agreement {
            writeln!(out, "Rules vs tree cascade agreement: min {:.4}", c.min).unwrap();
        }
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{Dnf, Literal, Term, Var};
    use proptest::prelude::*;

    #[test]
    fn counting_metrics() {
        assert_eq!(accuracy(&[0, 1, 1], &[0, 1, 1]).unwrap(), 1.0);
        let pred: Vec<usize> = (0..100).map(|i| usize::from(i < 90)).collect();
        assert_eq!(accuracy(&pred, &[1; 100]).unwrap(), 0.90);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert!(accuracy(&[], &[]).is_err());
        assert!(fidelity(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn t_statistics() {
        let a = [0.8, 0.9, 0.7];
        let t = paired_t(&a, &a, 0.05).unwrap();
        assert_eq!((t.t, t.significant), (0.0, false));

        let b: Vec<f64> = a.iter().map(|x| x - 0.1).collect();
        let t = paired_t(&a, &b, 0.05).unwrap();
        assert!(t.t.is_infinite() && t.t > 0.0 && t.significant);

        // differences 0.01, -0.01, 0.02, -0.02, 0: mean 0 so t = 0
        let d = [0.01, -0.01, 0.02, -0.02, 0.0];
        let t = paired_t(&d, &[0.0; 5], 0.05).unwrap();
        assert!(t.t.abs() < 1e-15 && !t.significant);

        // differences 1, 2, 3, 4: mean 2.5, sd sqrt(5/3), t = 2.5 / sqrt(5/12)
        let t = paired_t(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4], 0.05).unwrap();
        assert!((t.t - 2.5 / (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert!(t.significant); // 3.873 > 3.182
        assert!(paired_t(&[1.0], &[0.0], 0.05).is_err());
        assert!(paired_t(&[1.0, 2.0], &[0.0, 0.0], 0.2).is_err());
    }

    #[test]
    fn critical_values() {
        assert_eq!(t_critical(19, 0.05).unwrap(), 2.093);
        assert_eq!(t_critical(1, 0.01).unwrap(), 63.657);
        assert_eq!(t_critical(100, 0.05).unwrap(), 2.042);
    }

    fn lit(i: usize, v: bool) -> Literal {
        Literal::is(Var::Input(i), v)
    }

    #[test]
    fn complexity_counts() {
        let t = |l: &[Literal]| Term::from_literals(l.iter().copied()).unwrap();
        let rs = Ruleset {
            classes: vec!["0".into(), "1".into()],
            input_names: (0..5).map(|i| format!("x{i}")).collect(),
            rules: vec![
                Dnf::from_terms([t(&[lit(0, false), lit(1, false)]), t(&[lit(0, true), lit(2, false)])]),
                Dnf::from_terms([
                    t(&[lit(0, true), lit(1, false)]),
                    t(&[lit(0, false), lit(2, true)]),
                    t(&[lit(3, false), lit(4, true)]),
                ]),
            ],
            priority: vec![0, 0],
            default_class: 0,
        };
        assert_eq!(
            rule_complexity(&rs),
            Complexity {
                classes: 2,
                terms: 5,
                literals: 10
            }
        );
        let top = Ruleset {
            rules: vec![Dnf::verum(), Dnf::falsum()],
            ..rs
        };
        assert_eq!(
            rule_complexity(&top),
            Complexity {
                classes: 1,
                terms: 1,
                literals: 0
            }
        );
    }

    fn record(repeat: usize, fold: usize, h: f64, c: f64) -> RunRecord {
        let mut scores = BTreeMap::new();
        scores.insert(
            Method::Heretic,
            Score {
                accuracy: h,
                fidelity: Some(1.0),
            },
        );
        scores.insert(
            Method::C45,
            Score {
                accuracy: c,
                fidelity: None,
            },
        );
        RunRecord {
            repeat,
            fold,
            seed: 0,
            scores,
            rules: Some(Complexity {
                classes: 2,
                terms: 3,
                literals: 4,
            }),
            substituted: None,
            cascade_agreement: Some(1.0),
            unsaturated: None,
            warnings: vec![],
            timings: vec![("train".into(), 0.5)],
        }
    }

    #[test]
    fn report_round_trip_and_text() {
        let records = vec![
            record(0, 0, 1.0, 0.7),
            record(0, 1, 0.9, 0.8),
            record(1, 0, 0.95, 0.75),
            record(1, 1, 0.95, 0.7),
        ];
        let rep = Report::from_records("monks-2", serde_json::json!({"seed": 1}), records, 0.05, vec![]).unwrap();
        assert_eq!((rep.repeats, rep.folds), (2, 2));
        let h = rep.method(Method::Heretic).unwrap();
        assert!((h.accuracy.mean - 0.95).abs() < 1e-12);
        assert_eq!(h.accuracy.std, 0.0);
        let json = rep.to_json().unwrap();
        assert!(!json.contains("timings"));
        let back = Report::from_json(&json).unwrap();
        let mut expected = rep.clone();
        for r in &mut expected.records {
            r.timings.clear();
        }
        assert_eq!(back, expected);
        let text = rep.to_text();
        assert!(text.contains("HERETIC"));
        assert!(text.contains("FERNN"));
        assert!(text.contains("Paired t (accuracy, HERETIC vs C4.5)"));
    }

    proptest! {
        #[test]
        fn metrics_are_order_free(pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..50), rot in 0usize..50) {
            let (a, b): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let k = rot % a.len();
            let mut ra = a.clone(); ra.rotate_left(k);
            let mut rb = b.clone(); rb.rotate_left(k);
            prop_assert_eq!(accuracy(&a, &b).unwrap(), accuracy(&ra, &rb).unwrap());
            prop_assert_eq!(fidelity(&a, &b).unwrap(), fidelity(&b, &a).unwrap());
        }

        #[test]
        fn perfect_fidelity_means_equal_accuracy(net in proptest::collection::vec(0usize..3, 1..50), truth_seed in any::<u64>()) {
            let truth: Vec<usize> = net.iter().enumerate().map(|(i, _)| ((truth_seed >> (i % 64)) & 1) as usize).collect();
            let rules = net.clone();
            prop_assert_eq!(fidelity(&rules, &net).unwrap(), 1.0);
            prop_assert_eq!(accuracy(&rules, &truth).unwrap(), accuracy(&net, &truth).unwrap());
        }

        #[test]
        fn summaries_recompute(vals in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..25)) {
            let records: Vec<RunRecord> = vals.iter().enumerate().map(|(i, &(h, c))| record(i, 0, h, c)).collect();
            let rep = Report::from_records("x", serde_json::Value::Null, records, 0.05, vec![]).unwrap();
            let h: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let s = rep.method(Method::Heretic).unwrap().accuracy;
            let mean = h.iter().sum::<f64>() / h.len() as f64;
            prop_assert!((s.mean - mean).abs() < 1e-12);
            prop_assert!(s.std >= 0.0 && s.min <= s.mean + 1e-12 && s.mean <= s.max + 1e-12);
        }
    }
}
