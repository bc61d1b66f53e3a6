//! Tabular classification data: loading, one-hot/min-max encoding and
//! stratified splitting.

mod encode;
mod load;
pub mod monks;
mod split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{encode, Encoder};
pub use load::{infer_schema, load_dataset, parse_schema_override, ClassColumn, CsvOptions, RawTable, SchemaOverride};
pub use split::{stratified_kfold, train_prune_split, SplitPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Binary,
    Nominal { values: Vec<String> },
    Real { min: f64, max: f64 },
}

/// Which nominal feature and value an encoded one-hot column stands for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OneHotSource {
    pub feature: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_hot: Option<OneHotSource>,
}

impl FeatureSpec {
    pub fn binary(name: impl Into<String>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Binary,
            one_hot: None,
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Nominal {
                values: values.into_iter().map(Into::into).collect(),
            },
            one_hot: None,
        }
    }

    pub fn real(name: impl Into<String>, min: f64, max: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Real { min, max },
            one_hot: None,
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self.kind, FeatureKind::Real { .. })
    }

    /// Number of columns this feature occupies once encoded.
    pub fn encoded_width(&self) -> usize {
        match &self.kind {
            FeatureKind::Nominal { values } => values.len(),
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            FeatureKind::Nominal { values } => {
                if values.is_empty() {
                    return Err(Error::Schema(format!("nominal feature {:?} has no values", self.name)));
                }
                let mut seen = std::collections::HashSet::new();
                for v in values {
                    if !seen.insert(v) {
                        return Err(Error::Schema(format!(
                            "nominal feature {:?} lists {v:?} twice",
                            self.name
                        )));
                    }
                }
            }
            FeatureKind::Real { min, max } => {
                if !(min.is_finite() && max.is_finite()) || min > max {
                    return Err(Error::Schema(format!(
                        "real feature {:?} has invalid range [{min}, {max}]",
                        self.name
                    )));
                }
            }
            FeatureKind::Binary => {}
        }
        Ok(())
    }
}

/// A labelled table of instances.
///
/// Before encoding, nominal values are stored as indices into the feature's
/// value list and real values are raw. After [`encode`] every column is a
/// binary indicator or a real value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Vec<FeatureSpec>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
    pub encoded: bool,
}

impl Dataset {
    pub fn new(
        schema: Vec<FeatureSpec>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        classes: Vec<String>,
        encoded: bool,
    ) -> Result<Self> {
        let ds = Dataset {
            schema,
            rows,
            labels,
            classes,
            encoded,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::NoInstances);
        }
        if self.classes.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "at least 2 classes required, found {}",
                self.classes.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.classes.iter().find(|c| !seen.insert(*c)) {
            return Err(Error::InvalidDataset(format!("class {dup:?} listed twice")));
        }
        if self.labels.len() != self.rows.len() {
            return Err(Error::Dimension {
                expected: self.rows.len(),
                found: self.labels.len(),
            });
        }
        for spec in &self.schema {
            spec.validate()?;
        }
        let width = self.schema.len();
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: width,
                    found: row.len(),
                });
            }
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.classes.len()) {
            return Err(Error::InvalidDataset(format!("label index {bad} has no class")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.schema.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.schema.iter().map(|f| f.name.clone()).collect()
    }

    /// Instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes.clone(),
            encoded: self.encoded,
        }
    }

    /// Same instances with `labels` replaced, e.g. by a network's predictions.
    pub fn relabel(&self, labels: Vec<usize>) -> Result<Dataset> {
        if labels.len() != self.rows.len() {
            return Err(Error::Dimension {
                expected: self.rows.len(),
                found: labels.len(),
            });
        }
        Ok(Dataset { labels, ..self.clone() })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Most frequent class, lowest index on ties.
    pub fn majority_class(&self) -> usize {
        majority(&self.class_counts())
    }
}

/// Index of the largest count, lowest index on ties.
pub fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    best
}
