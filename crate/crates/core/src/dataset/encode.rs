use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind, FeatureSpec, OneHotSource};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Column {
    Copy { source: usize },
    OneHot { source: usize, value: usize },
    Scale { source: usize, min: f64, max: f64 },
}

/// One-hot and min-max encoding fitted on one dataset (the training fold)
/// and applied unchanged to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    source: Vec<FeatureSpec>,
    classes: Vec<String>,
    columns: Vec<Column>,
    schema: Vec<FeatureSpec>,
    /// Features dropped while fitting, e.g. constant real columns.
    pub warnings: Vec<String>,
}

impl Encoder {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.encoded {
            return Err(Error::InvalidArgument("dataset is already encoded".into()));
        }
        ds.validate()?;
        let mut columns = Vec::new();
        let mut schema = Vec::new();
        let mut warnings = Vec::new();
        for (f, spec) in ds.schema.iter().enumerate() {
            match &spec.kind {
                FeatureKind::Binary => {
                    columns.push(Column::Copy { source: f });
                    schema.push(FeatureSpec::binary(spec.name.clone()));
                }
                FeatureKind::Nominal { values } => {
                    for (v, value) in values.iter().enumerate() {
                        columns.push(Column::OneHot { source: f, value: v });
                        schema.push(FeatureSpec {
                            name: format!("{}={}", spec.name, value),
                            kind: FeatureKind::Binary,
                            one_hot: Some(OneHotSource {
                                feature: spec.name.clone(),
                                value: value.clone(),
                            }),
                        });
                    }
                }
                FeatureKind::Real { .. } => {
                    let (min, max) = ds
                        .rows
                        .iter()
                        .map(|r| r[f])
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
                    if min < max {
                        columns.push(Column::Scale { source: f, min, max });
                        schema.push(FeatureSpec::real(spec.name.clone(), 0.0, 1.0));
                    } else {
                        let msg = format!("dropped constant real feature {:?} (value {min})", spec.name);
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                }
            }
        }
        Ok(Encoder {
            source: ds.schema.clone(),
            classes: ds.classes.clone(),
            columns,
            schema,
            warnings,
        })
    }

    /// Schema of the encoded columns.
    pub fn schema(&self) -> &[FeatureSpec] {
        &self.schema
    }

    /// Schema of the raw features this encoder expects.
    pub fn source_schema(&self) -> &[FeatureSpec] {
        &self.source
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.encoded {
            return Err(Error::InvalidArgument("dataset is already encoded".into()));
        }
        if ds.schema.len() != self.source.len()
            || ds
                .schema
                .iter()
                .zip(&self.source)
                .any(|(a, b)| a.name != b.name || std::mem::discriminant(&a.kind) != std::mem::discriminant(&b.kind))
        {
            return Err(Error::Schema("dataset schema does not match the encoder".into()));
        }
        if ds.classes != self.classes {
            return Err(Error::Schema("dataset classes do not match the encoder".into()));
        }
        let rows = ds.rows.iter().map(|r| self.encode_row(r)).collect();
        Dataset::new(self.schema.clone(), rows, ds.labels.clone(), ds.classes.clone(), true)
    }

    fn encode_row(&self, row: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| match *col {
                Column::Copy { source } => row[source],
                Column::OneHot { source, value } => {
                    if row[source] as usize == value {
                        1.0
                    } else {
                        0.0
                    }
                }
                Column::Scale { source, min, max } => ((row[source] - min) / (max - min)).clamp(0.0, 1.0),
            })
            .collect()
    }
}

/// Fits an [`Encoder`] on `ds` and applies it to `ds`.
pub fn encode(ds: &Dataset) -> Result<Dataset> {
    Encoder::fit(ds)?.transform(ds)
}
