use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind, FeatureSpec};
use crate::error::{Error, Result};

/// Integer-valued columns with at most this many distinct values are nominal.
const MAX_INTEGER_NOMINAL_VALUES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

impl std::str::FromStr for ClassColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s == "last" {
            Ok(ClassColumn::Last)
        } else if let Ok(i) = s.parse() {
            Ok(ClassColumn::Index(i))
        } else {
            Ok(ClassColumn::Name(s.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub has_header: bool,
    pub class_column: ClassColumn,
    pub delimiter: char,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            class_column: ClassColumn::Last,
            delimiter: ',',
        }
    }
}

/// Explicit feature kinds keyed by column name; anything not listed is inferred.
pub type SchemaOverride = BTreeMap<String, FeatureKind>;

/// A CSV file split into feature columns and the class column, all as text.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub records: Vec<Vec<String>>,
    pub labels: Vec<String>,
}

impl RawTable {
    pub fn read(path: &Path, opts: &CsvOptions) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RawTable::parse(&text, opts)
    }

    pub fn parse(text: &str, opts: &CsvOptions) -> Result<Self> {
        if !opts.delimiter.is_ascii() {
            return Err(Error::Config(format!("delimiter {:?} is not ASCII", opts.delimiter)));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .delimiter(opts.delimiter as u8)
            .from_reader(text.as_bytes());

        let mut rows: Vec<Vec<String>> = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            rows.push(record.iter().map(str::to_string).collect());
        }

        let header = if opts.has_header && !rows.is_empty() {
            Some(rows.remove(0))
        } else {
            None
        };
        if rows.is_empty() {
            return Err(Error::NoInstances);
        }
        let width = header.as_ref().map_or(rows[0].len(), Vec::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: width,
                    found: row.len(),
                });
            }
        }
        if width < 2 {
            return Err(Error::InvalidDataset(
                "need at least one feature column and a class column".into(),
            ));
        }
        let names: Vec<String> = header.unwrap_or_else(|| (0..width).map(|i| format!("col{i}")).collect());

        let class_idx = match &opts.class_column {
            ClassColumn::Last => width - 1,
            ClassColumn::Index(i) if *i < width => *i,
            ClassColumn::Index(i) => {
                return Err(Error::Config(format!(
                    "class column {i} out of range for {width} columns"
                )))
            }
            ClassColumn::Name(n) => names
                .iter()
                .position(|c| c == n)
                .ok_or_else(|| Error::Config(format!("class column {n:?} not found in header")))?,
        };

        let mut records = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (r, mut row) in rows.into_iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if is_missing(v) {
                    return Err(Error::MissingValue {
                        row: r,
                        column: names[c].clone(),
                    });
                }
            }
            labels.push(row.remove(class_idx));
            records.push(row);
        }
        let mut feature_names = names;
        feature_names.remove(class_idx);
        Ok(RawTable {
            feature_names,
            records,
            labels,
        })
    }

    fn column(&self, c: usize) -> impl Iterator<Item = &str> {
        self.records.iter().map(move |r| r[c].as_str())
    }
}

fn is_missing(v: &str) -> bool {
    v.is_empty() || v == "?"
}

/// Ascending numeric order when every value parses as a number, else lexicographic.
fn sorted_values<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let distinct: BTreeSet<&str> = values.collect();
    let mut out: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    let numeric: Option<Vec<f64>> = out.iter().map(|v| v.parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(out).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        out = paired.into_iter().map(|(_, s)| s).collect();
    }
    out
}

/// Infers one [`FeatureSpec`] per column over all `tables`, which must share
/// a header. Returns the schema and the ordered class list.
///
/// A column is nominal if any value is non-numeric or if it is integer
/// valued with at most five distinct values; integer columns using only
/// `0`/`1` are binary; everything else is real.
pub fn infer_schema(tables: &[&RawTable], overrides: &SchemaOverride) -> Result<(Vec<FeatureSpec>, Vec<String>)> {
    let first = tables.first().ok_or(Error::NoInstances)?;
    for t in &tables[1..] {
        if t.feature_names != first.feature_names {
            return Err(Error::Schema("tables have different columns".into()));
        }
    }
    for name in overrides.keys() {
        if !first.feature_names.contains(name) {
            return Err(Error::Schema(format!("schema override names unknown column {name:?}")));
        }
    }

    let mut schema = Vec::with_capacity(first.feature_names.len());
    for (c, name) in first.feature_names.iter().enumerate() {
        let values = || tables.iter().flat_map(move |t| t.column(c));
        let kind = match overrides.get(name) {
            Some(FeatureKind::Nominal { values: declared }) if declared.is_empty() => FeatureKind::Nominal {
                values: sorted_values(values()),
            },
            Some(FeatureKind::Real { .. }) => real_range(name, values())?,
            Some(kind) => kind.clone(),
            None => infer_kind(name, values)?,
        };
        schema.push(FeatureSpec {
            name: name.clone(),
            kind,
            one_hot: None,
        });
    }
    let classes = sorted_values(tables.iter().flat_map(|t| t.labels.iter().map(String::as_str)));
    Ok((schema, classes))
}

fn infer_kind<'a, I>(name: &str, values: impl Fn() -> I) -> Result<FeatureKind>
where
    I: Iterator<Item = &'a str>,
{
    let numeric: Option<Vec<f64>> = values().map(|v| v.parse::<f64>().ok()).collect();
    let Some(nums) = numeric else {
        return Ok(FeatureKind::Nominal {
            values: sorted_values(values()),
        });
    };
    let integral = nums.iter().all(|v| v.fract() == 0.0);
    if integral {
        if nums.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Ok(FeatureKind::Binary);
        }
        let distinct: BTreeSet<i64> = nums.iter().map(|&v| v as i64).collect();
        if distinct.len() <= MAX_INTEGER_NOMINAL_VALUES {
            return Ok(FeatureKind::Nominal {
                values: sorted_values(values()),
            });
        }
    }
    real_range(name, values())
}

fn real_range<'a>(name: &str, values: impl Iterator<Item = &'a str>) -> Result<FeatureKind> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (row, v) in values.enumerate() {
        let x = parse_real(name, row, v)?;
        min = min.min(x);
        max = max.max(x);
    }
    Ok(FeatureKind::Real { min, max })
}

fn parse_real(feature: &str, row: usize, v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::NotNumeric {
            row,
            feature: feature.to_string(),
            value: v.to_string(),
        }),
    }
}

impl Dataset {
    /// Converts a raw table into an unencoded dataset under a fixed schema
    /// and class list, rejecting values the schema does not allow.
    pub fn from_table(table: &RawTable, schema: &[FeatureSpec], classes: &[String]) -> Result<Self> {
        if table.feature_names.len() != schema.len() {
            return Err(Error::Dimension {
                expected: schema.len(),
                found: table.feature_names.len(),
            });
        }
        let mut rows = Vec::with_capacity(table.records.len());
        for (r, record) in table.records.iter().enumerate() {
            let mut row = Vec::with_capacity(schema.len());
            for (spec, v) in schema.iter().zip(record) {
                let x = match &spec.kind {
                    FeatureKind::Nominal { values } => {
                        values
                            .iter()
                            .position(|s| s == v)
                            .ok_or_else(|| Error::UnknownNominal {
                                row: r,
                                feature: spec.name.clone(),
                                value: v.clone(),
                            })? as f64
                    }
                    FeatureKind::Binary => match parse_real(&spec.name, r, v)? {
                        b if b == 0.0 || b == 1.0 => b,
                        _ => {
                            return Err(Error::UnknownNominal {
                                row: r,
                                feature: spec.name.clone(),
                                value: v.clone(),
                            })
                        }
                    },
                    FeatureKind::Real { .. } => parse_real(&spec.name, r, v)?,
                };
                row.push(x);
            }
            rows.push(row);
        }
        let labels = table
            .labels
            .iter()
            .enumerate()
            .map(|(r, l)| {
                classes
                    .iter()
                    .position(|c| c == l)
                    .ok_or_else(|| Error::UnknownNominal {
                        row: r,
                        feature: "class".into(),
                        value: l.clone(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(schema.to_vec(), rows, labels, classes.to_vec(), false)
    }
}

/// Loads one CSV file with an inferred (optionally overridden) schema.
pub fn load_dataset(path: &Path, opts: &CsvOptions, overrides: &SchemaOverride) -> Result<Dataset> {
    let table = RawTable::read(path, opts)?;
    let (schema, classes) = infer_schema(&[&table], overrides)?;
    Dataset::from_table(&table, &schema, &classes)
}

/// Parses a schema override file:
///
/// ```toml
/// [features]
/// age = "real"
/// smoker = "binary"
/// colour = ["red", "green", "blue"]
/// grade = "nominal"          # values taken from the data
/// ```
pub fn parse_schema_override(text: &str) -> Result<SchemaOverride> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Kind(String),
        Values(Vec<String>),
    }
    #[derive(Deserialize)]
    struct File {
        #[serde(default)]
        features: BTreeMap<String, Entry>,
    }
    let file: File = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    file.features
        .into_iter()
        .map(|(name, entry)| {
            let kind = match entry {
                Entry::Values(values) => FeatureKind::Nominal { values },
                Entry::Kind(k) => match k.as_str() {
                    "binary" => FeatureKind::Binary,
                    "nominal" => FeatureKind::Nominal { values: vec![] },
                    "real" => FeatureKind::Real { min: 0.0, max: 0.0 },
                    other => return Err(Error::Schema(format!("feature {name:?}: unknown kind {other:?}"))),
                },
            };
            Ok((name, kind))
        })
        .collect()
}
