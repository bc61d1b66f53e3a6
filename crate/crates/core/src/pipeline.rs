//! End-to-end experiments: load data, train the network, extract rules,
//! run the baselines and assemble a report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{c45_direct, trepan_lite};
use crate::dataset::{
    infer_schema, parse_schema_override, stratified_kfold, train_prune_split, ClassColumn, CsvOptions, Dataset,
    Encoder, RawTable, SchemaOverride,
};
use crate::error::{Error, Result};
use crate::eval::{accuracy, fidelity, rule_complexity, Method, Report, RunRecord, Score};
use crate::extract::{cascade_agreement, extract, ExtractConfig, Extraction};
use crate::network::{Network, NetworkConfig};
use crate::rules::Ruleset;
use crate::sampler::{unsaturated_fraction, SATURATION_BAND, SATURATION_WARNING};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Training CSV, or the whole dataset in k-fold mode.
    pub train: PathBuf,
    /// Test CSV; when present the split is fixed and `split.folds` is unused.
    pub test: Option<PathBuf>,
    /// Schema override TOML.
    pub schema: Option<PathBuf>,
    pub has_header: bool,
    /// `"last"`, a column index, or a header name.
    pub class_column: String,
    pub delimiter: char,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: PathBuf::new(),
            test: None,
            schema: None,
            has_header: true,
            class_column: "last".into(),
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub folds: usize,
    /// Share of each training set held out for pruning trees.
    pub prune_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            folds: 10,
            prune_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub repeats: usize,
    /// Drives every random choice; `network.seed` is replaced per run.
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Significance level of the paired t-tests.
    pub alpha: f64,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub network: NetworkConfig,
    pub extract: ExtractConfig,
    pub output: OutputConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            repeats: 20,
            seed: 1,
            methods: vec![Method::Heretic, Method::C45, Method::TrepanLite],
            alpha: 0.05,
            data: DataConfig::default(),
            split: SplitConfig::default(),
            network: NetworkConfig::default(),
            extract: ExtractConfig::default(),
            output: OutputConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if !(self.split.prune_fraction > 0.0 && self.split.prune_fraction < 1.0) {
            return Err(Error::Config(format!(
                "prune_fraction must be in (0, 1), got {}",
                self.split.prune_fraction
            )));
        }
        if self.data.test.is_none() && self.split.folds < 2 {
            return Err(Error::Config("k-fold mode needs folds >= 2".into()));
        }
        crate::eval::t_critical(1, self.alpha).map_err(|e| Error::Config(e.to_string()))?;
        self.network.validate()?;
        if self.extract.max_terms == 0 {
            return Err(Error::Config("max_terms must be positive".into()));
        }
        if self.data.train.as_os_str().is_empty() {
            return Err(Error::Config("data.train is not set".into()));
        }
        for p in [
            Some(&self.data.train),
            self.data.test.as_ref(),
            self.data.schema.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            let full = self.resolve(p);
            if !full.exists() {
                return Err(Error::Config(format!("{} does not exist", full.display())));
            }
        }
        Ok(())
    }

    pub fn csv_options(&self) -> Result<CsvOptions> {
        Ok(CsvOptions {
            has_header: self.data.has_header,
            class_column: self.data.class_column.parse::<ClassColumn>()?,
            delimiter: self.data.delimiter,
        })
    }

    fn overrides(&self) -> Result<SchemaOverride> {
        match &self.data.schema {
            Some(p) => {
                let path = self.resolve(p);
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                parse_schema_override(&text)
            }
            None => Ok(SchemaOverride::new()),
        }
    }

    /// Raw (unencoded) train and optional test sets sharing one schema.
    pub fn load_data(&self) -> Result<(Dataset, Option<Dataset>)> {
        let opts = self.csv_options()?;
        let overrides = self.overrides()?;
        let train = RawTable::read(&self.resolve(&self.data.train), &opts)?;
        match &self.data.test {
            Some(p) => {
                let test = RawTable::read(&self.resolve(p), &opts)?;
                let (schema, classes) = infer_schema(&[&train, &test], &overrides)?;
                Ok((
                    Dataset::from_table(&train, &schema, &classes)?,
                    Some(Dataset::from_table(&test, &schema, &classes)?),
                ))
            }
            None => {
                let (schema, classes) = infer_schema(&[&train], &overrides)?;
                Ok((Dataset::from_table(&train, &schema, &classes)?, None))
            }
        }
    }
}

/// Seed for one (repeat, fold) cell.
pub fn run_seed(seed: u64, repeat: usize, fold: usize) -> u64 {
    let mut z = seed
        ^ (repeat as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (fold as u64 + 1).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A trained network together with the encoding it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format: String,
    pub version: u32,
    pub encoder: Encoder,
    pub network: Network,
}

const MODEL_FORMAT: &str = "heretic-model";
const MODEL_VERSION: u32 = 1;

impl Model {
    pub fn new(encoder: Encoder, network: Network) -> Result<Self> {
        if network.input_width() != encoder.schema().len() || network.output_width() != encoder.classes().len() {
            return Err(Error::Dimension {
                expected: encoder.schema().len(),
                found: network.input_width(),
            });
        }
        Ok(Model {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            encoder,
            network,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Model = serde_json::from_str(text)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model file {:?} v{}",
                m.format, m.version
            )));
        }
        m.network.check_dimensions()?;
        Model::new(m.encoder, m.network)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub repeat: usize,
    pub fold: usize,
    pub stage: String,
    pub seconds: f64,
}

/// Artifacts kept from the first run (repeat 0, fold 0) plus the report.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: Report,
    pub model: Model,
    pub ruleset: Option<Ruleset>,
    pub substituted: Option<Ruleset>,
    pub timings: Vec<Timing>,
}

struct RunOutput {
    record: RunRecord,
    model: Model,
    extraction: Option<Extraction>,
}

/// Fits the encoder on `raw_train` and trains a network on all of it.
fn fit_model(raw_train: &Dataset, net_cfg: &NetworkConfig) -> Result<(Model, Dataset)> {
    let encoder = Encoder::fit(raw_train).map_err(|e| e.in_stage("encode"))?;
    let train = encoder.transform(raw_train).map_err(|e| e.in_stage("encode"))?;
    let net =
        Network::train(&train.rows, &train.labels, train.classes.len(), net_cfg).map_err(|e| e.in_stage("train"))?;
    Ok((Model::new(encoder, net)?, train))
}

/// Splits an encoded training set into tree-growing and pruning parts.
pub fn grow_prune(train: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let idx: Vec<usize> = (0..train.len()).collect();
    let (g, p) = train_prune_split(&idx, &train.labels, fraction, seed)?;
    Ok((train.subset(&g), train.subset(&p)))
}

fn run_one(
    cfg: &ExperimentConfig,
    raw_train: &Dataset,
    raw_test: &Dataset,
    repeat: usize,
    fold: usize,
) -> Result<RunOutput> {
    let seed = run_seed(cfg.seed, repeat, fold);
    let mut timings = Vec::new();
    let mut warnings = Vec::new();
    let clock = Instant::now();
    let net_cfg = NetworkConfig {
        seed,
        ..cfg.network.clone()
    };
    let (model, train) = fit_model(raw_train, &net_cfg)?;
    timings.push(("train".to_string(), clock.elapsed().as_secs_f64()));
    warnings.extend(model.encoder.warnings.iter().cloned());
    let test = model.encoder.transform(raw_test).map_err(|e| e.in_stage("encode"))?;
    let net = &model.network;
    let (grow, prune) = grow_prune(&train, cfg.split.prune_fraction, seed)?;

    let unsaturated = unsaturated_fraction(net, &train.rows)?;
    if unsaturated > SATURATION_WARNING {
        warnings.push(format!(
            "more than {}% of activations lie inside {:?}; binarised samples may not reflect the network",
            100.0 * SATURATION_WARNING,
            SATURATION_BAND
        ));
    }

    let net_test = net.predict_all(&test.rows)?;
    let mut scores = BTreeMap::new();
    scores.insert(
        Method::Network,
        Score {
            accuracy: accuracy(&net_test, &test.labels)?,
            fidelity: None,
        },
    );
    let mut record = RunRecord {
        repeat,
        fold,
        seed,
        scores: BTreeMap::new(),
        rules: None,
        substituted: None,
        cascade_agreement: None,
        unsaturated: Some(unsaturated),
        warnings: Vec::new(),
        timings: Vec::new(),
    };

    let mut extraction = None;
    if cfg.methods.contains(&Method::Heretic) {
        let ex = extract(net, &grow, &prune, &cfg.extract)?;
        let pred = ex.minimized.predict_all(&test.rows)?;
        scores.insert(
            Method::Heretic,
            Score {
                accuracy: accuracy(&pred, &test.labels)?,
                fidelity: Some(fidelity(&pred, &net_test)?),
            },
        );
        record.rules = Some(rule_complexity(&ex.minimized));
        record.substituted = Some(rule_complexity(&ex.substituted));
        let all_rows: Vec<Vec<f64>> = train.rows.iter().chain(&test.rows).cloned().collect();
        record.cascade_agreement = Some(cascade_agreement(&ex, &all_rows)?);
        timings.extend(ex.timings.iter().cloned());
        warnings.extend(ex.warnings.iter().cloned());
        extraction = Some(ex);
    }
    if cfg.methods.contains(&Method::C45) {
        let clock = Instant::now();
        let (pred, _) = c45_direct(&grow, &prune, &test, cfg.extract.min_leaf).map_err(|e| e.in_stage("c45"))?;
        scores.insert(
            Method::C45,
            Score {
                accuracy: accuracy(&pred, &test.labels)?,
                fidelity: Some(fidelity(&pred, &net_test)?),
            },
        );
        timings.push(("c45".to_string(), clock.elapsed().as_secs_f64()));
    }
    if cfg.methods.contains(&Method::TrepanLite) {
        let clock = Instant::now();
        let t = trepan_lite(net, &grow, &prune, &test, cfg.extract.min_leaf).map_err(|e| e.in_stage("trepan_lite"))?;
        scores.insert(
            Method::TrepanLite,
            Score {
                accuracy: accuracy(&t.predictions, &test.labels)?,
                fidelity: Some(t.fidelity),
            },
        );
        timings.push(("trepan_lite".to_string(), clock.elapsed().as_secs_f64()));
    }
    record.scores = scores;
    record.warnings = warnings;
    record.timings = timings;
    Ok(RunOutput {
        record,
        model,
        extraction,
    })
}

/// Runs every (repeat, fold) cell in parallel; results depend only on the
/// configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (raw, raw_test) = cfg.load_data()?;
    let cells: Vec<(usize, usize, Dataset, Dataset)> = match raw_test {
        Some(test) => (0..cfg.repeats).map(|r| (r, 0, raw.clone(), test.clone())).collect(),
        None => {
            let mut cells = Vec::new();
            for r in 0..cfg.repeats {
                let plan = stratified_kfold(&raw, cfg.split.folds, cfg.seed.wrapping_add(r as u64))?;
                for f in 0..cfg.split.folds {
                    let (tr, te) = plan.train_test(f);
                    cells.push((r, f, raw.subset(&tr), raw.subset(&te)));
                }
            }
            cells
        }
    };
    let mut outputs: Vec<RunOutput> = cells
        .par_iter()
        .map(|(r, f, tr, te)| run_one(cfg, tr, te, *r, *f))
        .collect::<Result<_>>()?;
    outputs.sort_by_key(|o| (o.record.repeat, o.record.fold));

    let timings: Vec<Timing> = outputs
        .iter()
        .flat_map(|o| {
            o.record.timings.iter().map(|(stage, seconds)| Timing {
                repeat: o.record.repeat,
                fold: o.record.fold,
                stage: stage.clone(),
                seconds: *seconds,
            })
        })
        .collect();
    let warnings = summarise_warnings(&outputs.iter().map(|o| &o.record).collect::<Vec<_>>());
    let mut outputs = outputs.into_iter();
    let first = outputs.next().ok_or(Error::NoInstances)?;
    let records: Vec<RunRecord> = std::iter::once(first.record.clone())
        .chain(outputs.map(|o| o.record))
        .collect();

    let config = serde_json::to_value(cfg)?;
    let report = Report::from_records(cfg.name.clone(), config, records, cfg.alpha, warnings)?;
    Ok(ExperimentOutput {
        report,
        model: first.model,
        ruleset: first.extraction.as_ref().map(|e| e.minimized.clone()),
        substituted: first.extraction.map(|e| e.substituted),
        timings,
    })
}

/// Collapses per-run warnings into "N of M runs: message" lines.
fn summarise_warnings(records: &[&RunRecord]) -> Vec<String> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        let mut seen = r.warnings.clone();
        seen.sort();
        seen.dedup();
        for w in seen {
            *counts.entry(w).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(w, n)| format!("{n} of {} run(s): {w}", records.len()))
        .collect()
}

/// Writes `report.json`, `report.txt`, `rules.txt`, `rules.json`,
/// `model.json` and `timings.tsv` into `dir`.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("report.json", out.report.to_json()?)?;
    write("report.txt", out.report.to_text())?;
    if let Some(rs) = &out.ruleset {
        write("rules.txt", rs.to_text())?;
        write("rules.json", rs.to_json()?)?;
    }
    write("model.json", out.model.to_json()?)?;
    let mut tsv = String::from("repeat\tfold\tstage\tseconds\n");
    for t in &out.timings {
        writeln!(tsv, "{}\t{}\t{}\t{:.6}", t.repeat, t.fold, t.stage, t.seconds).unwrap();
    }
    write("timings.tsv", tsv)
}

/// Trains the first run's network on the configured training data.
pub fn train_only(cfg: &ExperimentConfig) -> Result<Model> {
    cfg.validate()?;
    let (raw, _) = cfg.load_data()?;
    let net_cfg = NetworkConfig {
        seed: run_seed(cfg.seed, 0, 0),
        ..cfg.network.clone()
    };
    Ok(fit_model(&raw, &net_cfg)?.0)
}

/// Extraction without training, on a saved model and a CSV with the model's columns.
pub fn extract_only(model: &Model, data: &Path, cfg: &ExperimentConfig) -> Result<Extraction> {
    let opts = cfg.csv_options()?;
    let table = RawTable::read(data, &opts)?;
    let mismatch = |e: Error| match e {
        Error::Dimension { expected, found } => Error::Schema(format!(
            "data does not fit the model: expected {expected} columns, found {found}"
        )),
        e => e,
    };
    let raw = Dataset::from_table(&table, model.encoder.source_schema(), model.encoder.classes()).map_err(mismatch)?;
    let encoded = model.encoder.transform(&raw).map_err(mismatch)?;
    if encoded.width() != model.network.input_width() {
        return Err(mismatch(Error::Dimension {
            expected: model.network.input_width(),
            found: encoded.width(),
        }));
    }
    let (grow, prune) = grow_prune(&encoded, cfg.split.prune_fraction, run_seed(cfg.seed, 0, 0))?;
    extract(&model.network, &grow, &prune, &cfg.extract)
}
