//! Dataset ingestion, stratified splitting and persistence of models and
//! experiment results.
//!
//! Numbers are written in Rust's shortest round-trip decimal form, so every
//! file reloads to the identical `f64` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{BinaryModel, OvoEnsemble, Rule};
use crate::experiments::ExperimentResult;
use crate::stats::{AnchorPolicy, TrainStats, TrainingSet};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<String>,
    vocabulary: Vec<String>,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<String>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if let Some(((row, column), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, column });
        }
        let mut vocabulary: Vec<String> = Vec::new();
        for l in &labels {
            if !vocabulary.contains(l) {
                vocabulary.push(l.clone());
            }
        }
        Ok(Self {
            features: features.as_standard_layout().into_owned(),
            labels,
            vocabulary,
        })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Distinct labels in order of first appearance.
    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn rows_of(&self, label: &str) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn class_count(&self, label: &str) -> usize {
        self.labels.iter().filter(|l| *l == label).count()
    }

    /// Rows `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let labels: Vec<String> = idx.iter().map(|&i| self.labels[i].clone()).collect();
        Self::new(self.features.select(Axis(0), idx), labels).expect("subset of a valid dataset")
    }

    /// Feature matrix of one class.
    pub fn class_matrix(&self, label: &str) -> Array2<f64> {
        self.features.select(Axis(0), &self.rows_of(label))
    }

    pub fn with_labels(&self, labels: Vec<String>) -> Result<Self> {
        Self::new(self.features.clone(), labels)
    }
}

/// Which CSV column carries the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// A header name if one matches, otherwise a zero-based index.
    pub fn parse(s: &str) -> Self {
        LabelColumn::Name(s.to_string())
    }

    fn resolve(&self, headers: Option<&csv::StringRecord>, width: usize) -> Result<usize> {
        let by_index = |s: &str| s.parse::<usize>().ok().filter(|&i| i < width);
        let idx = match (self, headers) {
            (LabelColumn::Index(i), _) => Some(*i).filter(|&i| i < width),
            (LabelColumn::Name(name), Some(h)) => h.iter().position(|c| c == name).or_else(|| by_index(name)),
            (LabelColumn::Name(name), None) => by_index(name),
        };
        idx.ok_or_else(|| Error::Csv {
            row: 0,
            column: match self {
                LabelColumn::Name(n) => n.clone(),
                LabelColumn::Index(i) => i.to_string(),
            },
            message: "label column not found".into(),
        })
    }
}

struct Table {
    headers: Option<csv::StringRecord>,
    rows: Vec<csv::StringRecord>,
}

fn read_table<R: Read>(reader: R, has_header: bool) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = if has_header {
        Some(rdr.headers().map_err(csv_error)?.clone())
    } else {
        None
    };
    let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>().map_err(csv_error)?;
    Ok(Table { headers, rows })
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Csv {
            row,
            column: "*".into(),
            message: format!("ragged row: expected {expected_len} fields, found {len}"),
        },
        csv::ErrorKind::Io(err) => Error::Io {
            path: "<csv>".into(),
            source: err,
        },
        other => Error::Csv {
            row,
            column: "*".into(),
            message: format!("{other:?}"),
        },
    }
}

fn parse_features(table: &Table, skip: Option<usize>) -> Result<Array2<f64>> {
    let width = table
        .headers
        .as_ref()
        .map(|h| h.len())
        .or_else(|| table.rows.first().map(|r| r.len()))
        .unwrap_or(0);
    let d = width - skip.map_or(0, |_| 1);
    let mut data = Vec::with_capacity(table.rows.len() * d);
    for rec in &table.rows {
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        for (c, cell) in rec.iter().enumerate() {
            if Some(c) == skip {
                continue;
            }
            let column = table
                .headers
                .as_ref()
                .and_then(|h| h.get(c))
                .map(str::to_string)
                .unwrap_or_else(|| c.to_string());
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                row: line,
                column: column.clone(),
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row: line,
                    column,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(v);
        }
    }
    Array2::from_shape_vec((table.rows.len(), d), data).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_csv<R: Read>(reader: R, label: &LabelColumn, has_header: bool) -> Result<LabeledDataset> {
    let table = read_table(reader, has_header)?;
    let width = table
        .headers
        .as_ref()
        .map(|h| h.len())
        .or_else(|| table.rows.first().map(|r| r.len()))
        .unwrap_or(0);
    let col = label.resolve(table.headers.as_ref(), width)?;
    let features = parse_features(&table, Some(col))?;
    let labels = table.rows.iter().map(|r| r[col].to_string()).collect();
    LabeledDataset::new(features, labels)
}

pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn, has_header: bool) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file), label, has_header)
}

/// Features only, optionally dropping a label column.
pub fn load_features_csv(path: impl AsRef<Path>, drop: Option<&LabelColumn>, has_header: bool) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let table = read_table(BufReader::new(file), has_header)?;
    let width = table
        .headers
        .as_ref()
        .map(|h| h.len())
        .or_else(|| table.rows.first().map(|r| r.len()))
        .unwrap_or(0);
    let skip = drop.map(|l| l.resolve(table.headers.as_ref(), width)).transpose()?;
    parse_features(&table, skip)
}

/// Writes `x0..x{d-1},label` with a header row.
pub fn write_csv<W: Write>(writer: W, data: &LabeledDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..data.dim()).map(|k| format!("x{k}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_error)?;
    for (row, label) in data.features.outer_iter().zip(&data.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.clone());
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn save_csv(path: impl AsRef<Path>, data: &LabeledDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(BufWriter::new(file), data)
}

/// Round-half-down of `fraction * count`.
fn train_count(fraction: f64, count: usize) -> usize {
    let x = fraction * count as f64;
    let fl = x.floor();
    if x - fl > 0.5 {
        fl as usize + 1
    } else {
        fl as usize
    }
}

/// Per-class split: `round(fraction * N_c)` rows of each class go to the
/// training part, chosen uniformly without replacement. Both parts keep the
/// original row order.
pub fn stratified_split<R: Rng + ?Sized>(
    data: &LabeledDataset,
    fraction: f64,
    rng: &mut R,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction {fraction} not in (0, 1)")));
    }
    let mut in_train = vec![false; data.len()];
    for label in &data.vocabulary {
        let rows = data.rows_of(label);
        let k = train_count(fraction, rows.len());
        if rows.len() < 2 || k == 0 || k == rows.len() {
            return Err(Error::InsufficientSample {
                class: label.clone(),
                count: rows.len(),
                required: 2,
            });
        }
        for pick in rand::seq::index::sample(rng, rows.len(), k) {
            in_train[rows[pick]] = true;
        }
    }
    let train: Vec<usize> = (0..data.len()).filter(|&i| in_train[i]).collect();
    let test: Vec<usize> = (0..data.len()).filter(|&i| !in_train[i]).collect();
    Ok((data.subset(&train), data.subset(&test)))
}

#[derive(Debug, Serialize, Deserialize)]
struct BinaryDoc {
    format_version: u32,
    kind: String,
    rule: Rule,
    d: usize,
    m: usize,
    n: usize,
    label_f: String,
    label_g: String,
    #[serde(default)]
    anchor_policy: AnchorPolicy,
    class_f: Vec<Vec<f64>>,
    class_g: Vec<Vec<f64>>,
    stats: TrainStats,
}

#[derive(Debug, Serialize, Deserialize)]
struct OvoDoc {
    format_version: u32,
    kind: String,
    rule: Rule,
    labels: Vec<String>,
    rng_seed: u64,
    models: Vec<BinaryDoc>,
}

fn rows_of(a: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: &[Vec<f64>], d: usize, what: &str) -> Result<Array2<f64>> {
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Corrupted(format!("{what}: ragged rows or wrong dimension")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::Corrupted(e.to_string()))
}

impl BinaryDoc {
    fn from_model(model: &BinaryModel) -> Self {
        let ts = model.training();
        let (label_f, label_g) = model.labels();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            kind: "binary".into(),
            rule: model.rule(),
            d: ts.dim(),
            m: ts.m(),
            n: ts.n(),
            label_f: label_f.into(),
            label_g: label_g.into(),
            anchor_policy: model.policy(),
            class_f: rows_of(ts.class_f()),
            class_g: rows_of(ts.class_g()),
            stats: *model.stats(),
        }
    }

    fn into_model(self) -> Result<BinaryModel> {
        if self.class_f.len() != self.m || self.class_g.len() != self.n {
            return Err(Error::Corrupted("sample sizes disagree with m / n".into()));
        }
        let ts = TrainingSet::new(
            matrix(&self.class_f, self.d, "class_f")?,
            matrix(&self.class_g, self.d, "class_g")?,
        )
        .map_err(|e| Error::Corrupted(e.to_string()))?;
        BinaryModel::from_parts(self.rule, ts, self.stats, self.label_f, self.label_g, self.anchor_policy)
    }
}

/// A persisted model of either shape.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum SavedModel {
    Binary(BinaryModel),
    Ovo(OvoEnsemble),
}

impl SavedModel {
    pub fn dim(&self) -> usize {
        match self {
            SavedModel::Binary(m) => m.dim(),
            SavedModel::Ovo(e) => e.dim(),
        }
    }
}

pub fn model_to_json(model: &SavedModel) -> Result<String> {
    Ok(match model {
        SavedModel::Binary(m) => serde_json::to_string_pretty(&BinaryDoc::from_model(m))?,
        SavedModel::Ovo(e) => serde_json::to_string_pretty(&OvoDoc {
            format_version: MODEL_FORMAT_VERSION,
            kind: "ovo".into(),
            rule: e.rule(),
            labels: e.labels().to_vec(),
            rng_seed: e.rng_seed(),
            models: e.models().map(BinaryDoc::from_model).collect(),
        })?,
    })
}

pub fn model_from_json(text: &str) -> Result<SavedModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Format("missing format_version".into()))?;
    if version != MODEL_FORMAT_VERSION as u64 {
        return Err(Error::VersionMismatch {
            found: version.min(u32::MAX as u64) as u32,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("binary") => {
            let doc: BinaryDoc = serde_json::from_value(value)?;
            doc.into_model().map(SavedModel::Binary)
        }
        Some("ovo") => {
            let doc: OvoDoc = serde_json::from_value(value)?;
            let models = doc
                .models
                .into_iter()
                .map(|m| {
                    if m.format_version != MODEL_FORMAT_VERSION {
                        return Err(Error::VersionMismatch {
                            found: m.format_version,
                            expected: MODEL_FORMAT_VERSION,
                        });
                    }
                    m.into_model()
                })
                .collect::<Result<Vec<_>>>()?;
            OvoEnsemble::from_parts(doc.rule, doc.labels, models, doc.rng_seed).map(SavedModel::Ovo)
        }
        other => Err(Error::Format(format!("unknown model kind {other:?}"))),
    }
}

pub fn save_model(path: impl AsRef<Path>, model: &SavedModel) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

pub fn save_result_json(path: impl AsRef<Path>, result: &ExperimentResult) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(result)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_result_json(path: impl AsRef<Path>) -> Result<ExperimentResult> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn config_comment(result: &ExperimentResult) -> Result<String> {
    Ok(format!("# config: {}\n", serde_json::to_string(&result.config)?))
}

/// `example,d,classifier,mean_error,std_error,reps`, preceded by a `#` line
/// holding the resolved config.
pub fn write_summary_csv<W: Write>(mut writer: W, result: &ExperimentResult) -> Result<()> {
    let io = |e| Error::io("<csv>", e);
    writer.write_all(config_comment(result)?.as_bytes()).map_err(io)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["example", "d", "classifier", "mean_error", "std_error", "reps"])
        .map_err(csv_error)?;
    let source = result.config.source_name();
    for cell in &result.cells {
        w.write_record([
            source.clone(),
            cell.d.to_string(),
            cell.classifier.to_string(),
            cell.mean_error.to_string(),
            cell.std_error.to_string(),
            cell.reps.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(io)
}

/// Plot series: one row per `(classifier, d)` with `mean ± std_error`.
pub fn write_plot_csv<W: Write>(mut writer: W, result: &ExperimentResult) -> Result<()> {
    let io = |e| Error::io("<csv>", e);
    writer.write_all(config_comment(result)?.as_bytes()).map_err(io)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["example", "classifier", "d", "mean_error", "lower", "upper"])
        .map_err(csv_error)?;
    let source = result.config.source_name();
    let mut cells: Vec<_> = result.cells.iter().collect();
    cells.sort_by_key(|c| (c.classifier, c.d));
    for cell in cells {
        w.write_record([
            source.clone(),
            cell.classifier.to_string(),
            cell.d.to_string(),
            cell.mean_error.to_string(),
            (cell.mean_error - cell.std_error).to_string(),
            (cell.mean_error + cell.std_error).to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(io)
}

pub fn save_summary_csv(path: impl AsRef<Path>, result: &ExperimentResult) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_summary_csv(BufWriter::new(file), result)
}

pub fn save_plot_csv(path: impl AsRef<Path>, result: &ExperimentResult) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_plot_csv(BufWriter::new(file), result)
}
