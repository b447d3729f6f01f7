//! Accuracy, binary detection rates and row-normalized confusion matrices
//! under the five-, three- and two-group label views.

mod heatmap;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::GlitchClass;
use crate::corpus::{CorpusError, CorpusManifest, Split, SplitData};
use crate::net::{load_checkpoint, Classifier, NetError, Parameters};

pub use heatmap::render_heatmap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Five,
    Three,
    Binary,
}

impl Grouping {
    pub const ALL: [Grouping; 3] = [Grouping::Five, Grouping::Three, Grouping::Binary];

    pub fn group_count(self) -> usize {
        self.group_names().len()
    }

    pub fn group_names(self) -> &'static [&'static str] {
        match self {
            Grouping::Five => &["normal", "stretched", "low_res", "missing", "placeholder"],
            Grouping::Three => &["normal", "corrupted", "missing_texture"],
            Grouping::Binary => &["normal", "glitch"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Grouping::Five => "five",
            Grouping::Three => "three",
            Grouping::Binary => "binary",
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "five" => Ok(Grouping::Five),
            "three" => Ok(Grouping::Three),
            "binary" => Ok(Grouping::Binary),
            other => Err(format!("unknown grouping `{other}` (expected five, three or binary)")),
        }
    }
}

/// Group index of `class` under `scheme`. The three-group view puts
/// Stretched and LowRes together as corrupted textures, and Missing and
/// Placeholder together as missing textures.
pub fn group_labels(class: GlitchClass, scheme: Grouping) -> usize {
    match scheme {
        Grouping::Five => class.index(),
        Grouping::Three => match class {
            GlitchClass::Normal => 0,
            GlitchClass::Stretched | GlitchClass::LowRes => 1,
            GlitchClass::Missing | GlitchClass::Placeholder => 2,
        },
        Grouping::Binary => usize::from(class.is_glitch()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub object_id: u32,
    pub view_id: u32,
    pub true_class: GlitchClass,
    pub predicted: GlitchClass,
    pub probabilities: Vec<f64>,
    pub embedding: Vec<f32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub records: Vec<PredictionRecord>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.records.iter().filter(|r| r.predicted == r.true_class).count() as u64, self.len() as u64)
    }

    /// Exact-match rate after mapping both labels through `scheme`.
    pub fn grouped_accuracy(&self, scheme: Grouping) -> Option<f64> {
        let hits = self.records.iter().filter(|r| group_labels(r.predicted, scheme) == group_labels(r.true_class, scheme)).count();
        ratio(hits as u64, self.len() as u64)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), MetricsError> {
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(|e| MetricsError::Format(e.to_string()))?;
            out.push(b'\n');
        }
        write_file(path, &out)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, MetricsError> {
        let text = fs::read_to_string(path).map_err(|source| MetricsError::Io { path: path.to_path_buf(), source })?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| MetricsError::Format(format!("{}: {e}", path.display()))))
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), MetricsError> {
    let io = |source| MetricsError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::File::create(path).and_then(|mut f| f.write_all(bytes)).map_err(io)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub grouping: Grouping,
    /// `counts[i][j]`: true group `i` predicted as group `j`.
    pub counts: Vec<Vec<u64>>,
    /// Rows divided by their sums; `None` marks a row with no samples.
    pub normalized: Vec<Option<Vec<f64>>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn unsupported_rows(&self) -> Vec<usize> {
        (0..self.normalized.len()).filter(|&i| self.normalized[i].is_none()).collect()
    }

    /// Row-normalized values with a leading label column; unsupported
    /// rows are written as `unsupported`.
    pub fn to_csv(&self) -> String {
        let names = self.grouping.group_names();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(names.iter().map(|s| s.to_string()));
        header.push("support".into());
        w.write_record(&header).expect("in-memory csv");
        for (i, name) in names.iter().enumerate() {
            let mut row = vec![name.to_string()];
            match &self.normalized[i] {
                Some(vals) => row.extend(vals.iter().map(|v| format!("{v:.6}"))),
                None => row.extend(std::iter::repeat_n("unsupported".to_string(), names.len())),
            }
            row.push(self.counts[i].iter().sum::<u64>().to_string());
            w.write_record(&row).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

pub fn confusion_matrix(predictions: &PredictionSet, grouping: Grouping) -> ConfusionMatrix {
    let g = grouping.group_count();
    let mut counts = vec![vec![0u64; g]; g];
    for r in &predictions.records {
        counts[group_labels(r.true_class, grouping)][group_labels(r.predicted, grouping)] += 1;
    }
    let normalized = counts
        .iter()
        .map(|row| {
            let sum: u64 = row.iter().sum();
            (sum > 0).then(|| row.iter().map(|&c| c as f64 / sum as f64).collect())
        })
        .collect();
    ConfusionMatrix { grouping, counts, normalized }
}

/// Glitch-versus-normal rates. A glitch predicted as any glitch class
/// counts as detected. Rates with a zero denominator are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

impl BinaryMetrics {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            false_positive_rate: ratio(fp, fp + tn),
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
        }
    }
}

pub fn binary_metrics(predictions: &PredictionSet) -> BinaryMetrics {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for r in &predictions.records {
        match (r.true_class.is_glitch(), r.predicted.is_glitch()) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    BinaryMetrics::from_counts(tp, fp, tn, fn_)
}

/// Mean and sample standard deviation of a metric over trailing epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    pub mean: f64,
    pub std: f64,
}

impl fmt::Display for WindowStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ({:.3})", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Split,
    pub samples: usize,
    pub accuracy: Option<f64>,
    pub per_class_recall: BTreeMap<GlitchClass, Option<f64>>,
    pub samples_per_class: BTreeMap<GlitchClass, usize>,
    pub binary: BinaryMetrics,
    /// Keyed by grouping name.
    pub confusion: BTreeMap<Grouping, ConfusionMatrix>,
    pub grouped_accuracy: BTreeMap<Grouping, Option<f64>>,
    /// Trailing-epoch statistics from the training log, when available.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub epoch_window: BTreeMap<String, WindowStat>,
}

impl EvalReport {
    pub fn from_predictions(split: Split, predictions: &PredictionSet) -> Self {
        let five = confusion_matrix(predictions, Grouping::Five);
        let per_class_recall = GlitchClass::ALL
            .iter()
            .map(|&c| (c, five.normalized[c.index()].as_ref().map(|row| row[c.index()])))
            .collect();
        let samples_per_class = GlitchClass::ALL.iter().map(|&c| (c, five.counts[c.index()].iter().sum::<u64>() as usize)).collect();
        Self {
            split,
            samples: predictions.len(),
            accuracy: predictions.accuracy(),
            per_class_recall,
            samples_per_class,
            binary: binary_metrics(predictions),
            confusion: Grouping::ALL.iter().map(|&g| (g, confusion_matrix(predictions, g))).collect(),
            grouped_accuracy: Grouping::ALL.iter().map(|&g| (g, predictions.grouped_accuracy(g))).collect(),
            epoch_window: BTreeMap::new(),
        }
    }

    pub fn recall(&self, class: GlitchClass) -> Option<f64> {
        self.per_class_recall.get(&class).copied().flatten()
    }

    /// Writes `path` as JSON plus `<stem>.<grouping>.csv` and
    /// `<stem>.<grouping>.png` next to it for every grouping.
    pub fn write(&self, path: &Path) -> Result<Vec<PathBuf>, MetricsError> {
        let json = serde_json::to_vec_pretty(self).map_err(|e| MetricsError::Format(e.to_string()))?;
        write_file(path, &json)?;
        let mut written = vec![path.to_path_buf()];
        for (g, m) in &self.confusion {
            let csv_path = path.with_extension(format!("{g}.csv"));
            write_file(&csv_path, m.to_csv().as_bytes())?;
            let png_path = path.with_extension(format!("{g}.png"));
            render_heatmap(m, &png_path)?;
            written.extend([csv_path, png_path]);
        }
        Ok(written)
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("checkpoint expects {checkpoint:?} inputs but the corpus holds {corpus:?} images")]
    InputSize { checkpoint: (u32, u32), corpus: (u32, u32) },
    #[error("{0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Eval-mode forward passes over `data`, in stored order.
pub fn predict(net: &Classifier, params: &Parameters<f32>, data: &SplitData, batch_size: usize) -> Result<PredictionSet, NetError> {
    let mut records = Vec::with_capacity(data.len());
    for (idx, batch) in data.sequential_batches(batch_size) {
        let out = net.forward(params, &batch.images)?;
        let d = out.embedding.shape()[1];
        for ((k, &i), probs) in idx.iter().enumerate().zip(out.probability_rows()) {
            records.push(PredictionRecord {
                sample_id: data.sample_ids[i].clone(),
                object_id: data.object_ids[i],
                view_id: data.view_ids[i],
                true_class: GlitchClass::from_index(data.labels[i]).expect("five-class label"),
                predicted: GlitchClass::from_index(argmax(probs)).expect("five-class output"),
                probabilities: probs.to_vec(),
                embedding: out.embedding.data()[k * d..(k + 1) * d].to_vec(),
            });
        }
    }
    Ok(PredictionSet { records })
}

pub const EVAL_BATCH: usize = 64;

/// Loads a checkpoint, runs it over `split` and assembles the report.
pub fn evaluate(checkpoint: &Path, manifest: &CorpusManifest, split: Split) -> Result<(EvalReport, PredictionSet), MetricsError> {
    let (params, config, _) = load_checkpoint(checkpoint)?;
    if config.input_size != manifest.config.image_size {
        return Err(MetricsError::InputSize { checkpoint: config.input_size, corpus: manifest.config.image_size });
    }
    let net = Classifier::new(config)?;
    let data = SplitData::load(manifest, split)?;
    let predictions = predict(&net, &params, &data, EVAL_BATCH)?;
    Ok((EvalReport::from_predictions(split, &predictions), predictions))
}

#[cfg(test)]
mod tests;
