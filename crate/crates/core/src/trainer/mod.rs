//! Adam on cross-entropy, per-epoch logs, and trailing-window summaries.

mod grid;
mod history;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{verify_manifest, CorpusError, CorpusManifest, Split, SplitData};
use crate::metrics::{argmax, predict, EVAL_BATCH};
use crate::net::{
    init_model, save_checkpoint, CheckpointMetadata, Classifier, ClassifierConfig, Gradients, NetError, Parameters, Tensor,
};

pub use grid::{batch_grid, lr_grid, GridRow, GridTable};
pub use history::{summarize_last_epochs, EpochRecord, Metric, TrainLog, TrainSummary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    /// Save every this many epochs; 0 saves only at the end.
    pub checkpoint_every: usize,
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 32,
            epochs: 100,
            init_seed: 0,
            shuffle_seed: 0,
            checkpoint_every: 0,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    /// Shorter schedule sized for CPU-only runs at 96×96.
    pub const DESK_EPOCHS: usize = 30;

    pub fn desk() -> Self {
        Self { epochs: Self::DESK_EPOCHS, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return Err(TrainError::Parameter(format!("learning rate must be positive, got {}", a.learning_rate)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.epsilon <= 0.0 {
            return Err(TrainError::Parameter("Adam betas must lie in [0, 1) and epsilon be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::Parameter("epochs and batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training parameter: {0}")]
    Parameter(String),
    #[error("non-finite values: {0}")]
    NonFiniteInput(String),
    #[error("shape mismatch for `{name}`: parameter {param:?}, gradient {grad:?}")]
    Shape { name: String, param: Vec<usize>, grad: Vec<usize> },
    #[error("manifest failed verification: {0}")]
    InvalidManifest(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}; last good checkpoint: {}", last_checkpoint.as_ref().map_or("none".into(), |p| p.display().to_string()))]
    Diverged { epoch: usize, batch: usize, last_checkpoint: Option<PathBuf> },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {reason}")]
    Output { path: PathBuf, reason: String },
}

/// Mean of `−log softmax(z)[label]` over rows, via log-sum-exp.
pub fn cross_entropy(logits: &[f64], labels: &[usize], classes: usize) -> Result<f64, TrainError> {
    if classes == 0 || logits.len() != labels.len() * classes || labels.is_empty() {
        return Err(TrainError::Parameter(format!("{} logits do not form {} rows of {classes}", logits.len(), labels.len())));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(TrainError::NonFiniteInput("logits".into()));
    }
    let mut total = 0.0;
    for (row, &y) in logits.chunks(classes).zip(labels) {
        if y >= classes {
            return Err(TrainError::Parameter(format!("label {y} outside [0, {classes})")));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    Ok(total / labels.len() as f64)
}

/// Gradient of [`cross_entropy`] with respect to the logits:
/// `(softmax(z) − onehot(y)) / N`.
pub fn cross_entropy_grad(probabilities: &[f64], labels: &[usize], classes: usize) -> Vec<f64> {
    let n = labels.len() as f64;
    let mut g = probabilities.to_vec();
    for (row, &y) in g.chunks_mut(classes).zip(labels) {
        row[y] -= 1.0;
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    g
}

/// First and second moment estimates, one tensor per trainable parameter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: Parameters<f32>,
    pub v: Parameters<f32>,
}

/// One bias-corrected Adam update at step `t ≥ 1`:
/// `θ ← θ − lr · m̂ / (√v̂ + ε)`.
pub fn adam_step(
    params: &mut Parameters<f32>,
    grads: &Gradients<f32>,
    state: &mut AdamState,
    t: u64,
    config: &AdamConfig,
) -> Result<(), TrainError> {
    if t == 0 {
        return Err(TrainError::Parameter("Adam step counter starts at 1".into()));
    }
    let bc1 = 1.0 - config.beta1.powi(t as i32);
    let bc2 = 1.0 - config.beta2.powi(t as i32);
    for (name, g) in grads.iter() {
        let p = params.get_mut(name)?;
        if p.shape() != g.shape() {
            return Err(TrainError::Shape { name: name.into(), param: p.shape().to_vec(), grad: g.shape().to_vec() });
        }
        if state.m.get(name).is_err() {
            state.m.insert(name, Tensor::zeros(g.shape()));
            state.v.insert(name, Tensor::zeros(g.shape()));
        }
        let m = state.m.get_mut(name)?.data_mut();
        let v = state.v.get_mut(name)?.data_mut();
        for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            let g = g as f64;
            let m_new = config.beta1 * *m as f64 + (1.0 - config.beta1) * g;
            let v_new = config.beta2 * *v as f64 + (1.0 - config.beta2) * g * g;
            *m = m_new as f32;
            *v = v_new as f32;
            let step = config.learning_rate * (m_new / bc1) / ((v_new / bc2).sqrt() + config.epsilon);
            *p = (*p as f64 - step) as f32;
        }
    }
    Ok(())
}

/// Decoded splits plus the identity of the manifest they came from.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub train: SplitData,
    pub val: SplitData,
    pub fingerprint: String,
    pub image_size: (u32, u32),
}

impl TrainData {
    /// Verifies the manifest and decodes both splits.
    pub fn load(manifest: &CorpusManifest) -> Result<Self, TrainError> {
        let problems = verify_manifest(manifest);
        if let Some(first) = problems.first() {
            return Err(TrainError::InvalidManifest(format!("{first} ({} problems)", problems.len())));
        }
        Ok(Self {
            train: SplitData::load(manifest, Split::Train)?,
            val: SplitData::load(manifest, Split::Val)?,
            fingerprint: manifest.fingerprint(),
            image_size: manifest.config.image_size,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: ClassifierConfig,
    pub params: Parameters<f32>,
    pub metadata: CheckpointMetadata,
    pub log: TrainLog,
}

/// Trains on the manifest's train split and validates on its val split
/// after every epoch.
pub fn train(manifest: &CorpusManifest, model: &ClassifierConfig, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_on(&TrainData::load(manifest)?, model, config)
}

pub fn train_on(data: &TrainData, model: &ClassifierConfig, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if model.input_size != data.image_size {
        return Err(TrainError::Parameter(format!(
            "model input {:?} differs from corpus image size {:?}",
            model.input_size, data.image_size
        )));
    }
    if data.train.is_empty() {
        return Err(TrainError::Parameter("train split is empty".into()));
    }
    let net = Classifier::new(model.clone())?;
    let classes = model.num_classes;
    let mut params = init_model(model, config.init_seed)?;
    let mut state = AdamState::default();
    let mut metadata = CheckpointMetadata {
        init_seed: Some(config.init_seed),
        shuffle_seed: Some(config.shuffle_seed),
        corpus_fingerprint: Some(data.fingerprint.clone()),
        ..Default::default()
    };
    metadata.notes.insert("learning_rate".into(), config.adam.learning_rate.to_string());
    metadata.notes.insert("batch_size".into(), config.batch_size.to_string());
    let mut log = TrainLog::default();
    let mut last_checkpoint = None;
    let mut step = 0u64;

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for (b, batch) in data.train.batches(config.batch_size, config.shuffle_seed, epoch as u64).enumerate() {
            let (out, trace) = net.forward_train(&params, &batch.images)?;
            let logits: Vec<f64> = out.logits.data().iter().map(|&v| v as f64).collect();
            let loss = match cross_entropy(&logits, &batch.labels, classes) {
                Ok(l) if l.is_finite() => l,
                _ => return Err(TrainError::Diverged { epoch, batch: b, last_checkpoint }),
            };
            let n = batch.labels.len();
            loss_sum += loss * n as f64;
            seen += n;
            correct += out.probability_rows().zip(&batch.labels).filter(|(p, &y)| argmax(p) == y).count();
            let grad = cross_entropy_grad(out.probabilities.data(), &batch.labels, classes);
            let grad = Tensor::from_vec(&[n, classes], grad.into_iter().map(|v| v as f32).collect())?;
            net.update_running_stats(&mut params, &trace)?;
            let grads = net.backward(&params, trace, &grad)?;
            step += 1;
            adam_step(&mut params, &grads, &mut state, step, &config.adam)?;
        }
        let (val_loss, val_accuracy) = if data.val.is_empty() {
            (None, None)
        } else {
            let preds = predict(&net, &params, &data.val, EVAL_BATCH)?;
            let probs: Vec<f64> = preds.records.iter().flat_map(|r| r.probabilities.iter().copied()).collect();
            let labels: Vec<usize> = preds.records.iter().map(|r| r.true_class.index()).collect();
            // Loss from probabilities: the eval pass keeps no logits.
            let loss = -labels.iter().enumerate().map(|(i, &y)| probs[i * classes + y].max(f64::MIN_POSITIVE).ln()).sum::<f64>()
                / labels.len() as f64;
            (Some(loss), preds.accuracy())
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_accuracy: correct as f64 / seen as f64,
            val_loss,
            val_accuracy,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}/{}: train loss {:.4} acc {:.3}, val acc {}",
            config.epochs,
            record.train_loss,
            record.train_accuracy,
            record.val_accuracy.map_or("n/a".into(), |a| format!("{a:.3}"))
        );
        log.records.push(record);
        metadata.epochs_trained = epoch;
        let cadence = config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0;
        if let Some(path) = &config.checkpoint_path {
            if cadence || epoch == config.epochs {
                save_checkpoint(path, &params, model, &metadata)?;
                last_checkpoint = Some(path.clone());
            }
        }
    }
    Ok(TrainOutcome { config: model.clone(), params, metadata, log })
}

/// Writes `<stem>.csv` and `<stem>.summary.json` beside `base`.
pub fn write_log(log: &TrainLog, base: &Path, window: usize) -> Result<(PathBuf, PathBuf), TrainError> {
    let csv_path = base.with_extension("csv");
    log.write_csv(&csv_path).map_err(|e| TrainError::Output { path: csv_path.clone(), reason: e })?;
    let json_path = base.with_extension("summary.json");
    let summary = TrainSummary::from_log(log, window.min(log.records.len()));
    let body = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    std::fs::write(&json_path, body).map_err(|e| TrainError::Output { path: json_path.clone(), reason: e.to_string() })?;
    Ok((csv_path, json_path))
}

#[cfg(test)]
mod tests;
