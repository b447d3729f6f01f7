//! Classifier networks: tensors, kernels, the shuffle-unit and residual
//! families, analytic cost accounting, and checkpoint files.

mod arch;
mod checkpoint;
pub mod ops;
mod params;
mod scalar;
mod tensor;

use std::path::PathBuf;

pub use arch::{count_cost, Architecture, Classifier, ClassifierConfig, Cost, ForwardOutput, InitMode, Trace};
pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, CheckpointMetadata, CHECKPOINT_VERSION};
pub use ops::channel_shuffle;
pub use params::{init_model, Gradients, ParamKind, ParamSpec, Parameters};
pub use scalar::Scalar;
pub use tensor::Tensor;

/// Momentum of the running normalization statistics.
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parameter `{name}`: expected shape {expected:?}, got {got:?}")]
    ParamShape { name: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("parameter `{0}` is missing")]
    MissingParam(String),
    #[error("parameter `{0}` contains non-finite values")]
    NonFinite(String),
    #[error("checkpoint {path}: integrity check failed ({reason})")]
    Integrity { path: PathBuf, reason: String },
    #[error("checkpoint {path} holds a {found} model but {requested} was requested")]
    ConfigConflict { path: PathBuf, found: String, requested: String },
    #[error("checkpoint {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Row-wise softmax computed in `f64`.
pub fn softmax_rows(logits: &[f64], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(classes) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / sum));
    }
    out
}
