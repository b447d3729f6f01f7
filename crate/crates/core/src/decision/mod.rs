//! Object-level decisions from several views, with a Gaussian confidence
//! score on penultimate embeddings for suppressing false positives.

mod sweep;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::GlitchClass;
use crate::corpus::{frames_to_tensor, CorpusError};
use crate::metrics::{argmax, BinaryMetrics, PredictionRecord, PredictionSet};
use crate::net::{Classifier, NetError, Parameters};
use crate::synth::SynthError;

pub use sweep::{aggregation_sweep, unit_predictions, AggregationRow, AggregationTable, ViewUnit};

/// Smallest per-class bandwidth.
pub const SIGMA_FLOOR: f64 = 1e-6;
const DISTRIBUTION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DecisionError {
    #[error("no probability vectors to aggregate")]
    Empty,
    #[error("row {row} is not a probability distribution over {classes} classes")]
    NotADistribution { row: usize, classes: usize },
    #[error("frames belong to several objects: {0:?}")]
    MixedObjects(Vec<u32>),
    #[error("k = {k} but only {available} views are available")]
    BadK { k: usize, available: usize },
    #[error("class {0} has fewer than 2 training embeddings")]
    TooFewSamples(GlitchClass),
    #[error("embedding has dimension {got}, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

/// Arithmetic mean of `k ≥ 1` probability rows.
pub fn aggregate_probs<R: AsRef<[f64]>>(rows: &[R]) -> Result<Vec<f64>, DecisionError> {
    let first = rows.first().ok_or(DecisionError::Empty)?.as_ref();
    let classes = first.len();
    let mut mean = vec![0.0; classes];
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        let valid = row.len() == classes
            && row.iter().all(|&p| p >= 0.0 && p.is_finite())
            && (row.iter().sum::<f64>() - 1.0).abs() <= DISTRIBUTION_TOL;
        if !valid {
            return Err(DecisionError::NotADistribution { row: i, classes });
        }
        for (m, &p) in mean.iter_mut().zip(row) {
            *m += p;
        }
    }
    let k = rows.len() as f64;
    mean.iter_mut().for_each(|m| *m /= k);
    Ok(mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    FlagGlitch,
    Pass,
    AbstainNeedMoreViews,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::FlagGlitch => "flag-glitch",
            Verdict::Pass => "pass",
            Verdict::AbstainNeedMoreViews => "abstain-need-more-views",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectDecision {
    pub object_id: u32,
    #[serde(rename = "class")]
    pub predicted: GlitchClass,
    pub probabilities: Vec<f64>,
    /// Gaussian confidence of the mean embedding under the predicted
    /// class; absent without a fitted model.
    pub confidence: Option<f64>,
    pub verdict: Verdict,
    pub views_used: usize,
    /// Ground truth when known, for evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_class: Option<GlitchClass>,
}

fn verdict_for(predicted: GlitchClass, confidence: Option<f64>, tau: f64) -> Verdict {
    match (predicted.is_glitch(), confidence) {
        (false, _) => Verdict::Pass,
        (true, Some(c)) if c < tau => Verdict::AbstainNeedMoreViews,
        (true, _) => Verdict::FlagGlitch,
    }
}

/// Per-class isotropic Gaussians on embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceModel {
    pub dim: usize,
    /// One mean per class, indexed like [`GlitchClass::index`].
    pub means: Vec<Vec<f64>>,
    pub sigmas: Vec<f64>,
}

/// Fits `μ_c` as the mean training embedding of true class `c` and `σ_c`
/// as the RMS distance to it, floored at [`SIGMA_FLOOR`].
pub fn fit_confidence(train: &PredictionSet) -> Result<ConfidenceModel, DecisionError> {
    let dim = train.records.first().map_or(0, |r| r.embedding.len());
    let mut means = Vec::with_capacity(GlitchClass::COUNT);
    let mut sigmas = Vec::with_capacity(GlitchClass::COUNT);
    for class in GlitchClass::ALL {
        let members: Vec<&PredictionRecord> = train.records.iter().filter(|r| r.true_class == class).collect();
        if members.len() < 2 {
            return Err(DecisionError::TooFewSamples(class));
        }
        let mut mu = vec![0.0; dim];
        for r in &members {
            if r.embedding.len() != dim {
                return Err(DecisionError::Dimension { expected: dim, got: r.embedding.len() });
            }
            for (m, &z) in mu.iter_mut().zip(&r.embedding) {
                *m += z as f64;
            }
        }
        let n = members.len() as f64;
        mu.iter_mut().for_each(|m| *m /= n);
        let msd = members.iter().map(|r| sq_dist(&r.embedding, &mu)).sum::<f64>() / n;
        means.push(mu);
        sigmas.push(msd.sqrt().max(SIGMA_FLOOR));
    }
    Ok(ConfidenceModel { dim, means, sigmas })
}

fn sq_dist(z: &[f32], mu: &[f64]) -> f64 {
    z.iter().zip(mu).map(|(&a, &b)| (a as f64 - b).powi(2)).sum()
}

impl ConfidenceModel {
    pub fn save(&self, path: &Path) -> Result<(), DecisionError> {
        let body = serde_json::to_vec(self).expect("model serializes");
        fs::write(path, body).map_err(|e| DecisionError::Io { path: path.into(), reason: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, DecisionError> {
        let bytes = fs::read(path).map_err(|e| DecisionError::Io { path: path.into(), reason: e.to_string() })?;
        serde_json::from_slice(&bytes).map_err(|e| DecisionError::Io { path: path.into(), reason: e.to_string() })
    }
}

/// `exp(−‖z − μ_c‖² / (2σ_c²))`.
pub fn confidence_score(model: &ConfidenceModel, embedding: &[f32], class: GlitchClass) -> Result<f64, DecisionError> {
    if embedding.len() != model.dim {
        return Err(DecisionError::Dimension { expected: model.dim, got: embedding.len() });
    }
    let sigma = model.sigmas[class.index()];
    Ok((-sq_dist(embedding, &model.means[class.index()]) / (2.0 * sigma * sigma)).exp())
}

/// Decides one object from precomputed per-view predictions: the first `k`
/// views by ascending view id are averaged, and ties in the argmax go to
/// the lowest class index.
pub fn decide_from_predictions(
    views: &[&PredictionRecord],
    k: usize,
    model: Option<&ConfidenceModel>,
) -> Result<ObjectDecision, DecisionError> {
    let mut objects: Vec<u32> = views.iter().map(|r| r.object_id).collect();
    objects.sort_unstable();
    objects.dedup();
    if objects.len() > 1 {
        return Err(DecisionError::MixedObjects(objects));
    }
    if k == 0 || k > views.len() {
        return Err(DecisionError::BadK { k, available: views.len() });
    }
    let mut sorted = views.to_vec();
    sorted.sort_by_key(|r| r.view_id);
    let used = &sorted[..k];
    let probabilities = aggregate_probs(&used.iter().map(|r| r.probabilities.as_slice()).collect::<Vec<_>>())?;
    let predicted = GlitchClass::from_index(argmax(&probabilities)).expect("five-class output");
    let confidence = match model {
        Some(m) => {
            let dim = used[0].embedding.len();
            let mut mean = vec![0.0f32; dim];
            for r in used {
                for (a, &b) in mean.iter_mut().zip(&r.embedding) {
                    *a += b / k as f32;
                }
            }
            Some(confidence_score(m, &mean, predicted)?)
        }
        None => None,
    };
    let truth: Vec<GlitchClass> = used.iter().map(|r| r.true_class).collect();
    let true_class = truth.iter().all(|&c| c == truth[0]).then_some(truth[0]);
    Ok(ObjectDecision {
        object_id: objects[0],
        predicted,
        probabilities,
        confidence,
        verdict: verdict_for(predicted, confidence, 0.0),
        views_used: k,
        true_class,
    })
}

/// One frame of an object: RGB8 pixels at the classifier's input size.
#[derive(Debug, Clone)]
pub struct ObjectFrame {
    pub object_id: u32,
    pub view_id: u32,
    pub rgb: Vec<u8>,
}

/// Forwards the first `k` frames by view id and aggregates them.
pub fn classify_object(
    net: &Classifier,
    params: &Parameters<f32>,
    frames: &[ObjectFrame],
    k: usize,
    model: Option<&ConfidenceModel>,
) -> Result<ObjectDecision, DecisionError> {
    let mut objects: Vec<u32> = frames.iter().map(|f| f.object_id).collect();
    objects.sort_unstable();
    objects.dedup();
    if objects.len() > 1 {
        return Err(DecisionError::MixedObjects(objects));
    }
    if k == 0 || k > frames.len() {
        return Err(DecisionError::BadK { k, available: frames.len() });
    }
    let mut order: Vec<&ObjectFrame> = frames.iter().collect();
    order.sort_by_key(|f| f.view_id);
    let used = &order[..k];
    let images = frames_to_tensor(&used.iter().map(|f| f.rgb.as_slice()).collect::<Vec<_>>(), net.config().input_size);
    let out = net.forward(params, &images)?;
    let d = net.feature_dim();
    let records: Vec<PredictionRecord> = used
        .iter()
        .zip(out.probability_rows())
        .enumerate()
        .map(|(i, (f, p))| PredictionRecord {
            sample_id: String::new(),
            object_id: f.object_id,
            view_id: f.view_id,
            true_class: GlitchClass::Normal,
            predicted: GlitchClass::from_index(argmax(p)).expect("five-class output"),
            probabilities: p.to_vec(),
            embedding: out.embedding.data()[i * d..(i + 1) * d].to_vec(),
        })
        .collect();
    let refs: Vec<&PredictionRecord> = records.iter().collect();
    let mut decision = decide_from_predictions(&refs, k, model)?;
    decision.true_class = None;
    Ok(decision)
}

/// Re-derives verdicts at threshold `tau`: glitch predictions whose
/// confidence is below `tau` abstain. Decisions without a confidence are
/// left as flagged or passed.
pub fn filter_predictions(decisions: &[ObjectDecision], tau: f64) -> Result<Vec<ObjectDecision>, DecisionError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(DecisionError::Threshold(tau));
    }
    Ok(decisions
        .iter()
        .map(|d| ObjectDecision { verdict: verdict_for(d.predicted, d.confidence, tau), ..d.clone() })
        .collect())
}

/// Binary rates where only `flag-glitch` counts as a positive call.
/// Decisions without ground truth are skipped.
pub fn decision_binary_metrics(decisions: &[ObjectDecision]) -> BinaryMetrics {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for d in decisions {
        let Some(truth) = d.true_class else { continue };
        match (truth.is_glitch(), d.verdict == Verdict::FlagGlitch) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    BinaryMetrics::from_counts(tp, fp, tn, fn_)
}

/// Per-view decisions (k = 1) for every record of a prediction set.
pub fn per_view_decisions(set: &PredictionSet, model: Option<&ConfidenceModel>) -> Result<Vec<ObjectDecision>, DecisionError> {
    set.records.iter().map(|r| decide_from_predictions(&[r], 1, model)).collect()
}

pub fn write_decisions_jsonl(decisions: &[ObjectDecision], path: &Path) -> Result<(), DecisionError> {
    let io = |e: std::io::Error| DecisionError::Io { path: path.into(), reason: e.to_string() };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for d in decisions {
        serde_json::to_writer(&mut f, d).map_err(|e| io(e.into()))?;
        f.write_all(b"\n").map_err(io)?;
    }
    f.flush().map_err(io)
}

#[cfg(test)]
mod tests;
