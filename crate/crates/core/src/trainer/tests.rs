use std::path::Path;

use super::*;
use crate::corpus::{build_corpus, split_by_object, CorpusConfig};
use crate::synth::PlaceholderStyle;

#[test]
fn cross_entropy_examples() {
    let uniform = cross_entropy(&[0.3; 10], &[0, 4], 5).unwrap();
    assert!((uniform - 5f64.ln()).abs() < 1e-12);
    assert_eq!(cross_entropy(&[800.0, 0.0, 0.0, 0.0, 0.0], &[0], 5).unwrap(), 0.0);
    let direct = -((2f64).exp() / ((2f64).exp() + 4.0)).ln();
    let ce = cross_entropy(&[2.0, 0.0, 0.0, 0.0, 0.0], &[0], 5).unwrap();
    assert!((ce - direct).abs() < 1e-12);
    assert!((ce - 0.43265).abs() < 5e-6);
    assert!(cross_entropy(&[f64::NAN, 0.0], &[0], 2).is_err());
    assert!(cross_entropy(&[0.0, 0.0], &[2], 2).is_err());
}

#[test]
fn cross_entropy_is_shift_invariant() {
    let z = [1.5, -2.0, 0.25, 3.0, -0.5, 0.0, 0.1, 0.2, 0.3, 9.0];
    let shifted: Vec<f64> = z.iter().enumerate().map(|(i, v)| v + if i < 5 { 100.0 } else { -37.0 }).collect();
    let a = cross_entropy(&z, &[3, 1], 5).unwrap();
    let b = cross_entropy(&shifted, &[3, 1], 5).unwrap();
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    let z = vec![0.5, -1.0, 2.0, 0.0, 0.3, 1.0, 1.0, -2.0, 0.7, 0.1];
    let labels = [2, 4];
    let probs = crate::net::softmax_rows(&z, 5);
    let g = cross_entropy_grad(&probs, &labels, 5);
    for i in 0..z.len() {
        let mut up = z.clone();
        up[i] += 1e-6;
        let mut down = z.clone();
        down[i] -= 1e-6;
        let fd = (cross_entropy(&up, &labels, 5).unwrap() - cross_entropy(&down, &labels, 5).unwrap()) / 2e-6;
        assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
    }
}

fn scalar(v: f32) -> Parameters<f32> {
    let mut p = Parameters::new();
    p.insert("w", Tensor::full(&[1], v));
    p
}

#[test]
fn adam_first_step_has_learning_rate_magnitude() {
    let mut p = scalar(1.0);
    let mut s = AdamState::default();
    adam_step(&mut p, &scalar(0.5), &mut s, 1, &AdamConfig::default()).unwrap();
    // m̂ = g and v̂ = g², so the step is lr · g / (|g| + ε).
    let expected = 1.0f64 - 1e-4 * 0.5 / (0.5 + 1e-8);
    assert!((p.get("w").unwrap().data()[0] as f64 - expected).abs() < 1e-7);
    assert_eq!(s.m.get("w").unwrap().data()[0], 0.05);
}

#[test]
fn adam_zero_gradient_is_a_no_op_and_shapes_are_checked() {
    let mut p = scalar(1.0);
    let mut s = AdamState::default();
    adam_step(&mut p, &scalar(0.0), &mut s, 1, &AdamConfig::default()).unwrap();
    assert_eq!(p, scalar(1.0));
    assert_eq!(s.m, scalar(0.0));
    assert_eq!(s.v, scalar(0.0));
    let mut wrong = Parameters::new();
    wrong.insert("w", Tensor::<f32>::zeros(&[2]));
    assert!(matches!(adam_step(&mut p, &wrong, &mut s, 2, &AdamConfig::default()), Err(TrainError::Shape { .. })));
    assert!(adam_step(&mut p, &scalar(0.0), &mut s, 0, &AdamConfig::default()).is_err());
}

fn log_of(vals: &[f64]) -> TrainLog {
    TrainLog {
        records: vals
            .iter()
            .enumerate()
            .map(|(i, &v)| EpochRecord {
                epoch: i + 1,
                train_loss: 1.0 - v,
                train_accuracy: v,
                val_loss: None,
                val_accuracy: Some(v),
                wall_time_s: 0.0,
            })
            .collect(),
    }
}

#[test]
fn window_statistics() {
    let s = summarize_last_epochs(&log_of(&[0.1, 0.8, 0.8, 0.8]), 3, Metric::ValAccuracy).unwrap();
    assert!((s.mean - 0.8).abs() < 1e-12 && s.std.abs() < 1e-12);
    let s = summarize_last_epochs(&log_of(&[0.7, 0.9]), 2, Metric::TrainAccuracy).unwrap();
    assert!((s.mean - 0.8).abs() < 1e-12);
    assert!((s.std - 0.02f64.sqrt()).abs() < 1e-12);
    assert!(summarize_last_epochs(&log_of(&[0.7, 0.9]), 3, Metric::TrainAccuracy).is_err());
    assert!(summarize_last_epochs(&log_of(&[0.7, 0.9]), 2, Metric::ValLoss).is_err());
    let vals = [0.2, 0.4, 0.9, 0.5];
    let full = summarize_last_epochs(&log_of(&vals), 4, Metric::TrainAccuracy).unwrap();
    let mean = vals.iter().sum::<f64>() / 4.0;
    let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert!((full.mean - mean).abs() < 1e-12 && (full.std - std).abs() < 1e-12);
}

fn tiny_corpus(dir: &Path, objects: u32, split: bool) -> CorpusManifest {
    let m = build_corpus(&CorpusConfig::new(objects, 5, (32, 32), PlaceholderStyle::Pattern, 1), dir, false).unwrap();
    if split {
        split_by_object(&m, 0.2, 0).unwrap()
    } else {
        m
    }
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, batch_size: 8, ..TrainConfig::default() }
}

#[test]
fn one_epoch_smoke_run_logs_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny_corpus(dir.path(), 5, false);
    let ckpt = dir.path().join("model.ckpt");
    let cfg = TrainConfig { checkpoint_path: Some(ckpt.clone()), ..quick(1) };
    let out = train(&m, &ClassifierConfig::shuffle(0.5, 32), &cfg).unwrap();
    assert_eq!(out.log.records.len(), 1);
    assert_eq!(out.log.records[0].epoch, 1);
    assert!(out.log.records[0].train_loss.is_finite());
    assert_eq!(out.log.records[0].val_accuracy, None);
    let (params, _, meta) = crate::net::load_checkpoint(&ckpt).unwrap();
    assert_eq!(params, out.params);
    assert_eq!(meta.corpus_fingerprint.as_deref(), Some(m.fingerprint().as_str()));

    let (csv, json) = write_log(&out.log, &dir.path().join("log"), 20).unwrap();
    assert_eq!(TrainLog::read_csv(&csv).unwrap(), out.log);
    assert!(std::fs::read_to_string(json).unwrap().contains("\"window\": 1"));
}

#[test]
fn training_replays_identically_and_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny_corpus(dir.path(), 5, true);
    let model = ClassifierConfig::shuffle(0.5, 32);
    let a = train(&m, &model, &quick(2)).unwrap();
    let b = train(&m, &model, &quick(2)).unwrap();
    assert_eq!(a.params, b.params);
    let strip = |l: &TrainLog| l.records.iter().map(|r| (r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy)).collect::<Vec<_>>();
    assert_eq!(strip(&a.log), strip(&b.log));
    assert!(a.log.records[1].val_accuracy.is_some());

    assert!(matches!(train(&m, &ClassifierConfig::shuffle(0.5, 64), &quick(1)), Err(TrainError::Parameter(_))));
    let bad_lr = TrainConfig { adam: AdamConfig { learning_rate: 0.0, ..AdamConfig::default() }, ..quick(1) };
    assert!(train(&m, &model, &bad_lr).is_err());
    let mut broken = m.clone();
    broken.records[0].split = crate::corpus::Split::Val;
    assert!(matches!(train(&broken, &model, &quick(1)), Err(TrainError::InvalidManifest(_))));
}

#[test]
fn grid_tables_have_one_column_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny_corpus(dir.path(), 5, true);
    let data = TrainData::load(&m).unwrap();
    let model = ClassifierConfig::shuffle(0.5, 32);
    let t = lr_grid(&data, &model, &quick(2), &[1e-2, 1e-3], 20).unwrap();
    assert_eq!(t.window, 2);
    let md = t.to_markdown();
    assert!(md.contains("| Learning Rate | 1e-2 | 1e-3 |"), "{md}");
    assert!(md.contains("| Accuracy (Validation) |"));
    assert_eq!(t.to_csv().lines().count(), 3);
    let b = batch_grid(&data, &model, &quick(1), &[4, 8], 20).unwrap();
    assert!(b.to_markdown().contains("| Batch Size | 4 | 8 |"));
    assert_eq!(b.rows[0].log.records.len(), 1);
}
