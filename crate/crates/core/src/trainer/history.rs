use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::metrics::WindowStat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    TrainLoss,
    TrainAccuracy,
    ValLoss,
    ValAccuracy,
}

impl Metric {
    fn of(self, r: &EpochRecord) -> Option<f64> {
        match self {
            Metric::TrainLoss => Some(r.train_loss),
            Metric::TrainAccuracy => Some(r.train_accuracy),
            Metric::ValLoss => r.val_loss,
            Metric::ValAccuracy => r.val_accuracy,
        }
    }
}

impl TrainLog {
    pub fn write_csv(&self, path: &Path) -> Result<(), String> {
        let mut w = csv::Writer::from_path(path).map_err(|e| e.to_string())?;
        for r in &self.records {
            w.serialize(r).map_err(|e| e.to_string())?;
        }
        w.flush().map_err(|e| e.to_string())
    }

    pub fn read_csv(path: &Path) -> Result<Self, String> {
        let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
        let records = r.deserialize().collect::<Result<Vec<EpochRecord>, _>>().map_err(|e| e.to_string())?;
        Ok(Self { records })
    }

    pub fn values(&self, metric: Metric) -> Vec<Option<f64>> {
        self.records.iter().map(|r| metric.of(r)).collect()
    }
}

/// Mean and sample standard deviation of `metric` over the last `window`
/// epochs. A one-epoch window has standard deviation 0.
pub fn summarize_last_epochs(log: &TrainLog, window: usize, metric: Metric) -> Result<WindowStat, TrainError> {
    let n = log.records.len();
    if window == 0 || window > n {
        return Err(TrainError::Parameter(format!("window {window} needs between 1 and {n} logged epochs")));
    }
    let vals = log.records[n - window..]
        .iter()
        .map(|r| metric.of(r).ok_or_else(|| TrainError::Parameter(format!("{metric:?} missing at epoch {}", r.epoch))))
        .collect::<Result<Vec<f64>, _>>()?;
    let mean = vals.iter().sum::<f64>() / window as f64;
    let std = if window > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (window - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(WindowStat { mean, std })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub window: usize,
    pub train_loss: Option<WindowStat>,
    pub train_accuracy: Option<WindowStat>,
    pub val_loss: Option<WindowStat>,
    pub val_accuracy: Option<WindowStat>,
}

impl TrainSummary {
    pub fn from_log(log: &TrainLog, window: usize) -> Self {
        let s = |m| summarize_last_epochs(log, window, m).ok();
        Self {
            epochs: log.records.len(),
            window,
            train_loss: s(Metric::TrainLoss),
            train_accuracy: s(Metric::TrainAccuracy),
            val_loss: s(Metric::ValLoss),
            val_accuracy: s(Metric::ValAccuracy),
        }
    }
}
