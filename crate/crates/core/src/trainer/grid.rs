//! Learning-rate and batch-size sweeps summarized as comparison tables.

use serde::{Deserialize, Serialize};

use super::{summarize_last_epochs, train_on, Metric, TrainConfig, TrainData, TrainError, TrainLog};
use crate::metrics::WindowStat;
use crate::net::ClassifierConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub value: String,
    pub val_accuracy: Option<WindowStat>,
    pub train_accuracy: WindowStat,
    pub log: TrainLog,
}

/// One column per swept value; cells read `mean (std)` over the trailing
/// window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub parameter: String,
    pub caption: String,
    pub window: usize,
    pub rows: Vec<GridRow>,
}

impl GridTable {
    fn cells(&self) -> Vec<Vec<String>> {
        let fmt = |s: &Option<WindowStat>| s.map_or("n/a".to_string(), |s| s.to_string());
        let mut header = vec![self.parameter.clone()];
        header.extend(self.rows.iter().map(|r| r.value.clone()));
        let mut val = vec!["Accuracy (Validation)".to_string()];
        val.extend(self.rows.iter().map(|r| fmt(&r.val_accuracy)));
        let mut train = vec!["Accuracy (Training)".to_string()];
        train.extend(self.rows.iter().map(|r| fmt(&Some(r.train_accuracy))));
        vec![header, val, train]
    }

    pub fn to_markdown(&self) -> String {
        let cells = self.cells();
        let mut out = format!("{}\n\n", self.caption);
        for (i, row) in cells.iter().enumerate() {
            out.push_str(&format!("| {} |\n", row.join(" | ")));
            if i == 0 {
                out.push_str(&format!("|{}\n", "---|".repeat(row.len())));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.cells() {
            w.write_record(&row).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

fn run(
    data: &TrainData,
    model: &ClassifierConfig,
    configs: Vec<(String, TrainConfig)>,
    window: usize,
    parameter: &str,
    caption: String,
) -> Result<GridTable, TrainError> {
    let window = configs.iter().map(|(_, c)| c.epochs).fold(window, usize::min);
    let mut rows = Vec::with_capacity(configs.len());
    for (value, mut cfg) in configs {
        cfg.checkpoint_path = None;
        let outcome = train_on(data, model, &cfg)?;
        let log = outcome.log;
        rows.push(GridRow {
            value,
            val_accuracy: summarize_last_epochs(&log, window, Metric::ValAccuracy).ok(),
            train_accuracy: summarize_last_epochs(&log, window, Metric::TrainAccuracy)?,
            log,
        });
    }
    Ok(GridTable { parameter: parameter.into(), caption, window, rows })
}

/// Trains once per learning rate with everything else from `base`.
pub fn lr_grid(
    data: &TrainData,
    model: &ClassifierConfig,
    base: &TrainConfig,
    rates: &[f64],
    window: usize,
) -> Result<GridTable, TrainError> {
    let configs = rates
        .iter()
        .map(|&lr| {
            let mut c = base.clone();
            c.adam.learning_rate = lr;
            (format!("{lr:e}"), c)
        })
        .collect();
    let caption = format!("Exploration of the learning rate: {} with constant batch size {}", model.name(), base.batch_size);
    run(data, model, configs, window, "Learning Rate", caption)
}

/// Trains once per batch size with everything else from `base`.
pub fn batch_grid(
    data: &TrainData,
    model: &ClassifierConfig,
    base: &TrainConfig,
    sizes: &[usize],
    window: usize,
) -> Result<GridTable, TrainError> {
    let configs = sizes
        .iter()
        .map(|&b| {
            let mut c = base.clone();
            c.batch_size = b;
            (b.to_string(), c)
        })
        .collect();
    let caption = format!("Exploration of the batch size: {} with constant learning rate {:e}", model.name(), base.adam.learning_rate);
    run(data, model, configs, window, "Batch Size", caption)
}
