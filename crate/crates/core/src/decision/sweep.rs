//! Accuracy as a function of the number of views aggregated per object.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{decide_from_predictions, decision_binary_metrics, ConfidenceModel, DecisionError};
use crate::class::GlitchClass;
use crate::corpus::{sample_id, CorpusManifest, Split, SplitData};
use crate::metrics::{predict, BinaryMetrics, PredictionRecord, EVAL_BATCH};
use crate::net::{Classifier, Parameters};
use crate::synth::synth_sample;

/// All views of one object rendered with one glitch class, sorted by view id.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewUnit {
    pub object_id: u32,
    pub class: GlitchClass,
    pub views: Vec<PredictionRecord>,
}

/// Predicts every `(object, class)` unit of `split`. Units with fewer than
/// `views_per_unit` corpus views are topped up with freshly rendered views
/// whose ids continue past the corpus range with the same class cycle.
pub fn unit_predictions(
    net: &Classifier,
    params: &Parameters<f32>,
    manifest: &CorpusManifest,
    split: Split,
    views_per_unit: usize,
) -> Result<Vec<ViewUnit>, DecisionError> {
    let mut data = SplitData::load(manifest, split)?;
    let mut have: BTreeMap<(u32, usize), usize> = BTreeMap::new();
    for i in 0..data.len() {
        *have.entry((data.object_ids[i], data.labels[i])).or_default() += 1;
    }
    let base = manifest.config.views_per_object;
    let jobs: Vec<(u32, u32, GlitchClass)> = have
        .iter()
        .flat_map(|(&(object, label), &count)| {
            let class = GlitchClass::from_index(label).expect("five-class label");
            (0..views_per_unit.saturating_sub(count) as u32)
                .map(move |j| (object, base + label as u32 + j * GlitchClass::COUNT as u32, class))
        })
        .collect();
    if !jobs.is_empty() {
        let synth = manifest.config.synth_config()?;
        let frames = jobs
            .par_iter()
            .map(|&(o, v, c)| synth_sample(c, o, v, manifest.config.master_seed, &synth))
            .collect::<Result<Vec<_>, _>>()?;
        for (&(o, v, c), frame) in jobs.iter().zip(frames) {
            data.push(sample_id(o, v), o, v, c.index(), frame.pixels);
        }
    }
    let predictions = predict(net, params, &data, EVAL_BATCH)?;
    let mut units: BTreeMap<(u32, GlitchClass), Vec<PredictionRecord>> = BTreeMap::new();
    for r in predictions.records {
        units.entry((r.object_id, r.true_class)).or_default().push(r);
    }
    Ok(units
        .into_iter()
        .map(|((object_id, class), mut views)| {
            views.sort_by_key(|r| r.view_id);
            ViewUnit { object_id, class, views }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationRow {
    pub k: usize,
    pub units: usize,
    pub accuracy: f64,
    pub binary: BinaryMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationTable {
    pub rows: Vec<AggregationRow>,
}

impl AggregationTable {
    pub fn to_markdown(&self) -> String {
        let ks: Vec<String> = self.rows.iter().map(|r| r.k.to_string()).collect();
        let acc: Vec<String> = self.rows.iter().map(|r| format!("{:.3}", r.accuracy)).collect();
        format!("| # Images | {} |\n|---|{}\n| Accuracy | {} |\n", ks.join(" | "), "---|".repeat(ks.len()), acc.join(" | "))
    }
}

/// Object-level five-class accuracy for each `k` in `k_list`.
pub fn aggregation_sweep(
    units: &[ViewUnit],
    k_list: &[usize],
    model: Option<&ConfidenceModel>,
) -> Result<AggregationTable, DecisionError> {
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let decisions = units
            .iter()
            .map(|u| {
                let refs: Vec<&PredictionRecord> = u.views.iter().collect();
                decide_from_predictions(&refs, k, model)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let hits = decisions.iter().zip(units).filter(|(d, u)| d.predicted == u.class).count();
        rows.push(AggregationRow {
            k,
            units: units.len(),
            accuracy: if units.is_empty() { 0.0 } else { hits as f64 / units.len() as f64 },
            binary: decision_binary_metrics(&decisions),
        });
    }
    Ok(AggregationTable { rows })
}
