//! Accuracy, support-weighted F1 and mean ± std over runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::predictions::PredictionRecord;

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> f64 {
    assert_eq!(y_true.len(), y_pred.len(), "label and prediction lengths differ");
    if y_true.is_empty() {
        return 0.0;
    }
    let hits = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    hits as f64 / y_true.len() as f64
}

/// F1 per class averaged with class support as weights. Classes without
/// support contribute nothing; a class never predicted has F1 0.
pub fn weighted_f1(y_true: &[usize], y_pred: &[usize], num_classes: usize) -> f64 {
    assert_eq!(y_true.len(), y_pred.len(), "label and prediction lengths differ");
    if y_true.is_empty() {
        return 0.0;
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut total = 0.0;
    for c in 0..num_classes {
        let support = tp[c] + fn_[c];
        if support == 0 {
            continue;
        }
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        let f1 = if denom == 0 { 0.0 } else { 2.0 * tp[c] as f64 / denom as f64 };
        total += f1 * support as f64;
    }
    total / y_true.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single value.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    if n == 0 {
        return MeanStd { mean: 0.0, std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    MeanStd { mean, std }
}

/// Per-model scores over runs, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    pub config: String,
    pub runs: usize,
    pub accuracy_pct: MeanStd,
    pub weighted_f1_pct: MeanStd,
}

/// Score each `(model, config)` in `records`: out-of-fold accuracy and
/// weighted F1 per run, summarized as mean ± std over runs.
pub fn model_scores(records: &[PredictionRecord], num_classes: usize) -> Vec<ModelScore> {
    type RunPairs = BTreeMap<u32, (Vec<usize>, Vec<usize>)>;
    let mut grouped: BTreeMap<(&str, &str), RunPairs> = BTreeMap::new();
    for r in records {
        let e = grouped
            .entry((&r.model_id, &r.config_id))
            .or_default()
            .entry(r.run_id)
            .or_default();
        e.0.push(r.true_label);
        e.1.push(r.predicted());
    }
    grouped
        .into_iter()
        .map(|((model, config), runs)| {
            let acc: Vec<f64> = runs.values().map(|(t, p)| 100.0 * accuracy(t, p)).collect();
            let f1: Vec<f64> = runs
                .values()
                .map(|(t, p)| 100.0 * weighted_f1(t, p, num_classes))
                .collect();
            ModelScore {
                model: model.to_string(),
                config: config.to_string(),
                runs: runs.len(),
                accuracy_pct: mean_std(&acc),
                weighted_f1_pct: mean_std(&f1),
            }
        })
        .collect()
}
