//! Confusion structure of IFC windows: fused probabilities, per-class
//! distribution/relative/absolute confusion, and true→confused chord edges.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::predictions::{argmax, PredictionRecord};

/// Mean probability vector of an IFC window over all contributing records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedDistribution {
    pub window_id: usize,
    pub true_label: usize,
    pub mean_probs: Vec<f64>,
    pub confused_class: usize,
    /// The fused argmax is the true label even though every model was wrong;
    /// `confused_class` then holds the runner-up.
    pub fused_agrees_with_truth: bool,
}

/// Index of the largest entry other than `skip`, ties to the lowest index.
fn argmax_excluding(probs: &[f64], skip: usize) -> usize {
    let mut best: Option<usize> = None;
    for (i, &p) in probs.iter().enumerate() {
        if i == skip {
            continue;
        }
        if best.is_none_or(|b| p > probs[b]) {
            best = Some(i);
        }
    }
    best.expect("at least two classes")
}

/// Fuse the records of each IFC window into an unweighted mean over all
/// `(model, run)` records. Every window needs at least one record of every
/// model in `models`.
pub fn fuse_probabilities(
    records: &[PredictionRecord],
    ifc_windows: &[usize],
    models: &[String],
) -> Result<Vec<FusedDistribution>> {
    let wanted: BTreeSet<usize> = ifc_windows.iter().copied().collect();
    let mut by_window: BTreeMap<usize, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| wanted.contains(&r.window_id)) {
        by_window.entry(r.window_id).or_default().push(r);
    }
    let mut out = Vec::with_capacity(wanted.len());
    for w in wanted {
        let recs = by_window.get(&w).map(Vec::as_slice).unwrap_or(&[]);
        for m in models {
            if !recs.iter().any(|r| &r.model_id == m) {
                return Err(AuditError::Schema(format!("IFC window {w} has no record of model '{m}'")));
            }
        }
        let c = recs[0].probs.len();
        if c < 2 {
            return Err(AuditError::TooFewClasses(c));
        }
        let true_label = recs[0].true_label;
        let mut mean = vec![0.0; c];
        for r in recs {
            if r.probs.len() != c || r.true_label != true_label {
                return Err(AuditError::Schema(format!("records of window {w} disagree on class count or label")));
            }
            for (acc, p) in mean.iter_mut().zip(&r.probs) {
                *acc += p;
            }
        }
        let n = recs.len() as f64;
        mean.iter_mut().for_each(|v| *v /= n);
        let top = argmax(&mean);
        let agrees = top == true_label;
        out.push(FusedDistribution {
            window_id: w,
            true_label,
            confused_class: if agrees { argmax_excluding(&mean, true_label) } else { top },
            mean_probs: mean,
            fused_agrees_with_truth: agrees,
        });
    }
    Ok(out)
}

/// Percentages for one class. Relative and absolute confusion are absent
/// when the class has no IFC window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConfusionRow {
    pub class_id: usize,
    pub name: String,
    /// Share of all windows with this true class.
    pub distribution_pct: f64,
    /// IFC windows of this class over windows of this class.
    pub relative_confusion_pct: Option<f64>,
    /// `distribution × relative / 100`, i.e. IFC windows of this class over all windows.
    pub absolute_confusion_pct: Option<f64>,
    pub windows: usize,
    pub ifc_windows: usize,
}

pub fn default_class_names(num_classes: usize) -> Vec<String> {
    (0..num_classes).map(|c| format!("class_{c}")).collect()
}

pub fn confusion_table(
    ifc_flags: &[bool],
    labels: &[usize],
    num_classes: usize,
    class_names: &[String],
) -> Result<Vec<ClassConfusionRow>> {
    if ifc_flags.len() != labels.len() {
        return Err(AuditError::Schema(format!(
            "{} flag(s) for {} label(s)",
            ifc_flags.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(AuditError::Empty("no windows for the confusion table".into()));
    }
    if class_names.len() != num_classes {
        return Err(AuditError::Schema(format!(
            "{} class name(s) for {num_classes} classes",
            class_names.len()
        )));
    }
    let mut windows = vec![0usize; num_classes];
    let mut ifc = vec![0usize; num_classes];
    for (&l, &f) in labels.iter().zip(ifc_flags) {
        if l >= num_classes {
            return Err(AuditError::Schema(format!("label {l} out of range for {num_classes} classes")));
        }
        windows[l] += 1;
        ifc[l] += usize::from(f);
    }
    let total = labels.len() as f64;
    Ok((0..num_classes)
        .map(|c| {
            let dist = 100.0 * windows[c] as f64 / total;
            let rel = (ifc[c] > 0).then(|| 100.0 * ifc[c] as f64 / windows[c] as f64);
            ClassConfusionRow {
                class_id: c,
                name: class_names[c].clone(),
                distribution_pct: dist,
                relative_confusion_pct: rel,
                absolute_confusion_pct: rel.map(|r| dist * r / 100.0),
                windows: windows[c],
                ifc_windows: ifc[c],
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordEdge {
    #[serde(rename = "from")]
    pub true_class: usize,
    #[serde(rename = "to")]
    pub confused_class: usize,
    pub weight: usize,
}

/// Count IFC windows per `(true, confused)` pair; heaviest first, then by
/// class ids.
pub fn chord_edges(fused: &[FusedDistribution]) -> Vec<ChordEdge> {
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for f in fused {
        *counts.entry((f.true_label, f.confused_class)).or_default() += 1;
    }
    let mut edges: Vec<ChordEdge> = counts
        .into_iter()
        .map(|((t, c), weight)| ChordEdge {
            true_class: t,
            confused_class: c,
            weight,
        })
        .collect();
    edges.sort_by(|a, b| {
        b.weight
            .cmp(&a.weight)
            .then(a.true_class.cmp(&b.true_class))
            .then(a.confused_class.cmp(&b.confused_class))
    });
    edges
}

/// Chord diagram data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordData {
    pub classes: Vec<String>,
    pub edges: Vec<ChordEdge>,
}
