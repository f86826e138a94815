//! End-to-end stages: per-fold baseline training and the full audit of a
//! prediction log against its windowed dataset.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confusion::{chord_edges, confusion_table, default_class_names, fuse_probabilities, ChordData, ChordEdge, ClassConfusionRow, FusedDistribution};
use crate::dataset::{apply_normalizer, fit_normalizer, FoldPlan, WindowedDataset};
use crate::error::{AuditError, Result};
use crate::ifc::{build_matrix, compute_ifc, merge_flags_to_samples, CorrectnessMatrix, IfcSummary};
use crate::mask::{build_mask, MaskSequence, MaskSummary};
use crate::metrics::{model_scores, ModelScore};
use crate::predictions::{
    best_hyperparams, consolidate, filter_to_best, validate_records, LogSchema, MergePolicy, ModelKey,
    PredictionRecord,
};
use crate::runlength::{run_lengths_bounded, Bin, RunLengthHistogram};
use crate::synth::{extract_features, train_baseline, TrainConfig};

/// Which window statistics a baseline variant sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    MeanStd,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelVariant {
    pub id: String,
    pub features: FeatureSet,
}

/// The baseline ensemble trained per fold. Each run fits on a class-stratified
/// bootstrap of the training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEnsemble {
    pub dataset_id: String,
    pub config_id: String,
    pub variants: Vec<ModelVariant>,
    pub runs: u32,
    pub train: TrainConfig,
}

impl Default for BaselineEnsemble {
    fn default() -> Self {
        Self {
            dataset_id: "synthetic".into(),
            config_id: "lr0.1_ep200".into(),
            variants: vec![
                ModelVariant {
                    id: "logreg_meanstd".into(),
                    features: FeatureSet::MeanStd,
                },
                ModelVariant {
                    id: "logreg_mean".into(),
                    features: FeatureSet::Mean,
                },
            ],
            runs: 2,
            train: TrainConfig::default(),
        }
    }
}

fn feature_matrix(dataset: &WindowedDataset, ids: &[usize], set: FeatureSet) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = ids
        .iter()
        .map(|&i| {
            let mut f = extract_features(dataset.windows[i].features.view());
            if set == FeatureSet::Mean {
                f.truncate(f.len() / 2);
            }
            f
        })
        .collect();
    let width = rows.first().map_or(0, Vec::len);
    Array2::from_shape_vec((rows.len(), width), rows.into_iter().flatten().collect()).expect("equal-width rows")
}

/// Resample each class with replacement to its original count.
fn stratified_bootstrap(ids: &[usize], labels: &[usize], num_classes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for &i in ids {
        by_class[labels[i]].push(i);
    }
    let mut out = Vec::with_capacity(ids.len());
    for members in &by_class {
        for _ in 0..members.len() {
            out.push(*members.choose(rng).expect("non-empty class"));
        }
    }
    out
}

fn run_seed(base: u64, fold: usize, run: u32) -> u64 {
    base ^ (fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (u64::from(run) + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Train every variant and run on each fold's training windows and predict
/// its held-out windows. Records come back ordered by fold, variant, run,
/// window.
pub fn train_fold_predictions(
    dataset: &WindowedDataset,
    plan: &FoldPlan,
    ensemble: &BaselineEnsemble,
) -> Result<Vec<PredictionRecord>> {
    plan.validate(dataset.len())?;
    let labels = dataset.labels();
    let fold_of = plan.fold_of_window(dataset.len());
    let per_fold: Vec<Result<Vec<PredictionRecord>>> = plan
        .folds
        .par_iter()
        .map(|fold| {
            let train_ids: Vec<usize> = (0..dataset.len()).filter(|&i| fold_of[i] != fold.fold_id).collect();
            let stats = fit_normalizer(train_ids.iter().map(|&i| &dataset.windows[i]))?;
            let normalized = apply_normalizer(dataset, &stats);
            let test_ids = &fold.test_window_ids;
            let mut out = Vec::new();
            for variant in &ensemble.variants {
                let test_x = feature_matrix(&normalized, test_ids, variant.features);
                for run in 0..ensemble.runs {
                    let seed = run_seed(ensemble.train.seed, fold.fold_id, run);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let sample = stratified_bootstrap(&train_ids, &labels, dataset.num_classes, &mut rng);
                    let x = feature_matrix(&normalized, &sample, variant.features);
                    let y: Vec<usize> = sample.iter().map(|&i| labels[i]).collect();
                    let cfg = TrainConfig { seed, ..ensemble.train };
                    let model = train_baseline(&x, &y, dataset.num_classes, cfg)?;
                    let probs = model.predict(&test_x);
                    for (row, &w) in probs.rows().into_iter().zip(test_ids) {
                        out.push(PredictionRecord {
                            dataset_id: ensemble.dataset_id.clone(),
                            model_id: variant.id.clone(),
                            config_id: ensemble.config_id.clone(),
                            run_id: run,
                            fold_id: fold.fold_id as u32,
                            window_id: w,
                            true_label: labels[w],
                            probs: row.to_vec(),
                        });
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_fold {
        records.extend(r?);
    }
    Ok(records)
}

/// Everything derived from one prediction log.
#[derive(Debug, Clone)]
pub struct Audit {
    pub dataset_id: String,
    pub policy: MergePolicy,
    pub class_names: Vec<String>,
    pub best_configs: BTreeMap<ModelKey, String>,
    /// Records of the chosen configs only.
    pub records: Vec<PredictionRecord>,
    pub matrix: CorrectnessMatrix,
    pub summary: IfcSummary,
    pub sample_flags: Vec<bool>,
    pub histogram: RunLengthHistogram,
    pub fused: Vec<FusedDistribution>,
    pub confusion: Vec<ClassConfusionRow>,
    pub edges: Vec<ChordEdge>,
    pub mask: MaskSequence,
    pub scores: Vec<ModelScore>,
}

/// Run the whole audit: hyperparameter selection, run merging, IFC,
/// confusion analysis, run lengths and the trinary mask.
pub fn audit(
    dataset: &WindowedDataset,
    records: &[PredictionRecord],
    policy: MergePolicy,
    class_names: Option<Vec<String>>,
) -> Result<Audit> {
    if records.is_empty() {
        return Err(AuditError::Empty("prediction log holds no records".into()));
    }
    let dataset_id = records[0].dataset_id.clone();
    if let Some(other) = records.iter().find(|r| r.dataset_id != dataset_id) {
        return Err(AuditError::Schema(format!(
            "log mixes datasets '{dataset_id}' and '{}'",
            other.dataset_id
        )));
    }
    validate_records(
        records,
        Some(LogSchema {
            num_classes: dataset.num_classes,
            num_windows: dataset.len(),
        }),
    )?;
    let class_names = class_names.unwrap_or_else(|| default_class_names(dataset.num_classes));

    let best_configs = best_hyperparams(records)?;
    let chosen = filter_to_best(records, &best_configs);
    let consolidated = consolidate(&chosen, policy)?;
    let window_ids: Vec<usize> = (0..dataset.len()).collect();
    let matrix = build_matrix(&consolidated, &window_ids)?;
    let summary = compute_ifc(&matrix)?;

    for (r, w) in chosen.iter().map(|r| (r, &dataset.windows[r.window_id])) {
        if r.true_label != w.label {
            return Err(AuditError::Schema(format!(
                "record for window {} has label {}, dataset says {}",
                r.window_id, r.true_label, w.label
            )));
        }
    }

    let sample_flags = merge_flags_to_samples(&summary.ifc_flags, dataset);
    let histogram = run_lengths_bounded(&summary.ifc_flags, &dataset.recording_of_windows());
    let ifc_windows: Vec<usize> = window_ids.iter().copied().filter(|&w| summary.ifc_flags[w]).collect();
    let fused = fuse_probabilities(&chosen, &ifc_windows, &matrix.model_ids)?;
    let confusion = confusion_table(&summary.ifc_flags, &dataset.labels(), dataset.num_classes, &class_names)?;
    let edges = chord_edges(&fused);
    let mask = build_mask(&summary.ifc_flags, &fused, dataset)?;
    let scores = model_scores(&chosen, dataset.num_classes);

    Ok(Audit {
        dataset_id,
        policy,
        class_names,
        best_configs,
        records: chosen,
        matrix,
        summary,
        sample_flags,
        histogram,
        fused,
        confusion,
        edges,
        mask,
        scores,
    })
}

/// Single contributions, common ground and IFC in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfcRow {
    pub models: Vec<String>,
    pub single_contribution_pct: Vec<f64>,
    pub common_ground_pct: f64,
    pub ifc_pct: f64,
    pub num_windows: usize,
    pub ifc_windows: usize,
    pub policy: MergePolicy,
}

impl IfcRow {
    pub fn new(summary: &IfcSummary, policy: MergePolicy) -> Self {
        Self {
            models: summary.model_ids.clone(),
            single_contribution_pct: summary.single_contribution.clone(),
            common_ground_pct: summary.common_ground,
            ifc_pct: summary.ifc,
            num_windows: summary.num_windows,
            ifc_windows: summary.ifc_windows,
            policy,
        }
    }
}

/// Bundled summary of an audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub dataset: String,
    pub num_windows: usize,
    pub num_classes: usize,
    pub best_configs: BTreeMap<String, String>,
    pub ifc: IfcRow,
    pub mask: MaskSummary,
    pub confusion: Vec<ClassConfusionRow>,
    pub histogram: Vec<Bin>,
    pub scores: Vec<ModelScore>,
    /// IFC windows whose fused argmax is the true label.
    pub fused_agrees_with_truth: usize,
    /// Every IFC window of a two-class problem is major by construction.
    pub binary_mask_degenerate: bool,
}

impl Audit {
    pub fn ifc_row(&self) -> IfcRow {
        IfcRow::new(&self.summary, self.policy)
    }

    pub fn mask_summary(&self) -> MaskSummary {
        MaskSummary::new(self.mask.distribution, self.policy)
    }

    pub fn chord_data(&self) -> ChordData {
        ChordData {
            classes: self.class_names.clone(),
            edges: self.edges.clone(),
        }
    }

    pub fn report(&self) -> Report {
        Report {
            dataset: self.dataset_id.clone(),
            num_windows: self.summary.num_windows,
            num_classes: self.class_names.len(),
            best_configs: self
                .best_configs
                .iter()
                .map(|((_, model), config)| (model.clone(), config.clone()))
                .collect(),
            ifc: self.ifc_row(),
            mask: self.mask_summary(),
            confusion: self.confusion.clone(),
            histogram: self.histogram.bins.clone(),
            scores: self.scores.clone(),
            fused_agrees_with_truth: self.fused.iter().filter(|f| f.fused_agrees_with_truth).count(),
            binary_mask_degenerate: self.class_names.len() == 2,
        }
    }
}
