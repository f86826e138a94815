//! Intersect of False Classifications (IFC).
//!
//! For every window count how many models classify it correctly:
//! zero models puts it in the IFC, exactly one model makes it that model's
//! single contribution, two or more makes it common ground. The three
//! shares partition the windows, so
//! `IFC = 100 − common ground − Σ single contributions`.

use serde::{Deserialize, Serialize};

use crate::dataset::WindowedDataset;
use crate::error::{AuditError, Result};
use crate::predictions::{ConsolidatedCorrectness, MergePolicy};

/// Allowed disagreement between the direct and the closure route.
pub const CLOSURE_TOLERANCE: f64 = 1e-9;

/// Model × window correctness, rows in model order, columns in window order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessMatrix {
    pub model_ids: Vec<String>,
    pub window_ids: Vec<usize>,
    rows: Vec<Vec<bool>>,
}

impl CorrectnessMatrix {
    pub fn from_rows(model_ids: Vec<String>, window_ids: Vec<usize>, rows: Vec<Vec<bool>>) -> Result<Self> {
        if model_ids.len() != rows.len() {
            return Err(AuditError::Schema(format!(
                "{} model id(s) for {} row(s)",
                model_ids.len(),
                rows.len()
            )));
        }
        if let Some((m, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != window_ids.len()) {
            return Err(AuditError::Schema(format!(
                "row {m} has {} cell(s), expected {}",
                r.len(),
                window_ids.len()
            )));
        }
        Ok(Self {
            model_ids,
            window_ids,
            rows,
        })
    }

    pub fn num_models(&self) -> usize {
        self.rows.len()
    }

    pub fn num_windows(&self) -> usize {
        self.window_ids.len()
    }

    pub fn row(&self, model: usize) -> &[bool] {
        &self.rows[model]
    }

    pub fn get(&self, model: usize, window: usize) -> bool {
        self.rows[model][window]
    }

    /// Add another model's row.
    pub fn push_row(&mut self, model_id: String, row: Vec<bool>) -> Result<()> {
        if row.len() != self.window_ids.len() {
            return Err(AuditError::Schema(format!(
                "row has {} cell(s), expected {}",
                row.len(),
                self.window_ids.len()
            )));
        }
        self.model_ids.push(model_id);
        self.rows.push(row);
        Ok(())
    }

    /// Number of models correct on each window.
    pub fn correct_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_windows()];
        for row in &self.rows {
            for (c, &ok) in counts.iter_mut().zip(row) {
                *c += usize::from(ok);
            }
        }
        counts
    }
}

/// Lay merged per-model correctness out over `window_ids`. Every cell must
/// be present.
pub fn build_matrix(consolidated: &[ConsolidatedCorrectness], window_ids: &[usize]) -> Result<CorrectnessMatrix> {
    let mut rows = Vec::with_capacity(consolidated.len());
    for cc in consolidated {
        let row = window_ids
            .iter()
            .map(|&w| {
                cc.correct.get(&w).copied().ok_or_else(|| AuditError::MissingCell {
                    model: cc.model_id.clone(),
                    window: w,
                })
            })
            .collect::<Result<Vec<bool>>>()?;
        rows.push(row);
    }
    CorrectnessMatrix::from_rows(
        consolidated.iter().map(|c| c.model_id.clone()).collect(),
        window_ids.to_vec(),
        rows,
    )
}

fn require_windows(matrix: &CorrectnessMatrix) -> Result<f64> {
    if matrix.num_windows() == 0 {
        return Err(AuditError::Empty("correctness matrix has no windows".into()));
    }
    Ok(matrix.num_windows() as f64)
}

/// Per model: percentage of windows only that model classifies correctly.
pub fn single_contributions(matrix: &CorrectnessMatrix) -> Result<Vec<f64>> {
    let w = require_windows(matrix)?;
    let counts = matrix.correct_counts();
    Ok((0..matrix.num_models())
        .map(|m| {
            let singles = matrix
                .row(m)
                .iter()
                .zip(&counts)
                .filter(|(&ok, &c)| ok && c == 1)
                .count();
            100.0 * singles as f64 / w
        })
        .collect())
}

/// Percentage of windows at least two models classify correctly.
pub fn common_ground(matrix: &CorrectnessMatrix) -> Result<f64> {
    let w = require_windows(matrix)?;
    let shared = matrix.correct_counts().iter().filter(|&&c| c >= 2).count();
    Ok(100.0 * shared as f64 / w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfcSummary {
    pub model_ids: Vec<String>,
    pub single_contribution: Vec<f64>,
    pub common_ground: f64,
    pub ifc: f64,
    pub num_windows: usize,
    pub ifc_windows: usize,
    /// `true` where no model is correct, in matrix column order.
    #[serde(skip)]
    pub ifc_flags: Vec<bool>,
}

impl IfcSummary {
    pub fn total_single(&self) -> f64 {
        self.single_contribution.iter().sum()
    }
}

/// IFC computed directly and through the closure identity; the two must agree.
pub fn compute_ifc(matrix: &CorrectnessMatrix) -> Result<IfcSummary> {
    let w = require_windows(matrix)?;
    let singles = single_contributions(matrix)?;
    let cg = common_ground(matrix)?;
    let ifc_flags: Vec<bool> = matrix.correct_counts().iter().map(|&c| c == 0).collect();
    let ifc_windows = ifc_flags.iter().filter(|&&f| f).count();
    let direct = 100.0 * ifc_windows as f64 / w;
    let closure = 100.0 - cg - singles.iter().sum::<f64>();
    if (direct - closure).abs() > CLOSURE_TOLERANCE {
        return Err(AuditError::Consistency(format!(
            "IFC {direct} (no model correct) vs {closure} (100 - common ground - singles)"
        )));
    }
    Ok(IfcSummary {
        model_ids: matrix.model_ids.clone(),
        single_contribution: singles,
        common_ground: cg,
        ifc: direct,
        num_windows: matrix.num_windows(),
        ifc_windows,
        ifc_flags,
    })
}

/// Spread per-window values over samples, taking the maximum over every
/// window covering a sample; uncovered samples get `T::default()`.
pub fn merge_to_samples<T: Copy + Ord + Default>(values: &[T], dataset: &WindowedDataset) -> Vec<T> {
    assert_eq!(values.len(), dataset.windows.len(), "one value per window");
    let mut out = vec![T::default(); dataset.total_samples];
    merge_into(&mut out, values, dataset);
    out
}

/// Max-merge per-window values into an existing sample buffer.
pub fn merge_into<T: Copy + Ord>(samples: &mut [T], values: &[T], dataset: &WindowedDataset) {
    for (w, &v) in dataset.windows.iter().zip(values) {
        for s in &mut samples[w.start_sample..w.end_sample] {
            if v > *s {
                *s = v;
            }
        }
    }
}

/// A sample is flagged when any window covering it is flagged.
pub fn merge_flags_to_samples(ifc_flags: &[bool], dataset: &WindowedDataset) -> Vec<bool> {
    merge_to_samples(ifc_flags, dataset)
}

/// Flags and summary under one merge policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyIfc {
    pub policy: MergePolicy,
    #[serde(flatten)]
    pub summary: IfcSummary,
}
