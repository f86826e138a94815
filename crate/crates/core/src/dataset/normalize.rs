//! Per-channel z-score normalization fitted on training windows only.

use serde::{Deserialize, Serialize};

use super::window::{Window, WindowedDataset};
use crate::error::{AuditError, Result};

/// Channels whose standard deviation falls below this are divided by 1.
pub const MIN_STD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn divisor(&self, channel: usize) -> f64 {
        let s = self.std[channel];
        if s < MIN_STD {
            1.0
        } else {
            s
        }
    }

    pub fn apply_value(&self, channel: usize, x: f64) -> f64 {
        (x - self.mean[channel]) / self.divisor(channel)
    }

    pub fn invert_value(&self, channel: usize, z: f64) -> f64 {
        z * self.divisor(channel) + self.mean[channel]
    }
}

/// Fit per-channel mean/std over every sample of the given windows.
pub fn fit_normalizer<'a, I>(train: I) -> Result<NormStats>
where
    I: IntoIterator<Item = &'a Window>,
{
    let mut sum: Vec<f64> = Vec::new();
    let mut sum_sq: Vec<f64> = Vec::new();
    let mut n = 0usize;
    let windows: Vec<&Window> = train.into_iter().collect();
    // two-pass for numerical stability
    for w in &windows {
        if sum.is_empty() {
            sum = vec![0.0; w.features.ncols()];
        }
        for row in w.features.rows() {
            for (c, &x) in row.iter().enumerate() {
                sum[c] += x;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(AuditError::EmptyTrainingSplit);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    sum_sq.resize(mean.len(), 0.0);
    for w in &windows {
        for row in w.features.rows() {
            for (c, &x) in row.iter().enumerate() {
                let d = x - mean[c];
                sum_sq[c] += d * d;
            }
        }
    }
    let std = sum_sq.iter().map(|s| (s / n as f64).sqrt()).collect();
    Ok(NormStats { mean, std })
}

/// Transform every window's samples with `stats`; the returned dataset
/// records the stats it was normalized with.
pub fn apply_normalizer(dataset: &WindowedDataset, stats: &NormStats) -> WindowedDataset {
    let mut out = dataset.clone();
    for w in &mut out.windows {
        for mut row in w.features.rows_mut() {
            for (c, x) in row.iter_mut().enumerate() {
                *x = stats.apply_value(c, *x);
            }
        }
    }
    out.norm_stats = Some(stats.clone());
    out
}

/// Undo [`apply_normalizer`].
pub fn invert_normalizer(dataset: &WindowedDataset, stats: &NormStats) -> WindowedDataset {
    let mut out = dataset.clone();
    for w in &mut out.windows {
        for mut row in w.features.rows_mut() {
            for (c, x) in row.iter_mut().enumerate() {
                *x = stats.invert_value(c, *x);
            }
        }
    }
    out.norm_stats = None;
    out
}
