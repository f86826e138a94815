//! Multinomial logistic regression over per-channel window statistics,
//! fitted by full-batch gradient descent on mean cross-entropy.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Per-channel mean and population standard deviation, `[means..., stds...]`.
pub fn extract_features(block: ArrayView2<f64>) -> Vec<f64> {
    let n = block.nrows() as f64;
    let means: Vec<f64> = block.axis_iter(Axis(1)).map(|col| col.sum() / n).collect();
    let stds: Vec<f64> = block
        .axis_iter(Axis(1))
        .zip(&means)
        .map(|(col, m)| (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    means.into_iter().chain(stds).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub step_size: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    /// `[C × F]`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub config: TrainConfig,
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|e| e / sum);
    }
}

/// Class probabilities for `[n × F]` features.
pub fn probabilities(weights: &Array2<f64>, bias: &Array1<f64>, features: &Array2<f64>) -> Array2<f64> {
    let mut logits = features.dot(&weights.t()) + bias;
    softmax_rows(&mut logits);
    logits
}

/// Mean cross-entropy of `(weights, bias)` on labelled features.
pub fn loss(weights: &Array2<f64>, bias: &Array1<f64>, features: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut logits = features.dot(&weights.t()) + bias;
    let mut total = 0.0;
    for (row, &y) in logits.rows_mut().into_iter().zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
        total += lse - row[y];
    }
    total / labels.len() as f64
}

/// Analytic gradient of [`loss`]: `((P − Y)ᵀ X / n, mean(P − Y))`.
pub fn gradient(
    weights: &Array2<f64>,
    bias: &Array1<f64>,
    features: &Array2<f64>,
    labels: &[usize],
) -> (Array2<f64>, Array1<f64>) {
    let n = labels.len() as f64;
    let mut residual = probabilities(weights, bias, features);
    for (mut row, &y) in residual.rows_mut().into_iter().zip(labels) {
        row[y] -= 1.0;
    }
    let grad_w = residual.t().dot(features) / n;
    let grad_b = residual.sum_axis(Axis(0)) / n;
    (grad_w, grad_b)
}

/// Fit from zero-initialized parameters. Every class in `0..num_classes`
/// must appear in `labels`.
pub fn train_baseline(
    features: &Array2<f64>,
    labels: &[usize],
    num_classes: usize,
    config: TrainConfig,
) -> Result<BaselineModel> {
    if features.nrows() != labels.len() {
        return Err(AuditError::Schema(format!(
            "{} feature row(s) for {} label(s)",
            features.nrows(),
            labels.len()
        )));
    }
    let mut seen = vec![false; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(AuditError::Schema(format!("label {l} out of range for {num_classes} classes")));
        }
        seen[l] = true;
    }
    if let Some(absent) = seen.iter().position(|s| !s) {
        return Err(AuditError::ClassAbsent(absent));
    }
    let mut weights = Array2::<f64>::zeros((num_classes, features.ncols()));
    let mut bias = Array1::<f64>::zeros(num_classes);
    for _ in 0..config.epochs {
        let (gw, gb) = gradient(&weights, &bias, features, labels);
        weights.scaled_add(-config.step_size, &gw);
        bias.scaled_add(-config.step_size, &gb);
    }
    if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
        return Err(AuditError::Consistency("training diverged to non-finite parameters".into()));
    }
    Ok(BaselineModel { weights, bias, config })
}

impl BaselineModel {
    pub fn predict(&self, features: &Array2<f64>) -> Array2<f64> {
        probabilities(&self.weights, &self.bias, features)
    }

    pub fn predict_one(&self, features: &[f64]) -> Vec<f64> {
        let x = Array2::from_shape_vec((1, features.len()), features.to_vec()).expect("row vector");
        self.predict(&x).row(0).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_window_features() {
        let block = Array2::from_elem((10, 1), 3.0);
        assert_eq!(extract_features(block.view()), vec![3.0, 0.0]);
    }

    #[test]
    fn two_sample_features() {
        let block = array![[1.0], [3.0]];
        assert_eq!(extract_features(block.view()), vec![2.0, 1.0]);
    }

    #[test]
    fn channel_order() {
        let block = array![[1.0, 10.0], [3.0, 10.0]];
        assert_eq!(extract_features(block.view()), vec![2.0, 10.0, 1.0, 0.0]);
    }

    #[test]
    fn predictions_are_simplexes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let w = Array2::from_shape_fn((4, 3), |_| rng.random_range(-20.0..20.0));
        let b = Array1::from_shape_fn(4, |_| rng.random_range(-5.0..5.0));
        let x = Array2::from_shape_fn((50, 3), |_| rng.random_range(-10.0..10.0));
        for row in probabilities(&w, &b, &x).rows() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-9);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn identical_features_learn_priors() {
        let x = Array2::from_elem((40, 2), 0.5);
        let labels: Vec<usize> = (0..40).map(|i| usize::from(i % 4 == 0)).collect();
        let model = train_baseline(&x, &labels, 2, TrainConfig::default()).unwrap();
        let p = model.predict_one(&[0.5, 0.5]);
        assert_abs_diff_eq!(p[0], 0.75, epsilon = 0.01);
        assert_abs_diff_eq!(p[1], 0.25, epsilon = 0.01);
    }

    #[test]
    fn absent_class_rejected() {
        let x = Array2::zeros((3, 2));
        assert!(matches!(
            train_baseline(&x, &[0, 0, 2], 3, TrainConfig::default()),
            Err(AuditError::ClassAbsent(1))
        ));
    }

    #[test]
    fn zero_epochs_is_uniform() {
        let x = array![[1.0], [-1.0]];
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let m = train_baseline(&x, &[0, 1], 2, cfg).unwrap();
        assert_eq!(m.predict_one(&[3.0]), vec![0.5, 0.5]);
    }
}
