//! Per-window class-probability records: JSONL ingestion, validation,
//! hyperparameter selection and run merging.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// One model/config/run/fold prediction for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    #[serde(rename = "dataset")]
    pub dataset_id: String,
    #[serde(rename = "model")]
    pub model_id: String,
    #[serde(rename = "config")]
    pub config_id: String,
    #[serde(rename = "run")]
    pub run_id: u32,
    #[serde(rename = "fold")]
    pub fold_id: u32,
    #[serde(rename = "window")]
    pub window_id: usize,
    #[serde(rename = "label")]
    pub true_label: usize,
    pub probs: Vec<f64>,
}

/// Lowest index of the maximum; NaN never wins.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

impl PredictionRecord {
    /// Argmax (ties to the lowest class index) equals the true label.
    pub fn is_correct(&self) -> bool {
        argmax(&self.probs) == self.true_label
    }

    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

pub fn is_correct(record: &PredictionRecord) -> bool {
    record.is_correct()
}

/// Expected shape of the dataset the records refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogSchema {
    pub num_classes: usize,
    pub num_windows: usize,
}

fn check_simplex(probs: &[f64]) -> std::result::Result<(), String> {
    if probs.is_empty() {
        return Err("empty probability vector".into());
    }
    if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
        return Err(format!("probability {i} is {p}, expected a finite value >= 0"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(format!("probabilities sum to {sum}, not 1 within {SIMPLEX_TOLERANCE}"));
    }
    Ok(())
}

/// Validate a batch: simplex, class count, window range, unique
/// `(dataset, model, config, run, window)` keys.
pub fn validate_records(records: &[PredictionRecord], schema: Option<LogSchema>) -> Result<()> {
    let mut keys = HashSet::new();
    let mut classes: BTreeMap<&str, usize> = BTreeMap::new();
    for (index, r) in records.iter().enumerate() {
        check_simplex(&r.probs).map_err(|m| AuditError::record(index, m))?;
        let c = *classes.entry(r.dataset_id.as_str()).or_insert(r.probs.len());
        if r.probs.len() != c {
            return Err(AuditError::record(
                index,
                format!("{} probabilities, dataset '{}' has {c} classes", r.probs.len(), r.dataset_id),
            ));
        }
        if r.true_label >= c {
            return Err(AuditError::record(index, format!("label {} out of range for {c} classes", r.true_label)));
        }
        if let Some(s) = schema {
            if c != s.num_classes {
                return Err(AuditError::record(
                    index,
                    format!("{c} probabilities, expected {} classes", s.num_classes),
                ));
            }
            if r.window_id >= s.num_windows {
                return Err(AuditError::record(
                    index,
                    format!("unknown window_id {} (dataset has {} windows)", r.window_id, s.num_windows),
                ));
            }
        }
        let key = (&r.dataset_id, &r.model_id, &r.config_id, r.run_id, r.window_id);
        if !keys.insert(key) {
            return Err(AuditError::record(
                index,
                format!(
                    "duplicate record for model '{}' config '{}' run {} window {}",
                    r.model_id, r.config_id, r.run_id, r.window_id
                ),
            ));
        }
    }
    Ok(())
}

/// Read JSONL records and validate them. Blank lines are skipped; the record
/// index in errors counts records, not lines.
pub fn read_records<R: BufRead>(input: R, schema: Option<LogSchema>) -> Result<Vec<PredictionRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line)
            .map_err(|e| AuditError::record(records.len(), format!("malformed record: {e}")))?;
        records.push(rec);
    }
    validate_records(&records, schema)?;
    Ok(records)
}

/// One JSON object per line; floats use the shortest round-trip form.
pub fn write_records<W: Write>(mut out: W, records: &[PredictionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Mean over runs of the per-run out-of-fold accuracy for one
/// `(dataset, model, config)`.
fn config_accuracy(records: &[&PredictionRecord]) -> f64 {
    let mut per_run: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = per_run.entry(r.run_id).or_default();
        e.0 += usize::from(r.is_correct());
        e.1 += 1;
    }
    let accs: Vec<f64> = per_run.values().map(|&(c, n)| c as f64 / n as f64).collect();
    accs.iter().sum::<f64>() / accs.len() as f64
}

pub type ModelKey = (String, String);

/// Pick, per `(dataset, model)`, the config with the highest mean
/// out-of-fold accuracy; ties go to the lexicographically smallest config id.
///
/// Every `(config, run)` must cover every fold seen for its dataset.
pub fn best_hyperparams(records: &[PredictionRecord]) -> Result<BTreeMap<ModelKey, String>> {
    let mut folds: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    let mut grouped: BTreeMap<(&str, &str), BTreeMap<&str, Vec<&PredictionRecord>>> = BTreeMap::new();
    for r in records {
        folds.entry(&r.dataset_id).or_default().insert(r.fold_id);
        grouped
            .entry((&r.dataset_id, &r.model_id))
            .or_default()
            .entry(&r.config_id)
            .or_default()
            .push(r);
    }

    let mut best = BTreeMap::new();
    for ((dataset, model), configs) in grouped {
        let all_folds = &folds[dataset];
        let mut choice: Option<(&str, f64)> = None;
        for (config, recs) in configs {
            let mut run_folds: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
            for r in &recs {
                run_folds.entry(r.run_id).or_default().insert(r.fold_id);
            }
            for (run, covered) in &run_folds {
                let missing: Vec<u32> = all_folds.difference(covered).copied().collect();
                if !missing.is_empty() {
                    return Err(AuditError::FoldCoverage(format!(
                        "dataset '{dataset}' model '{model}' config '{config}' run {run} is missing fold(s) {missing:?}"
                    )));
                }
            }
            let acc = config_accuracy(&recs);
            // configs iterate in ascending id order, so strict > keeps the smallest id on ties
            match choice {
                Some((_, a)) if acc <= a + 1e-12 => {}
                _ => choice = Some((config, acc)),
            }
        }
        if let Some((config, _)) = choice {
            best.insert((dataset.to_string(), model.to_string()), config.to_string());
        }
    }
    Ok(best)
}

/// Keep only records of the chosen config per `(dataset, model)`.
pub fn filter_to_best(records: &[PredictionRecord], best: &BTreeMap<ModelKey, String>) -> Vec<PredictionRecord> {
    records
        .iter()
        .filter(|r| {
            best.get(&(r.dataset_id.clone(), r.model_id.clone()))
                .is_some_and(|c| *c == r.config_id)
        })
        .cloned()
        .collect()
}

/// How per-run correctness of a window is merged into one verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergePolicy {
    /// Correct in at least one run.
    Any,
    /// Correct in strictly more than half of the runs.
    #[default]
    Majority,
    /// Correct in every run.
    All,
}

impl MergePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            MergePolicy::Any => "any",
            MergePolicy::Majority => "majority",
            MergePolicy::All => "all",
        }
    }

    pub fn verdict(self, correct_runs: usize, runs: usize) -> bool {
        match self {
            MergePolicy::Any => correct_runs >= 1,
            MergePolicy::Majority => 2 * correct_runs > runs,
            MergePolicy::All => correct_runs == runs,
        }
    }
}

impl std::str::FromStr for MergePolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "any" => Ok(MergePolicy::Any),
            "majority" => Ok(MergePolicy::Majority),
            "all" => Ok(MergePolicy::All),
            other => Err(format!("unknown merge policy '{other}', expected any|majority|all")),
        }
    }
}

/// Merged correctness of one model on each window it has records for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsolidatedCorrectness {
    pub model_id: String,
    pub merge_policy: MergePolicy,
    pub correct: BTreeMap<usize, bool>,
}

/// Merge the runs of one model. All windows must have the same number of runs.
pub fn merge_runs(records: &[&PredictionRecord], policy: MergePolicy) -> Result<ConsolidatedCorrectness> {
    let Some(first) = records.first() else {
        return Err(AuditError::Empty("no records to merge".into()));
    };
    let model_id = first.model_id.clone();
    let mut tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in records {
        if r.model_id != model_id {
            return Err(AuditError::Schema(format!(
                "merge_runs got records of '{}' and '{}'",
                model_id, r.model_id
            )));
        }
        let e = tally.entry(r.window_id).or_default();
        e.0 += usize::from(r.is_correct());
        e.1 += 1;
    }
    let runs = tally.values().next().map(|t| t.1).unwrap_or(0);
    if let Some((w, t)) = tally.iter().find(|(_, t)| t.1 != runs) {
        return Err(AuditError::RunCount(format!(
            "model '{model_id}': window {w} has {} run(s), others have {runs}",
            t.1
        )));
    }
    let correct = tally
        .into_iter()
        .map(|(w, (c, n))| (w, policy.verdict(c, n)))
        .collect();
    Ok(ConsolidatedCorrectness {
        model_id,
        merge_policy: policy,
        correct,
    })
}

/// Merge runs of every model present, in model id order.
pub fn consolidate(records: &[PredictionRecord], policy: MergePolicy) -> Result<Vec<ConsolidatedCorrectness>> {
    let mut by_model: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_model.entry(&r.model_id).or_default().push(r);
    }
    by_model.values().map(|recs| merge_runs(recs, policy)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(model: &str, config: &str, run: u32, fold: u32, window: usize, label: usize, probs: &[f64]) -> PredictionRecord {
        PredictionRecord {
            dataset_id: "d".into(),
            model_id: model.into(),
            config_id: config.into(),
            run_id: run,
            fold_id: fold,
            window_id: window,
            true_label: label,
            probs: probs.to_vec(),
        }
    }

    #[test]
    fn simplex_checks() {
        assert!(validate_records(&[rec("m", "c", 0, 0, 0, 0, &[0.5, 0.5])], None).is_ok());
        let err = validate_records(&[rec("m", "c", 0, 0, 0, 0, &[0.6, 0.5])], None).unwrap_err();
        assert!(matches!(err, AuditError::Record { index: 0, .. }));
        let err = validate_records(&[rec("m", "c", 0, 0, 0, 0, &[1.2, -0.2])], None).unwrap_err();
        assert!(matches!(err, AuditError::Record { index: 0, .. }));
    }

    #[test]
    fn duplicate_key_rejected() {
        let rs = vec![
            rec("m", "c", 0, 0, 3, 0, &[0.5, 0.5]),
            rec("m", "c", 1, 0, 3, 0, &[0.5, 0.5]),
            rec("m", "c", 0, 1, 3, 0, &[0.5, 0.5]),
        ];
        let err = validate_records(&rs, None).unwrap_err();
        assert!(matches!(err, AuditError::Record { index: 2, .. }), "{err}");
    }

    #[test]
    fn schema_checks_window_and_classes() {
        let schema = Some(LogSchema {
            num_classes: 2,
            num_windows: 4,
        });
        let err = validate_records(&[rec("m", "c", 0, 0, 4, 0, &[0.5, 0.5])], schema).unwrap_err();
        assert!(err.to_string().contains("unknown window_id"));
        let err = validate_records(&[rec("m", "c", 0, 0, 1, 0, &[0.2, 0.3, 0.5])], schema).unwrap_err();
        assert!(err.to_string().contains("expected 2 classes"));
    }

    #[test]
    fn jsonl_format_and_round_trip() {
        let rs = vec![
            rec("cnn", "bs064_lr0.01", 0, 2, 123, 1, &[0.1, 0.7, 0.2]),
            rec("cnn", "bs064_lr0.01", 1, 2, 123, 1, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            r#"{"dataset":"d","model":"cnn","config":"bs064_lr0.01","run":0,"fold":2,"window":123,"label":1,"probs":[0.1,0.7,0.2]}"#
        ));
        assert!(text.contains("0.3333333333333333"));
        assert_eq!(read_records(buf.as_slice(), None).unwrap(), rs);
    }

    #[test]
    fn malformed_line_reports_index() {
        let text = "{\"dataset\":\"d\",\"model\":\"m\",\"config\":\"c\",\"run\":0,\"fold\":0,\"window\":0,\"label\":0,\"probs\":[1.0]}\n\n{oops}\n";
        let err = read_records(text.as_bytes(), None).unwrap_err();
        assert!(matches!(err, AuditError::Record { index: 1, .. }), "{err}");
    }

    #[test]
    fn correctness_tie_rule() {
        assert!(rec("m", "c", 0, 0, 0, 1, &[0.1, 0.9]).is_correct());
        assert!(!rec("m", "c", 0, 0, 0, 1, &[0.5, 0.5]).is_correct());
        assert!(rec("m", "c", 0, 0, 0, 0, &[0.5, 0.5]).is_correct());
        assert!(rec("m", "c", 0, 0, 0, 2, &[0.3, 0.3, 0.4]).is_correct());
    }

    /// `correct` of `n` windows right, spread over two folds.
    fn config_records(model: &str, config: &str, runs: u32, n: usize, correct: &[usize]) -> Vec<PredictionRecord> {
        let mut out = Vec::new();
        for run in 0..runs {
            for w in 0..n {
                let right = w < correct[run as usize];
                let probs = if right { [0.9, 0.1] } else { [0.1, 0.9] };
                out.push(rec(model, config, run, (w % 2) as u32, w, 0, &probs));
            }
        }
        out
    }

    #[test]
    fn best_config_is_argmax() {
        let mut rs = config_records("m", "A", 1, 100, &[74]);
        rs.extend(config_records("m", "B", 1, 100, &[70]));
        let best = best_hyperparams(&rs).unwrap();
        assert_eq!(best[&("d".to_string(), "m".to_string())], "A");
    }

    #[test]
    fn best_config_tie_goes_to_smallest_id() {
        let mut rs = config_records("m", "bs256_lr0.01", 1, 100, &[70]);
        rs.extend(config_records("m", "bs064_lr0.01", 1, 100, &[70]));
        let best = best_hyperparams(&rs).unwrap();
        assert_eq!(best[&("d".to_string(), "m".to_string())], "bs064_lr0.01");
    }

    #[test]
    fn three_by_three_grid() {
        // batch {64,128,256} x lr {0.001,0.01,0.1}; run accuracies chosen so the
        // means (by hand) are 0.61 0.65 0.60 / 0.70 0.72 0.66 / 0.69 0.715 0.64
        let grid = [
            ("bs064_lr0.001", [60, 62]),
            ("bs064_lr0.01", [66, 64]),
            ("bs064_lr0.1", [59, 61]),
            ("bs128_lr0.001", [70, 70]),
            ("bs128_lr0.01", [73, 71]),
            ("bs128_lr0.1", [65, 67]),
            ("bs256_lr0.001", [68, 70]),
            ("bs256_lr0.01", [72, 71]),
            ("bs256_lr0.1", [64, 64]),
        ];
        let mut rs = Vec::new();
        for (cfg, acc) in grid {
            rs.extend(config_records("gru", cfg, 2, 100, &acc));
        }
        let best = best_hyperparams(&rs).unwrap();
        assert_eq!(best[&("d".to_string(), "gru".to_string())], "bs128_lr0.01");
        let filtered = filter_to_best(&rs, &best);
        assert_eq!(filtered.len(), 200);
        let windows: BTreeSet<_> = filtered.iter().map(|r| r.window_id).collect();
        let all: BTreeSet<_> = rs.iter().map(|r| r.window_id).collect();
        assert_eq!(windows, all);
    }

    #[test]
    fn missing_fold_is_named() {
        let mut rs = config_records("m", "A", 1, 10, &[5]);
        rs.extend(config_records("m", "B", 1, 10, &[5]).into_iter().filter(|r| r.fold_id == 0));
        let err = best_hyperparams(&rs).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("config 'B'") && msg.contains("[1]"), "{msg}");
    }

    fn runs_for(window: usize, pattern: &[bool]) -> Vec<PredictionRecord> {
        pattern
            .iter()
            .enumerate()
            .map(|(run, &ok)| rec("m", "c", run as u32, 0, window, 0, if ok { &[0.8, 0.2] } else { &[0.2, 0.8] }))
            .collect()
    }

    fn merged(pattern: &[bool], policy: MergePolicy) -> bool {
        let rs = runs_for(0, pattern);
        let refs: Vec<_> = rs.iter().collect();
        merge_runs(&refs, policy).unwrap().correct[&0]
    }

    #[test]
    fn merge_policies() {
        assert!(merged(&[true, true, true, false], MergePolicy::Majority));
        assert!(!merged(&[true, true, false, false], MergePolicy::Majority));
        assert!(merged(&[true, false, false, false], MergePolicy::Any));
        assert!(!merged(&[true, true, true, false], MergePolicy::All));
        for policy in [MergePolicy::Any, MergePolicy::Majority, MergePolicy::All] {
            assert!(merged(&[true], policy));
            assert!(!merged(&[false], policy));
        }
    }

    #[test]
    fn differing_run_counts_rejected() {
        let mut rs = runs_for(0, &[true, true]);
        rs.extend(runs_for(1, &[true]));
        let refs: Vec<_> = rs.iter().collect();
        assert!(matches!(merge_runs(&refs, MergePolicy::Majority), Err(AuditError::RunCount(_))));
    }

    proptest! {
        #[test]
        fn policy_monotone_and_order_free(
            patterns in prop::collection::vec(prop::collection::vec(any::<bool>(), 4), 1..30),
            seed in any::<u64>(),
        ) {
            let mut rs: Vec<PredictionRecord> = patterns
                .iter()
                .enumerate()
                .flat_map(|(w, p)| runs_for(w, p))
                .collect();
            let merge = |rs: &[PredictionRecord], p| {
                let refs: Vec<_> = rs.iter().collect();
                merge_runs(&refs, p).unwrap()
            };
            let any = merge(&rs, MergePolicy::Any);
            let maj = merge(&rs, MergePolicy::Majority);
            let all = merge(&rs, MergePolicy::All);
            for w in 0..patterns.len() {
                prop_assert!(!all.correct[&w] || maj.correct[&w]);
                prop_assert!(!maj.correct[&w] || any.correct[&w]);
            }
            // deterministic rotation stands in for a shuffle
            let k = (seed as usize) % rs.len();
            rs.rotate_left(k);
            rs.reverse();
            prop_assert_eq!(merge(&rs, MergePolicy::Majority), maj);
        }
    }
}
