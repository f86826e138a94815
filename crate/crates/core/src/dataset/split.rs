//! Leave-group-out cross-validation folds, capped at `max_k` by merging groups.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::window::WindowedDataset;
use crate::error::{AuditError, Result};

pub const DEFAULT_MAX_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub fold_id: usize,
    #[serde(rename = "groups")]
    pub test_group_keys: Vec<String>,
    #[serde(rename = "test_windows")]
    pub test_window_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Fold>,
}

/// Assign groups to folds.
///
/// With at most `max_k` groups every group is its own fold, in input order.
/// Otherwise groups are visited by descending window count (ties by group
/// key) and each goes to the fold currently holding the fewest windows
/// (ties to the lowest fold id), giving exactly `max_k` folds.
pub fn group_k_fold(groups: &[(String, usize)], max_k: usize) -> Result<Vec<Vec<String>>> {
    if groups.len() < 2 {
        return Err(AuditError::Split(format!(
            "need at least 2 groups for leave-group-out, got {}",
            groups.len()
        )));
    }
    if max_k < 2 {
        return Err(AuditError::Split(format!("max_k must be at least 2, got {max_k}")));
    }
    let mut seen = HashSet::new();
    for (key, _) in groups {
        if !seen.insert(key.as_str()) {
            return Err(AuditError::Split(format!("duplicate group key '{key}'")));
        }
    }
    if groups.len() <= max_k {
        return Ok(groups.iter().map(|(k, _)| vec![k.clone()]).collect());
    }

    let mut order: Vec<&(String, usize)> = groups.iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut folds: Vec<Vec<String>> = vec![Vec::new(); max_k];
    let mut load = vec![0usize; max_k];
    for (key, count) in order {
        let target = (0..max_k).min_by_key(|&f| (load[f], f)).expect("max_k >= 2");
        folds[target].push(key.clone());
        load[target] += count;
    }
    Ok(folds)
}

impl FoldPlan {
    /// Build the plan for a windowed dataset from its group keys.
    pub fn for_dataset(dataset: &WindowedDataset, max_k: usize) -> Result<Self> {
        let assignment = group_k_fold(&dataset.group_counts(), max_k)?;
        let fold_of: HashMap<&str, usize> = assignment
            .iter()
            .enumerate()
            .flat_map(|(f, keys)| keys.iter().map(move |k| (k.as_str(), f)))
            .collect();
        let mut folds: Vec<Fold> = assignment
            .iter()
            .enumerate()
            .map(|(fold_id, keys)| Fold {
                fold_id,
                test_group_keys: keys.clone(),
                test_window_ids: Vec::new(),
            })
            .collect();
        for w in &dataset.windows {
            folds[fold_of[w.group_key.as_str()]].test_window_ids.push(w.window_id);
        }
        Ok(Self { k: folds.len(), folds })
    }

    pub fn fold_of_window(&self, num_windows: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; num_windows];
        for f in &self.folds {
            for &w in &f.test_window_ids {
                out[w] = f.fold_id;
            }
        }
        out
    }

    /// Check the plan partitions `0..num_windows` and keeps groups intact.
    pub fn validate(&self, num_windows: usize) -> Result<()> {
        if self.k != self.folds.len() {
            return Err(AuditError::Split(format!("k = {} but {} folds listed", self.k, self.folds.len())));
        }
        let mut seen = vec![false; num_windows];
        let mut groups = BTreeSet::new();
        for (i, f) in self.folds.iter().enumerate() {
            if f.fold_id != i {
                return Err(AuditError::Split(format!("fold at position {i} has id {}", f.fold_id)));
            }
            for g in &f.test_group_keys {
                if !groups.insert(g.as_str()) {
                    return Err(AuditError::Split(format!("group '{g}' appears in two folds")));
                }
            }
            for &w in &f.test_window_ids {
                if w >= num_windows {
                    return Err(AuditError::Split(format!("unknown window {w}")));
                }
                if std::mem::replace(&mut seen[w], true) {
                    return Err(AuditError::Split(format!("window {w} in two folds")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(AuditError::Split(format!("window {missing} in no fold")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(counts: &[usize]) -> Vec<(String, usize)> {
        counts.iter().enumerate().map(|(i, &c)| (format!("g{i:02}"), c)).collect()
    }

    #[test]
    fn eight_subjects_eight_folds() {
        let folds = group_k_fold(&groups(&[5; 8]), 10).unwrap();
        assert_eq!(folds.len(), 8);
        assert!(folds.iter().all(|f| f.len() == 1));
        assert_eq!(folds[3], vec!["g03".to_string()]);
    }

    #[test]
    fn twenty_four_equal_groups_merge_to_ten() {
        let folds = group_k_fold(&groups(&[7; 24]), 10).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 3, 3, 2, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn two_groups_minimum() {
        assert_eq!(group_k_fold(&groups(&[1, 9]), 10).unwrap().len(), 2);
        assert!(group_k_fold(&groups(&[4]), 10).is_err());
        assert!(group_k_fold(&[], 10).is_err());
    }

    #[test]
    fn largest_first_balances_load() {
        // 10, 9, 8 ... visited in that order onto 3 folds
        let folds = group_k_fold(&groups(&[1, 10, 8, 9, 2]), 3).unwrap();
        assert_eq!(folds[0], vec!["g01".to_string()]);
        assert_eq!(folds[1], vec!["g03".to_string(), "g00".to_string()]);
        assert_eq!(folds[2], vec!["g02".to_string(), "g04".to_string()]);
    }

    #[test]
    fn ties_broken_by_group_key() {
        let g = vec![("b".to_string(), 3), ("a".to_string(), 3), ("c".to_string(), 3)];
        let folds = group_k_fold(&g, 2).unwrap();
        assert_eq!(folds[0], vec!["a".to_string(), "c".to_string()]);
        assert_eq!(folds[1], vec!["b".to_string()]);
    }

    #[test]
    fn duplicate_keys_rejected() {
        let g = vec![("a".to_string(), 3), ("a".to_string(), 3)];
        assert!(group_k_fold(&g, 10).is_err());
    }
}
