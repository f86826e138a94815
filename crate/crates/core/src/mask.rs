//! Trinary clean/minor/major patch mask.
//!
//! An IFC window is `major` when the largest gap between consecutive sorted
//! fused probabilities sits between the top two classes (a confident wrong
//! call) and `minor` when it sits further down (probability mass spread
//! over several classes). Everything outside the IFC is `clean`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::confusion::FusedDistribution;
use crate::dataset::WindowedDataset;
use crate::error::{AuditError, Result};
use crate::ifc::merge_to_samples;
use crate::predictions::MergePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum MaskCategory {
    #[default]
    Clean = 0,
    Minor = 1,
    Major = 2,
}

impl From<MaskCategory> for u8 {
    fn from(c: MaskCategory) -> u8 {
        c as u8
    }
}

impl TryFrom<u8> for MaskCategory {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(MaskCategory::Clean),
            1 => Ok(MaskCategory::Minor),
            2 => Ok(MaskCategory::Major),
            other => Err(format!("mask category must be 0, 1 or 2, got {other}")),
        }
    }
}

/// Categorize one window from its fused probabilities.
pub fn categorize(mean_probs: &[f64], is_ifc: bool) -> Result<MaskCategory> {
    if mean_probs.len() < 2 {
        return Err(AuditError::TooFewClasses(mean_probs.len()));
    }
    if !is_ifc {
        return Ok(MaskCategory::Clean);
    }
    let mut sorted = mean_probs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // first index attaining the largest gap
    let mut best = 0;
    let mut best_gap = f64::NEG_INFINITY;
    for (i, pair) in sorted.windows(2).enumerate() {
        let gap = pair[0] - pair[1];
        if gap > best_gap {
            best_gap = gap;
            best = i;
        }
    }
    Ok(if best == 0 { MaskCategory::Major } else { MaskCategory::Minor })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedWindow {
    pub window_id: usize,
    pub start_sample: usize,
    pub end_sample: usize,
    pub category: MaskCategory,
}

/// Window-level shares of the three categories, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskDistribution {
    pub clean_pct: f64,
    pub minor_pct: f64,
    pub major_pct: f64,
}

impl MaskDistribution {
    pub fn of(windows: &[MaskedWindow]) -> Self {
        let n = windows.len().max(1) as f64;
        let count = |c| windows.iter().filter(|w| w.category == c).count() as f64;
        let minor_pct = 100.0 * count(MaskCategory::Minor) / n;
        let major_pct = 100.0 * count(MaskCategory::Major) / n;
        Self {
            clean_pct: 100.0 * count(MaskCategory::Clean) / n,
            minor_pct,
            major_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSequence {
    pub windows: Vec<MaskedWindow>,
    pub sample_mask: Vec<MaskCategory>,
    pub distribution: MaskDistribution,
}

impl MaskSequence {
    pub fn window_mask(&self) -> Vec<MaskCategory> {
        self.windows.iter().map(|w| w.category).collect()
    }

    /// Rebuild from window categories; samples take the most severe category
    /// of any covering window.
    pub fn from_windows(windows: Vec<MaskedWindow>, total_samples: usize) -> Result<Self> {
        let mut sample_mask = vec![MaskCategory::Clean; total_samples];
        for w in &windows {
            if w.end_sample > total_samples || w.start_sample > w.end_sample {
                return Err(AuditError::Schema(format!(
                    "window {} spans [{}, {}) beyond {total_samples} samples",
                    w.window_id, w.start_sample, w.end_sample
                )));
            }
            for s in &mut sample_mask[w.start_sample..w.end_sample] {
                *s = (*s).max(w.category);
            }
        }
        Ok(Self {
            distribution: MaskDistribution::of(&windows),
            windows,
            sample_mask,
        })
    }
}

/// Categorize every window and merge to the sample axis by maximum severity.
/// `ifc_flags` follows dataset window order; every IFC window needs a fused
/// distribution.
pub fn build_mask(
    ifc_flags: &[bool],
    fused: &[FusedDistribution],
    dataset: &WindowedDataset,
) -> Result<MaskSequence> {
    if ifc_flags.len() != dataset.windows.len() {
        return Err(AuditError::Schema(format!(
            "{} flag(s) for {} window(s)",
            ifc_flags.len(),
            dataset.windows.len()
        )));
    }
    let by_window: BTreeMap<usize, &FusedDistribution> = fused.iter().map(|f| (f.window_id, f)).collect();
    let mut windows = Vec::with_capacity(ifc_flags.len());
    for (w, &flag) in dataset.windows.iter().zip(ifc_flags) {
        let category = if flag {
            let f = by_window.get(&w.window_id).ok_or(AuditError::MissingFused(w.window_id))?;
            categorize(&f.mean_probs, true)?
        } else {
            MaskCategory::Clean
        };
        windows.push(MaskedWindow {
            window_id: w.window_id,
            start_sample: w.start_sample,
            end_sample: w.end_sample,
            category,
        });
    }
    let categories: Vec<MaskCategory> = windows.iter().map(|w| w.category).collect();
    let sample_mask = merge_to_samples(&categories, dataset);
    Ok(MaskSequence {
        distribution: MaskDistribution::of(&windows),
        windows,
        sample_mask,
    })
}

/// Mask summary file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSummary {
    pub clean_pct: f64,
    pub minor_pct: f64,
    pub major_pct: f64,
    pub policy: MergePolicy,
}

impl MaskSummary {
    pub fn new(distribution: MaskDistribution, policy: MergePolicy) -> Self {
        Self {
            clean_pct: distribution.clean_pct,
            minor_pct: distribution.minor_pct,
            major_pct: distribution.major_pct,
            policy,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    sample_index: usize,
    category: MaskCategory,
}

/// `window_id,start_sample,end_sample,category`
pub fn write_window_mask<W: Write>(out: W, mask: &MaskSequence) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &mask.windows {
        w.serialize(row)?;
    }
    if mask.windows.is_empty() {
        w.write_record(["window_id", "start_sample", "end_sample", "category"])?;
    }
    w.flush()?;
    Ok(())
}

/// `sample_index,category`
pub fn write_sample_mask<W: Write>(out: W, mask: &MaskSequence) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, &c) in mask.sample_mask.iter().enumerate() {
        w.serialize(SampleRow {
            sample_index: i,
            category: c,
        })?;
    }
    if mask.sample_mask.is_empty() {
        w.write_record(["sample_index", "category"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_window_mask<R: Read>(input: R) -> Result<Vec<MaskedWindow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<MaskedWindow>, _>>()?)
}

pub fn read_sample_mask<R: Read>(input: R) -> Result<Vec<MaskCategory>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: SampleRow = row?;
        if row.sample_index != out.len() {
            return Err(AuditError::Schema(format!(
                "sample mask row {} has index {}",
                out.len(),
                row.sample_index
            )));
        }
        out.push(row.category);
    }
    Ok(out)
}

/// Re-import both CSVs; the sample file must agree with the window file.
pub fn import_mask<R1: Read, R2: Read>(windows: R1, samples: R2) -> Result<MaskSequence> {
    let windows = read_window_mask(windows)?;
    let samples = read_sample_mask(samples)?;
    let rebuilt = MaskSequence::from_windows(windows, samples.len())?;
    if rebuilt.sample_mask != samples {
        return Err(AuditError::Schema("sample mask disagrees with the window mask".into()));
    }
    Ok(rebuilt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{slice_windows, SensorRecording, WindowConfig};
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn gap_rule() {
        assert_eq!(categorize(&[0.7, 0.2, 0.1], true).unwrap(), MaskCategory::Major);
        assert_eq!(categorize(&[0.4, 0.35, 0.25], true).unwrap(), MaskCategory::Minor);
        assert_eq!(categorize(&[0.5, 0.3, 0.2], false).unwrap(), MaskCategory::Clean);
        // unsorted input
        assert_eq!(categorize(&[0.25, 0.4, 0.35], true).unwrap(), MaskCategory::Minor);
    }

    #[test]
    fn gap_tie_goes_major() {
        // three exactly equal gaps of 1/8
        assert_eq!(categorize(&[0.4375, 0.3125, 0.1875, 0.0625], true).unwrap(), MaskCategory::Major);
    }

    #[test]
    fn two_classes_always_major() {
        for p in [0.5, 0.51, 0.9, 1.0] {
            assert_eq!(categorize(&[p, 1.0 - p], true).unwrap(), MaskCategory::Major);
        }
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(categorize(&[1.0], true), Err(AuditError::TooFewClasses(1))));
    }

    fn dataset(windows: usize) -> WindowedDataset {
        let n = (windows + 1) * 100;
        let rec = SensorRecording::new(Array2::zeros((n, 1)), 1.0, vec![0; n], "s", "x", vec!["c".into()]).unwrap();
        slice_windows(&rec, &WindowConfig::default()).unwrap()
    }

    fn fused(window: usize, probs: &[f64]) -> FusedDistribution {
        FusedDistribution {
            window_id: window,
            true_label: 0,
            mean_probs: probs.to_vec(),
            confused_class: 1,
            fused_agrees_with_truth: false,
        }
    }

    #[test]
    fn all_clean() {
        let ds = dataset(4);
        let m = build_mask(&[false; 4], &[], &ds).unwrap();
        assert_eq!(m.distribution.clean_pct, 100.0);
        assert_eq!(m.distribution.minor_pct + m.distribution.major_pct, 0.0);
        assert!(m.sample_mask.iter().all(|&c| c == MaskCategory::Clean));
    }

    #[test]
    fn overlap_takes_most_severe() {
        let ds = dataset(3);
        let f = vec![fused(0, &[0.1, 0.4, 0.35, 0.15]), fused(1, &[0.05, 0.9, 0.05, 0.0])];
        let m = build_mask(&[true, true, false], &f, &ds).unwrap();
        assert_eq!(m.window_mask(), vec![MaskCategory::Minor, MaskCategory::Major, MaskCategory::Clean]);
        assert_eq!(m.sample_mask[50], MaskCategory::Minor);
        assert_eq!(m.sample_mask[150], MaskCategory::Major);
        assert_eq!(m.sample_mask[250], MaskCategory::Major);
        assert_eq!(m.sample_mask[350], MaskCategory::Clean);
    }

    #[test]
    fn missing_fused_for_ifc_window() {
        let ds = dataset(2);
        assert!(matches!(build_mask(&[false, true], &[], &ds), Err(AuditError::MissingFused(1))));
    }

    #[test]
    fn three_window_csv() {
        let windows: Vec<MaskedWindow> = [MaskCategory::Clean, MaskCategory::Minor, MaskCategory::Major]
            .iter()
            .enumerate()
            .map(|(i, &c)| MaskedWindow {
                window_id: i,
                start_sample: i * 100,
                end_sample: i * 100 + 200,
                category: c,
            })
            .collect();
        let mask = MaskSequence::from_windows(windows, 400).unwrap();
        let mut buf = Vec::new();
        write_window_mask(&mut buf, &mask).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "window_id,start_sample,end_sample,category\n0,0,200,0\n1,100,300,1\n2,200,400,2\n"
        );
        let mut samples = Vec::new();
        write_sample_mask(&mut samples, &mask).unwrap();
        assert_eq!(import_mask(text.as_bytes(), samples.as_slice()).unwrap(), mask);
    }

    #[test]
    fn bad_category_rejected() {
        let text = "window_id,start_sample,end_sample,category\n0,0,200,3\n";
        assert!(read_window_mask(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn raising_a_window_never_lowers_samples(
            cats in prop::collection::vec(0u8..3, 1..20),
            pick in any::<prop::sample::Index>(),
        ) {
            let windows: Vec<MaskedWindow> = cats
                .iter()
                .enumerate()
                .map(|(i, &c)| MaskedWindow {
                    window_id: i,
                    start_sample: i * 100,
                    end_sample: i * 100 + 200,
                    category: MaskCategory::try_from(c).unwrap(),
                })
                .collect();
            let total = (cats.len() + 1) * 100;
            let before = MaskSequence::from_windows(windows.clone(), total).unwrap();
            let mut raised = windows;
            let i = pick.index(raised.len());
            raised[i].category = MaskCategory::Major;
            let after = MaskSequence::from_windows(raised, total).unwrap();
            for (a, b) in after.sample_mask.iter().zip(&before.sample_mask) {
                prop_assert!(a >= b);
            }
            let d = after.distribution;
            prop_assert!((d.clean_pct + d.minor_pct + d.major_pct - 100.0).abs() <= 1e-9);
        }

        #[test]
        fn permuting_classes_keeps_category(
            raw in prop::collection::vec(0.01f64..1.0, 2..8),
            rot in 0usize..8,
        ) {
            let s: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let mut q = p.clone();
            let k = rot % q.len();
            q.rotate_left(k);
            prop_assert_eq!(categorize(&p, true).unwrap(), categorize(&q, true).unwrap());
        }
    }
}
