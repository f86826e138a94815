//! Sliding-window slicing and window labelling.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::normalize::NormStats;
use super::recording::{num_classes, SensorRecording};
use crate::error::{AuditError, Result};

/// How a window spanning several per-sample labels gets its class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelPolicy {
    /// Most frequent class, ties to the lowest class id.
    #[default]
    Majority,
    LastSample,
    /// Majority label, but windows whose samples disagree are flagged as transitions.
    StrictUniform,
}

/// Which identity forms a window's group key for leave-group-out splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupUnit {
    #[default]
    Subject,
    SubjectSession,
}

impl GroupUnit {
    pub fn key(self, subject_id: &str, session_id: &str) -> String {
        match self {
            GroupUnit::Subject => subject_id.to_string(),
            GroupUnit::SubjectSession => format!("{subject_id}/{session_id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub size: usize,
    pub stride: usize,
    pub label_policy: LabelPolicy,
    pub group_unit: GroupUnit,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            size: 200,
            stride: 100,
            label_policy: LabelPolicy::Majority,
            group_unit: GroupUnit::Subject,
        }
    }
}

impl WindowConfig {
    pub fn new(size: usize, stride: usize) -> Result<Self> {
        let cfg = Self {
            size,
            stride,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.stride > self.size {
            return Err(AuditError::WindowConfig(format!(
                "need 1 <= stride <= size, got stride {} and size {}",
                self.stride, self.size
            )));
        }
        Ok(())
    }

    /// Number of windows a recording of `num_samples` yields.
    pub fn window_count(&self, num_samples: usize) -> usize {
        if num_samples < self.size {
            0
        } else {
            (num_samples - self.size) / self.stride + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowLabel {
    pub label: usize,
    pub transition: bool,
}

/// Label a window from the per-sample labels it covers.
///
/// # Panics
/// If `labels` is empty.
pub fn assign_window_label(labels: &[usize], policy: LabelPolicy) -> WindowLabel {
    assert!(!labels.is_empty(), "window label slice must be non-empty");
    let majority = || {
        let max = *labels.iter().max().expect("non-empty");
        let mut counts = vec![0usize; max + 1];
        for &l in labels {
            counts[l] += 1;
        }
        // first maximum = lowest id on ties
        let mut best = 0;
        for (class, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = class;
            }
        }
        best
    };
    match policy {
        LabelPolicy::Majority => WindowLabel {
            label: majority(),
            transition: false,
        },
        LabelPolicy::LastSample => WindowLabel {
            label: *labels.last().expect("non-empty"),
            transition: false,
        },
        LabelPolicy::StrictUniform => {
            let uniform = labels.iter().all(|&l| l == labels[0]);
            if uniform {
                WindowLabel {
                    label: labels[0],
                    transition: false,
                }
            } else {
                WindowLabel {
                    label: majority(),
                    transition: true,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub window_id: usize,
    /// Index into [`WindowedDataset::recordings`].
    pub recording: usize,
    /// Global sample index (recordings are laid end to end).
    pub start_sample: usize,
    pub end_sample: usize,
    pub label: usize,
    pub transition: bool,
    pub group_key: String,
    /// `[size × num_channels]`
    pub features: Array2<f64>,
}

/// Placement of one recording in the global sample axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingSpan {
    pub subject_id: String,
    pub session_id: String,
    pub sample_offset: usize,
    pub num_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub windows: Vec<Window>,
    pub num_classes: usize,
    pub config: WindowConfig,
    pub norm_stats: Option<NormStats>,
    pub recordings: Vec<RecordingSpan>,
    pub total_samples: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.label).collect()
    }

    pub fn num_channels(&self) -> usize {
        self.windows.first().map_or(0, |w| w.features.ncols())
    }

    /// Recording index of every window, for boundary-aware run lengths.
    pub fn recording_of_windows(&self) -> Vec<usize> {
        self.windows.iter().map(|w| w.recording).collect()
    }

    /// Window counts per group key, in order of first appearance.
    pub fn group_counts(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for w in &self.windows {
            match out.iter_mut().find(|(k, _)| *k == w.group_key) {
                Some((_, n)) => *n += 1,
                None => out.push((w.group_key.clone(), 1)),
            }
        }
        out
    }
}

/// Slice a single recording. Sample indices are local to the recording.
pub fn slice_windows(rec: &SensorRecording, cfg: &WindowConfig) -> Result<WindowedDataset> {
    window_corpus(std::slice::from_ref(rec), cfg)
}

/// Slice every recording and lay them end to end on one sample axis; window
/// ids are dense in recording order.
pub fn window_corpus(recordings: &[SensorRecording], cfg: &WindowConfig) -> Result<WindowedDataset> {
    cfg.validate()?;
    let mut windows = Vec::new();
    let mut spans = Vec::with_capacity(recordings.len());
    let mut offset = 0;
    for (ri, rec) in recordings.iter().enumerate() {
        let n = rec.num_samples();
        let count = cfg.window_count(n);
        if count == 0 {
            log::warn!(
                "recording {}/{} has {} sample(s), shorter than one window of {}",
                rec.subject_id,
                rec.session_id,
                n,
                cfg.size
            );
        }
        let group_key = cfg.group_unit.key(&rec.subject_id, &rec.session_id);
        for w in 0..count {
            let start = w * cfg.stride;
            let end = start + cfg.size;
            let wl = assign_window_label(&rec.labels[start..end], cfg.label_policy);
            windows.push(Window {
                window_id: windows.len(),
                recording: ri,
                start_sample: offset + start,
                end_sample: offset + end,
                label: wl.label,
                transition: wl.transition,
                group_key: group_key.clone(),
                features: rec.channels.slice(s![start..end, ..]).to_owned(),
            });
        }
        spans.push(RecordingSpan {
            subject_id: rec.subject_id.clone(),
            session_id: rec.session_id.clone(),
            sample_offset: offset,
            num_samples: n,
        });
        offset += n;
    }
    Ok(WindowedDataset {
        windows,
        num_classes: num_classes(recordings),
        config: *cfg,
        norm_stats: None,
        recordings: spans,
        total_samples: offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn recording(n: usize) -> SensorRecording {
        let data = Array2::from_shape_fn((n, 2), |(i, c)| (i * 2 + c) as f64);
        SensorRecording::new(data, 50.0, vec![0; n], "s1", "a", vec!["x".into(), "y".into()]).unwrap()
    }

    #[test]
    fn five_hundred_samples_give_four_windows() {
        let ds = slice_windows(&recording(500), &WindowConfig::default()).unwrap();
        let starts: Vec<_> = ds.windows.iter().map(|w| w.start_sample).collect();
        assert_eq!(starts, vec![0, 100, 200, 300]);
        assert!(ds.windows.iter().all(|w| w.end_sample - w.start_sample == 200));
        assert_eq!(ds.windows[3].features[[0, 1]], (300 * 2 + 1) as f64);
    }

    #[test]
    fn boundary_lengths() {
        let cfg = WindowConfig::default();
        assert_eq!(slice_windows(&recording(200), &cfg).unwrap().len(), 1);
        assert_eq!(slice_windows(&recording(199), &cfg).unwrap().len(), 0);
        assert_eq!(slice_windows(&recording(0), &cfg).unwrap().len(), 0);
    }

    #[test]
    fn invalid_stride_rejected() {
        assert!(WindowConfig::new(200, 0).is_err());
        assert!(WindowConfig::new(200, 201).is_err());
        assert!(WindowConfig::new(200, 200).is_ok());
    }

    #[test]
    fn majority_label() {
        let mut labels = vec![0; 120];
        labels.extend(vec![1; 80]);
        assert_eq!(assign_window_label(&labels, LabelPolicy::Majority).label, 0);
    }

    #[test]
    fn majority_tie_goes_to_lowest_id() {
        let mut labels = vec![1; 100];
        labels.extend(vec![0; 100]);
        assert_eq!(assign_window_label(&labels, LabelPolicy::Majority).label, 0);
    }

    #[test]
    fn strict_uniform_and_last_sample() {
        let l = assign_window_label(&[2, 2, 2], LabelPolicy::StrictUniform);
        assert_eq!(l, WindowLabel { label: 2, transition: false });
        let l = assign_window_label(&[1, 3, 3], LabelPolicy::StrictUniform);
        assert_eq!(l, WindowLabel { label: 3, transition: true });
        let l = assign_window_label(&[1, 1, 3], LabelPolicy::LastSample);
        assert_eq!(l, WindowLabel { label: 3, transition: false });
    }

    #[test]
    fn corpus_offsets_and_groups() {
        let mut b = recording(300);
        b.subject_id = "s2".into();
        let mut cfg = WindowConfig::default();
        let ds = window_corpus(&[recording(400), b.clone()], &cfg).unwrap();
        assert_eq!(ds.len(), 3 + 2);
        assert_eq!(ds.total_samples, 700);
        assert_eq!(ds.windows[3].start_sample, 400);
        assert_eq!(ds.windows[3].recording, 1);
        assert_eq!(ds.group_counts(), vec![("s1".to_string(), 3), ("s2".to_string(), 2)]);
        cfg.group_unit = GroupUnit::SubjectSession;
        let ds = window_corpus(&[b], &cfg).unwrap();
        assert_eq!(ds.windows[0].group_key, "s2/a");
    }

    #[test]
    fn coverage_and_overlap() {
        let cfg = WindowConfig::new(50, 20).unwrap();
        let ds = slice_windows(&recording(333), &cfg).unwrap();
        for pair in ds.windows.windows(2) {
            assert_eq!(pair[0].end_sample - pair[1].start_sample, cfg.size - cfg.stride);
        }
        let mut covered = vec![false; 333];
        for w in &ds.windows {
            covered[w.start_sample..w.end_sample].iter_mut().for_each(|c| *c = true);
        }
        let last_end = ds.windows.last().unwrap().end_sample;
        assert!(covered[..last_end].iter().all(|&c| c));
        assert!(covered[last_end..].iter().all(|&c| !c));
    }
}
