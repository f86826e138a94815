//! Recording ingestion, windowing, normalization and grouped splits.

pub mod normalize;
pub mod recording;
pub mod split;
pub mod window;

pub use normalize::{apply_normalizer, fit_normalizer, invert_normalizer, NormStats};
pub use recording::{
    check_contiguous_labels, parse_canonical_recording, write_canonical_recording, ParsedCorpus,
    SensorRecording,
};
pub use split::{group_k_fold, Fold, FoldPlan, DEFAULT_MAX_K};
pub use window::{
    assign_window_label, slice_windows, window_corpus, GroupUnit, LabelPolicy, RecordingSpan, Window,
    WindowConfig, WindowLabel, WindowedDataset,
};
