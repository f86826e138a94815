//! Dataset auditing for windowed time-series classification benchmarks.
//!
//! The crate finds the windows no model in an ensemble classifies correctly
//! (the intersect of false classifications, IFC), describes how those
//! windows are confused, and turns them into a clean/minor/major patch mask.
//!
//! Data flows through these stages:
//!
//! 1. [`dataset`]: parse canonical recordings, slice sliding windows,
//!    normalize, and plan leave-group-out folds.
//! 2. [`predictions`]: ingest per-window probability logs, pick the best
//!    hyperparameter config per model, merge runs.
//! 3. [`ifc`] and [`runlength`]: single contributions, common ground, IFC,
//!    and durations of contiguous IFC stretches.
//! 4. [`confusion`]: fused probabilities, per-class confusion, chord edges.
//! 5. [`mask`]: the trinary mask at window and sample level.
//!
//! [`synth`] generates recordings with known ambiguities plus a baseline
//! classifier, and [`pipeline`] strings everything together.

pub mod confusion;
pub mod dataset;
pub mod error;
pub mod export;
pub mod fmt;
pub mod ifc;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod predictions;
pub mod runlength;
pub mod synth;

pub use error::{AuditError, Result};
