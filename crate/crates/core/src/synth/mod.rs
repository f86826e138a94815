//! Synthetic benchmark generation and the baseline classifier.

pub mod baseline;
pub mod scenario;

pub use baseline::{extract_features, train_baseline, BaselineModel, TrainConfig};
pub use scenario::{
    generate, Injection, InjectionAnnotation, InjectionKind, ScenarioSpec, SyntheticCorpus,
};
