use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use har_audit::dataset::{WindowConfig, DEFAULT_MAX_K};
use har_audit::predictions::MergePolicy;
use serde::{Deserialize, Serialize};

use crate::args::Flags;

pub const DEFAULT_SAMPLE_RATE: f64 = 50.0;

/// Settings of one invocation after merging flags over the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub recordings: Option<PathBuf>,
    pub logs: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub sample_rate: f64,
    pub window: WindowConfig,
    pub max_k: usize,
    pub merge_policy: MergePolicy,
    pub seed: Option<u64>,
    pub class_names: Option<Vec<String>>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            recordings: None,
            logs: None,
            out: None,
            scenario: None,
            sample_rate: DEFAULT_SAMPLE_RATE,
            window: WindowConfig::default(),
            max_k: DEFAULT_MAX_K,
            merge_policy: MergePolicy::default(),
            seed: None,
            class_names: None,
        }
    }
}

impl AuditConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn resolve(flags: &Flags) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if flags.input.is_some() {
            cfg.recordings.clone_from(&flags.input);
        }
        if flags.logs.is_some() {
            cfg.logs.clone_from(&flags.logs);
        }
        if flags.out.is_some() {
            cfg.out.clone_from(&flags.out);
        }
        if flags.scenario.is_some() {
            cfg.scenario.clone_from(&flags.scenario);
        }
        if let Some(r) = flags.sample_rate {
            cfg.sample_rate = r;
        }
        if let Some(s) = flags.window_size {
            cfg.window.size = s;
        }
        if let Some(s) = flags.stride {
            cfg.window.stride = s;
        }
        if let Some(g) = flags.group_unit {
            cfg.window.group_unit = g.into();
        }
        if let Some(k) = flags.max_k {
            cfg.max_k = k;
        }
        if let Some(p) = flags.merge_policy {
            cfg.merge_policy = p.into();
        }
        if flags.seed.is_some() {
            cfg.seed = flags.seed;
        }
        if flags.class_names.is_some() {
            cfg.class_names.clone_from(&flags.class_names);
        }
        if !(cfg.sample_rate.is_finite() && cfg.sample_rate > 0.0) {
            bail!("sample rate must be positive, got {}", cfg.sample_rate);
        }
        cfg.window.validate()?;
        Ok(cfg)
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .context("no output directory: pass --out or set HAR_AUDIT_OUT")
    }
}
