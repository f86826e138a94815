use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use har_audit::dataset::GroupUnit;
use har_audit::predictions::MergePolicy;

#[derive(Debug, Parser)]
#[command(name = "har-audit", version, about = "Audit windowed activity-recognition benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Parse a canonical recording CSV into the run directory.
    Ingest,
    /// Slice the recordings into labelled windows.
    Windows,
    /// Build the leave-group-out fold plan.
    Split,
    /// Generate a synthetic corpus with annotated injections.
    Synth,
    /// Train the baseline ensemble per fold and log its predictions.
    TrainBaseline,
    /// Validate an external prediction log against the windows.
    ImportLogs,
    /// Compute single contributions, common ground and the IFC.
    Ifc,
    /// Per-class confusion table and chord data for the IFC windows.
    Confusion,
    /// Run-length histogram of consecutive IFC windows.
    Histogram,
    /// Clean/minor/major patch mask.
    Mask,
    /// SVG views of the windows, the histogram and the chord data.
    Plot,
    /// Bundle every summary into one JSON report.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Windows => "windows",
            Command::Split => "split",
            Command::Synth => "synth",
            Command::TrainBaseline => "train-baseline",
            Command::ImportLogs => "import-logs",
            Command::Ifc => "ifc",
            Command::Confusion => "confusion",
            Command::Histogram => "histogram",
            Command::Mask => "mask",
            Command::Plot => "plot",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Any,
    Majority,
    All,
}

impl From<PolicyArg> for MergePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Any => MergePolicy::Any,
            PolicyArg::Majority => MergePolicy::Majority,
            PolicyArg::All => MergePolicy::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupArg {
    Subject,
    SubjectSession,
}

impl From<GroupArg> for GroupUnit {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::Subject => GroupUnit::Subject,
            GroupArg::SubjectSession => GroupUnit::SubjectSession,
        }
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config file,
/// then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Run directory for all artifacts.
    #[arg(long, global = true, env = "HAR_AUDIT_OUT")]
    pub out: Option<PathBuf>,

    /// Recording CSV for `ingest`.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,

    /// Prediction log JSONL for `import-logs` (or to audit a log outside the run directory).
    #[arg(long, global = true)]
    pub logs: Option<PathBuf>,

    /// Scenario JSON for `synth`.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,

    /// Sampling rate of the ingested recordings in Hz.
    #[arg(long, global = true)]
    pub sample_rate: Option<f64>,

    #[arg(long, global = true)]
    pub window_size: Option<usize>,

    #[arg(long, global = true)]
    pub stride: Option<usize>,

    /// Identity used as the split group.
    #[arg(long, global = true, value_enum)]
    pub group_unit: Option<GroupArg>,

    #[arg(long, global = true)]
    pub max_k: Option<usize>,

    #[arg(long, global = true, value_enum)]
    pub merge_policy: Option<PolicyArg>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Comma-separated class names, in class id order.
    #[arg(long, global = true, value_delimiter = ',')]
    pub class_names: Option<Vec<String>>,
}
