use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use har_audit::confusion::ChordData;
use har_audit::dataset::{
    check_contiguous_labels, parse_canonical_recording, window_corpus, write_canonical_recording, FoldPlan,
    SensorRecording, WindowConfig, WindowedDataset,
};
use har_audit::export::{
    write_confusion_table, write_fused, write_histogram, write_ifc_windows, write_json, write_sample_flags,
    write_segments,
};
use har_audit::fmt::fmt_f64;
use har_audit::mask::{write_sample_mask, write_window_mask};
use har_audit::pipeline::{audit, train_fold_predictions, Audit, BaselineEnsemble};
use har_audit::predictions::{read_records, write_records, LogSchema, PredictionRecord};
use har_audit::synth::{generate, ScenarioSpec};
use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::args::Command;
use crate::config::AuditConfig;
use crate::plot;
use crate::rundir::{Outputs, RunDir};

pub const RECORDINGS: &str = "recordings.csv";
pub const DATASET: &str = "dataset.json";
pub const WINDOW_CONFIG: &str = "window_config.json";
pub const WINDOWS: &str = "windows.csv";
pub const SPLIT: &str = "split.json";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const REPORT: &str = "report.json";

/// Corpus facts written next to the canonical recordings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetInfo {
    pub dataset_id: String,
    pub sample_rate: f64,
    pub num_recordings: usize,
    pub num_samples: usize,
    pub num_channels: usize,
    pub num_classes: usize,
    pub channel_names: Vec<String>,
    pub repairs: usize,
}

impl DatasetInfo {
    fn of(dataset_id: String, recordings: &[SensorRecording], sample_rate: f64, repairs: usize) -> Result<Self> {
        let num_classes = check_contiguous_labels(recordings)?;
        Ok(Self {
            dataset_id,
            sample_rate,
            num_recordings: recordings.len(),
            num_samples: recordings.iter().map(|r| r.num_samples()).sum(),
            num_channels: recordings[0].num_channels(),
            num_classes,
            channel_names: recordings[0].channel_names.clone(),
            repairs,
        })
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn json<T: Serialize>(outputs: &mut Outputs, rel: &str, value: &T) -> Result<()> {
    outputs.with(rel, |buf| write_json(buf, value))
}

fn input_path(path: Option<&PathBuf>, what: &str, flag: &str) -> Result<PathBuf> {
    let p = path.with_context(|| format!("no {what} given: pass {flag}"))?;
    ensure!(p.is_file(), "missing {what} {}", p.display());
    Ok(p.clone())
}

struct Loaded {
    info: DatasetInfo,
    dataset: WindowedDataset,
}

fn load_recordings(run: &RunDir) -> Result<(DatasetInfo, Vec<SensorRecording>)> {
    let info: DatasetInfo = read_json(&run.require(DATASET, "ingest` or `synth")?)?;
    let path = run.require(RECORDINGS, "ingest` or `synth")?;
    let file = File::open(&path)?;
    let parsed = parse_canonical_recording(BufReader::new(file), info.sample_rate)
        .with_context(|| format!("cannot parse {}", path.display()))?;
    Ok((info, parsed.recordings))
}

fn load_windows(run: &RunDir) -> Result<Loaded> {
    let (info, recordings) = load_recordings(run)?;
    let cfg: WindowConfig = read_json(&run.require(WINDOW_CONFIG, "windows")?)?;
    let dataset = window_corpus(&recordings, &cfg)?;
    ensure!(!dataset.is_empty(), "no complete window fits the recordings");
    Ok(Loaded { info, dataset })
}

fn log_path(run: &RunDir, cfg: &AuditConfig) -> Result<PathBuf> {
    let path = cfg.logs.clone().unwrap_or_else(|| run.path(PREDICTIONS));
    if !path.is_file() {
        bail!(
            "missing prediction log {} (run `train-baseline` or `import-logs` first, or pass --logs)",
            path.display()
        );
    }
    Ok(path)
}

fn load_logs(path: &Path, dataset: &WindowedDataset) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path)?;
    let schema = LogSchema {
        num_classes: dataset.num_classes,
        num_windows: dataset.len(),
    };
    read_records(BufReader::new(file), Some(schema)).with_context(|| format!("invalid prediction log {}", path.display()))
}

fn load_audit(run: &RunDir, cfg: &AuditConfig) -> Result<(Loaded, Audit)> {
    let logs = log_path(run, cfg)?;
    let loaded = load_windows(run)?;
    let records = load_logs(&logs, &loaded.dataset)?;
    if let Some(names) = &cfg.class_names {
        ensure!(
            names.len() == loaded.dataset.num_classes,
            "{} class name(s) given for {} classes",
            names.len(),
            loaded.dataset.num_classes
        );
    }
    let a = audit(&loaded.dataset, &records, cfg.merge_policy, cfg.class_names.clone())?;
    Ok((loaded, a))
}

fn ingest(cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let input = input_path(cfg.recordings.as_ref(), "recording CSV", "--input")?;
    let parsed = parse_canonical_recording(BufReader::new(File::open(&input)?), cfg.sample_rate)
        .with_context(|| format!("cannot parse {}", input.display()))?;
    let id = input
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    let info = DatasetInfo::of(id, &parsed.recordings, cfg.sample_rate, parsed.repairs)?;
    out.with(RECORDINGS, |buf| write_canonical_recording(buf, &parsed.recordings))?;
    json(out, DATASET, &info)?;
    Ok(format!(
        "{} recording(s), {} samples, {} classes, {} repaired cell(s)",
        info.num_recordings, info.num_samples, info.num_classes, info.repairs
    ))
}

fn synth(cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let mut spec = match &cfg.scenario {
        Some(p) => {
            ensure!(p.is_file(), "missing scenario {}", p.display());
            read_json::<ScenarioSpec>(p)?
        }
        None => ScenarioSpec::default(),
    };
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    let corpus = generate(&spec)?;
    let info = DatasetInfo::of("synthetic".into(), &corpus.recordings, spec.sample_rate, 0)?;
    out.with(RECORDINGS, |buf| write_canonical_recording(buf, &corpus.recordings))?;
    json(out, DATASET, &info)?;
    json(out, "scenario.json", &spec)?;
    json(out, "annotations.json", &corpus.annotations)?;
    Ok(format!(
        "{} subject(s), {} samples, {} injection(s), seed {}",
        info.num_recordings,
        info.num_samples,
        corpus.annotations.len(),
        spec.seed
    ))
}

fn windows(run: &RunDir, cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let (_, recordings) = load_recordings(run)?;
    let ds = window_corpus(&recordings, &cfg.window)?;
    ensure!(!ds.is_empty(), "no complete window of {} samples fits the recordings", cfg.window.size);
    json(out, WINDOW_CONFIG, &cfg.window)?;
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record([
            "window_id",
            "subject_id",
            "session_id",
            "start_sample",
            "end_sample",
            "label",
            "transition",
            "group",
        ])?;
        for win in &ds.windows {
            let rec = &ds.recordings[win.recording];
            w.write_record([
                win.window_id.to_string(),
                rec.subject_id.clone(),
                rec.session_id.clone(),
                win.start_sample.to_string(),
                win.end_sample.to_string(),
                win.label.to_string(),
                u8::from(win.transition).to_string(),
                win.group_key.clone(),
            ])?;
        }
        w.flush()?;
    }
    out.add(WINDOWS, buf);
    Ok(format!(
        "{} windows (size {}, stride {}), {} group(s)",
        ds.len(),
        cfg.window.size,
        cfg.window.stride,
        ds.group_counts().len()
    ))
}

fn split(run: &RunDir, cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let loaded = load_windows(run)?;
    let plan = FoldPlan::for_dataset(&loaded.dataset, cfg.max_k)?;
    json(out, SPLIT, &plan)?;
    let sizes: Vec<String> = plan.folds.iter().map(|f| f.test_window_ids.len().to_string()).collect();
    Ok(format!("{} folds, test windows per fold [{}]", plan.k, sizes.join(", ")))
}

fn load_plan(run: &RunDir, dataset: &WindowedDataset) -> Result<FoldPlan> {
    let plan: FoldPlan = read_json(&run.require(SPLIT, "split")?)?;
    plan.validate(dataset.len()).context("split plan does not match the windows")?;
    Ok(plan)
}

fn train(run: &RunDir, cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let loaded = load_windows(run)?;
    let plan = load_plan(run, &loaded.dataset)?;
    let mut ensemble = BaselineEnsemble {
        dataset_id: loaded.info.dataset_id.clone(),
        ..BaselineEnsemble::default()
    };
    if let Some(seed) = cfg.seed {
        ensemble.train.seed = seed;
    }
    let records = train_fold_predictions(&loaded.dataset, &plan, &ensemble)?;
    out.with(PREDICTIONS, |buf| write_records(buf, &records))?;
    json(out, "baseline.json", &ensemble)?;
    Ok(format!(
        "{} prediction record(s) from {} variant(s) x {} run(s) over {} folds",
        records.len(),
        ensemble.variants.len(),
        ensemble.runs,
        plan.k
    ))
}

fn import_logs(run: &RunDir, cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let loaded = load_windows(run)?;
    let path = input_path(cfg.logs.as_ref().or(cfg.recordings.as_ref()), "prediction log", "--logs")?;
    let schema = LogSchema {
        num_classes: loaded.dataset.num_classes,
        num_windows: loaded.dataset.len(),
    };
    let records = read_records(BufReader::new(File::open(&path)?), Some(schema))
        .with_context(|| format!("invalid prediction log {}", path.display()))?;
    ensure!(!records.is_empty(), "prediction log {} holds no records", path.display());
    for (i, r) in records.iter().enumerate() {
        let expected = loaded.dataset.windows[r.window_id].label;
        ensure!(
            r.true_label == expected,
            "record {i}: window {} has label {}, windows say {expected}",
            r.window_id,
            r.true_label
        );
    }
    out.with(PREDICTIONS, |buf| write_records(buf, &records))?;
    let models: std::collections::BTreeSet<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    Ok(format!("{} record(s) from {} model(s)", records.len(), models.len()))
}

fn ifc(run: &RunDir, cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let (loaded, a) = load_audit(run, cfg)?;
    out.with("ifc.csv", |buf| write_ifc_windows(buf, &loaded.dataset, &a.summary))?;
    out.with("ifc_samples.csv", |buf| write_sample_flags(buf, &a.sample_flags))?;
    json(out, "ifc_summary.json", &a.ifc_row())?;
    Ok(format!(
        "IFC {}% ({} of {} windows), common ground {}%, policy {}",
        fmt_f64(a.summary.ifc),
        a.summary.ifc_windows,
        a.summary.num_windows,
        fmt_f64(a.summary.common_ground),
        a.policy.as_str()
    ))
}

fn confusion(run: &RunDir, cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let (loaded, a) = load_audit(run, cfg)?;
    out.with("confusion.csv", |buf| write_confusion_table(buf, &a.confusion))?;
    json(out, "chord.json", &a.chord_data())?;
    out.with("fused.csv", |buf| write_fused(buf, &a.fused, loaded.dataset.num_classes))?;
    Ok(format!("{} class row(s), {} chord edge(s)", a.confusion.len(), a.edges.len()))
}

fn histogram(run: &RunDir, cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let (_, a) = load_audit(run, cfg)?;
    out.with("histogram.csv", |buf| write_histogram(buf, &a.histogram))?;
    out.with("segments.csv", |buf| write_segments(buf, &a.histogram))?;
    let longest = a.histogram.segments.iter().map(|s| s.length).max().unwrap_or(0);
    Ok(format!("{} IFC segment(s), longest {longest} window(s)", a.histogram.segments.len()))
}

fn mask(run: &RunDir, cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let (_, a) = load_audit(run, cfg)?;
    out.with("mask_windows.csv", |buf| write_window_mask(buf, &a.mask))?;
    out.with("mask_samples.csv", |buf| write_sample_mask(buf, &a.mask))?;
    let summary = a.mask_summary();
    json(out, "mask_summary.json", &summary)?;
    Ok(format!(
        "clean {}%, minor {}%, major {}%",
        fmt_f64(summary.clean_pct),
        fmt_f64(summary.minor_pct),
        fmt_f64(summary.major_pct)
    ))
}

fn plot_cmd(run: &RunDir, cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let (loaded, a) = load_audit(run, cfg)?;
    let means: Vec<Vec<f64>> = loaded
        .dataset
        .windows
        .iter()
        .map(|w| w.features.mean_axis(Axis(0)).expect("non-empty window").to_vec())
        .collect();
    let names = &loaded.info.channel_names;

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header = vec!["window_id".to_string(), "start_sample".into(), "end_sample".into(), "ifc_flag".into()];
        header.extend(names.iter().map(|n| format!("mean_{n}")));
        w.write_record(&header)?;
        for (win, m) in loaded.dataset.windows.iter().zip(&means) {
            let mut row = vec![
                win.window_id.to_string(),
                win.start_sample.to_string(),
                win.end_sample.to_string(),
                u8::from(a.summary.ifc_flags[win.window_id]).to_string(),
            ];
            row.extend(m.iter().map(|&v| fmt_f64(v)));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    out.add("plots/condensed_view.csv", buf);
    out.add(
        "plots/condensed_view.svg",
        plot::condensed_view(names, &means, &a.summary.ifc_flags).into_bytes(),
    );
    out.add("plots/histogram.svg", plot::histogram(&a.histogram.bins).into_bytes());
    let chord: ChordData = a.chord_data();
    out.add("plots/chord.svg", plot::chord(&chord).into_bytes());
    Ok(format!("3 SVG views over {} windows", means.len()))
}

fn report(run: &RunDir, cfg: &AuditConfig, out: &mut Outputs) -> Result<String> {
    let (_, a) = load_audit(run, cfg)?;
    let r = a.report();
    json(out, REPORT, &r)?;
    Ok(format!(
        "IFC {}%, clean {}% over {} windows",
        fmt_f64(r.ifc.ifc_pct),
        fmt_f64(r.mask.clean_pct),
        r.num_windows
    ))
}

/// Run one subcommand against the run directory and return its summary line.
pub fn run(command: Command, cfg: &AuditConfig) -> Result<String> {
    let root = cfg.out_dir()?;
    let run = RunDir::create(root)?;
    let mut out = Outputs::default();
    let summary = match command {
        Command::Ingest => ingest(cfg, &mut out)?,
        Command::Synth => synth(cfg, &mut out)?,
        Command::Windows => windows(&run, cfg, &mut out)?,
        Command::Split => split(&run, cfg, &mut out)?,
        Command::TrainBaseline => train(&run, cfg, &mut out)?,
        Command::ImportLogs => import_logs(&run, cfg, &mut out)?,
        Command::Ifc => ifc(&run, cfg, &mut out)?,
        Command::Confusion => confusion(&run, cfg, &mut out)?,
        Command::Histogram => histogram(&run, cfg, &mut out)?,
        Command::Mask => mask(&run, cfg, &mut out)?,
        Command::Plot => plot_cmd(&run, cfg, &mut out)?,
        Command::Report => report(&run, cfg, &mut out)?,
    };
    for name in out.names() {
        log::info!("writing {}", run.root().join(name).display());
    }
    run.commit(out)?;
    Ok(summary)
}
