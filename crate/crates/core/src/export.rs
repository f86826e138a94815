//! Text artifacts: CSV tables and pretty JSON with fixed float formatting.

use std::io::Write;

use serde::Serialize;

use crate::confusion::{ClassConfusionRow, FusedDistribution};
use crate::dataset::WindowedDataset;
use crate::error::{AuditError, Result};
use crate::fmt::fmt_f64;
use crate::ifc::IfcSummary;
use crate::runlength::RunLengthHistogram;

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `window_id,start_sample,end_sample,true_label,ifc_flag`
pub fn write_ifc_windows<W: Write>(out: W, dataset: &WindowedDataset, summary: &IfcSummary) -> Result<()> {
    if summary.ifc_flags.len() != dataset.len() {
        return Err(AuditError::Schema(format!(
            "{} flag(s) for {} window(s)",
            summary.ifc_flags.len(),
            dataset.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window_id", "start_sample", "end_sample", "true_label", "ifc_flag"])?;
    for (win, &flag) in dataset.windows.iter().zip(&summary.ifc_flags) {
        w.write_record([
            win.window_id.to_string(),
            win.start_sample.to_string(),
            win.end_sample.to_string(),
            win.label.to_string(),
            u8::from(flag).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `sample_index,ifc_flag`
pub fn write_sample_flags<W: Write>(out: W, flags: &[bool]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_index", "ifc_flag"])?;
    for (i, &f) in flags.iter().enumerate() {
        w.write_record([i.to_string(), u8::from(f).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `bin_lower,bin_upper,count`
pub fn write_histogram<W: Write>(out: W, hist: &RunLengthHistogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lower", "bin_upper", "count"])?;
    for b in &hist.bins {
        w.write_record([b.lower.to_string(), b.upper.to_string(), b.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `start_window,length`
pub fn write_segments<W: Write>(out: W, hist: &RunLengthHistogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start_window", "length"])?;
    for s in &hist.segments {
        w.write_record([s.start_window.to_string(), s.length.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `class_id,name,dist_pct,rel_pct,abs_pct`; absent values are empty cells.
pub fn write_confusion_table<W: Write>(out: W, rows: &[ClassConfusionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class_id", "name", "dist_pct", "rel_pct", "abs_pct"])?;
    for r in rows {
        w.write_record([
            r.class_id.to_string(),
            r.name.clone(),
            fmt_f64(r.distribution_pct),
            opt(r.relative_confusion_pct),
            opt(r.absolute_confusion_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `window_id,true_label,confused_class,fused_agrees_with_truth,p0..p{C-1}`
pub fn write_fused<W: Write>(out: W, fused: &[FusedDistribution], num_classes: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["window_id", "true_label", "confused_class", "fused_agrees_with_truth"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..num_classes).map(|c| format!("p{c}")));
    w.write_record(&header)?;
    for f in fused {
        let mut row = vec![
            f.window_id.to_string(),
            f.true_label.to_string(),
            f.confused_class.to_string(),
            u8::from(f.fused_agrees_with_truth).to_string(),
        ];
        row.extend(f.mean_probs.iter().map(|&p| fmt_f64(p)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
