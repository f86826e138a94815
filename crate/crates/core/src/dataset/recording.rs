//! Canonical recording CSV ingestion.
//!
//! Layout: `subject_id,session_id,label,<channel_0>,...,<channel_{n-1}>`, one
//! row per sample, empty cell = missing value.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{AuditError, Result};
use crate::fmt::fmt_f64;

pub const FIXED_COLUMNS: [&str; 3] = ["subject_id", "session_id", "label"];

/// A multichannel sample stream of one subject/session with its label track.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecording {
    /// `[num_samples × num_channels]`
    pub channels: Array2<f64>,
    pub sample_rate: f64,
    pub labels: Vec<usize>,
    pub subject_id: String,
    pub session_id: String,
    pub channel_names: Vec<String>,
}

impl SensorRecording {
    pub fn new(
        channels: Array2<f64>,
        sample_rate: f64,
        labels: Vec<usize>,
        subject_id: impl Into<String>,
        session_id: impl Into<String>,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        if channels.ncols() == 0 {
            return Err(AuditError::Schema("recording needs at least one channel".into()));
        }
        if channels.nrows() != labels.len() {
            return Err(AuditError::Schema(format!(
                "{} label(s) for {} sample(s)",
                labels.len(),
                channels.nrows()
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(AuditError::Schema(format!("sample rate must be positive, got {sample_rate}")));
        }
        if channel_names.len() != channels.ncols() {
            return Err(AuditError::Schema(format!(
                "{} channel name(s) for {} channel(s)",
                channel_names.len(),
                channels.ncols()
            )));
        }
        Ok(Self {
            channels,
            sample_rate,
            labels,
            subject_id: subject_id.into(),
            session_id: session_id.into(),
            channel_names,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.channels.nrows()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.ncols()
    }
}

/// Result of parsing one canonical CSV stream.
#[derive(Debug, Clone)]
pub struct ParsedCorpus {
    pub recordings: Vec<SensorRecording>,
    /// Number of missing cells filled by forward/backward fill.
    pub repairs: usize,
}

impl ParsedCorpus {
    /// Number of classes, `max label + 1`.
    pub fn num_classes(&self) -> usize {
        num_classes(&self.recordings)
    }
}

pub fn num_classes(recordings: &[SensorRecording]) -> usize {
    recordings
        .iter()
        .flat_map(|r| r.labels.iter().copied())
        .max()
        .map_or(0, |m| m + 1)
}

/// Class ids across the corpus must form `0..C`.
pub fn check_contiguous_labels(recordings: &[SensorRecording]) -> Result<usize> {
    let c = num_classes(recordings);
    let mut seen = vec![false; c];
    for r in recordings {
        for &l in &r.labels {
            seen[l] = true;
        }
    }
    let missing: Vec<usize> = (0..c).filter(|&i| !seen[i]).collect();
    if missing.is_empty() {
        Ok(c)
    } else {
        Err(AuditError::Schema(format!(
            "class ids are not contiguous, missing {missing:?} in 0..{c}"
        )))
    }
}

struct PendingRecording {
    subject_id: String,
    session_id: String,
    labels: Vec<usize>,
    /// row-major, `None` = missing
    cells: Vec<Option<f64>>,
    lines: Vec<usize>,
}

fn parse_cell(raw: &str, line: usize, column: &str) -> Result<Option<f64>> {
    let cell = raw.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| AuditError::parse(line, format!("non-numeric value '{cell}' in column '{column}'")))?;
    if v.is_nan() {
        return Ok(None);
    }
    if !v.is_finite() {
        return Err(AuditError::parse(line, format!("non-finite value '{cell}' in column '{column}'")));
    }
    Ok(Some(v))
}

/// Parse a canonical recording CSV into one recording per `(subject_id,
/// session_id)` pair, in order of first appearance. Rows of a pair that
/// reappear later in the file are appended to that pair's recording.
pub fn parse_canonical_recording<R: Read>(input: R, sample_rate: f64) -> Result<ParsedCorpus> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(input);
    let mut rows = reader.records();

    let header = match rows.next() {
        None => return Err(AuditError::parse(1, "empty file")),
        Some(h) => h?,
    };
    let header_line = header.position().map_or(1, |p| p.line() as usize);
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    if names.len() < 4 {
        return Err(AuditError::parse(
            header_line,
            format!("header needs subject_id,session_id,label and at least one channel, got {} column(s)", names.len()),
        ));
    }
    for (i, expected) in FIXED_COLUMNS.iter().enumerate() {
        if names[i] != *expected {
            return Err(AuditError::parse(
                header_line,
                format!("column {i} must be '{expected}', found '{}'", names[i]),
            ));
        }
    }
    let channel_names: Vec<String> = names[3..].to_vec();
    if let Some(blank) = channel_names.iter().position(|n| n.is_empty()) {
        return Err(AuditError::parse(header_line, format!("channel column {blank} has an empty name")));
    }
    let n_ch = channel_names.len();

    let mut order: Vec<PendingRecording> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();

    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() == 1 && row.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        if row.len() != n_ch + 3 {
            return Err(AuditError::parse(
                line,
                format!("expected {} fields, found {}", n_ch + 3, row.len()),
            ));
        }
        let subject = row[0].trim();
        let session = row[1].trim();
        if subject.is_empty() || session.is_empty() {
            return Err(AuditError::parse(line, "subject_id and session_id must be non-empty"));
        }
        let label_raw = row[2].trim();
        let label: usize = label_raw
            .parse()
            .map_err(|_| AuditError::parse(line, format!("label '{label_raw}' is not a non-negative integer")))?;

        let key = (subject.to_string(), session.to_string());
        let slot = *index.entry(key).or_insert_with(|| {
            order.push(PendingRecording {
                subject_id: subject.to_string(),
                session_id: session.to_string(),
                labels: Vec::new(),
                cells: Vec::new(),
                lines: Vec::new(),
            });
            order.len() - 1
        });
        let rec = &mut order[slot];
        rec.labels.push(label);
        rec.lines.push(line);
        for (c, name) in channel_names.iter().enumerate() {
            rec.cells.push(parse_cell(&row[3 + c], line, name)?);
        }
    }

    if order.is_empty() {
        return Err(AuditError::parse(header_line + 1, "no data rows"));
    }

    let mut repairs = 0;
    let mut recordings = Vec::with_capacity(order.len());
    for pending in order {
        let n = pending.labels.len();
        let mut cells = pending.cells;
        for (c, name) in channel_names.iter().enumerate() {
            repairs += fill_column(&mut cells, n, n_ch, c).ok_or_else(|| {
                AuditError::parse(
                    pending.lines[0],
                    format!(
                        "channel '{}' has no values for subject '{}' session '{}'",
                        name, pending.subject_id, pending.session_id
                    ),
                )
            })?;
        }
        let values: Vec<f64> = cells.into_iter().map(|v| v.expect("filled")).collect();
        let channels = Array2::from_shape_vec((n, n_ch), values).expect("shape matches cell count");
        recordings.push(SensorRecording::new(
            channels,
            sample_rate,
            pending.labels,
            pending.subject_id,
            pending.session_id,
            channel_names.clone(),
        )?);
    }
    Ok(ParsedCorpus { recordings, repairs })
}

/// Forward fill then backward fill one column; returns the repair count, or
/// `None` when the column holds no value at all.
fn fill_column(cells: &mut [Option<f64>], n: usize, stride: usize, col: usize) -> Option<usize> {
    let mut repaired = 0;
    let mut last = None;
    for i in 0..n {
        let idx = i * stride + col;
        match cells[idx] {
            Some(v) => last = Some(v),
            None => {
                if let Some(v) = last {
                    cells[idx] = Some(v);
                    repaired += 1;
                }
            }
        }
    }
    let first = (0..n).find_map(|i| cells[i * stride + col])?;
    for i in 0..n {
        let idx = i * stride + col;
        if cells[idx].is_some() {
            break;
        }
        cells[idx] = Some(first);
        repaired += 1;
    }
    Some(repaired)
}

/// Write recordings back in the canonical layout. All recordings must share
/// channel names.
pub fn write_canonical_recording<W: Write>(out: W, recordings: &[SensorRecording]) -> Result<()> {
    let Some(first) = recordings.first() else {
        return Err(AuditError::Empty("no recordings to write".into()));
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(first.channel_names.iter().cloned());
    w.write_record(&header)?;
    for rec in recordings {
        if rec.channel_names != first.channel_names {
            return Err(AuditError::Schema("recordings disagree on channel names".into()));
        }
        for (s, row) in rec.channels.rows().into_iter().enumerate() {
            let mut fields = Vec::with_capacity(3 + row.len());
            fields.push(rec.subject_id.clone());
            fields.push(rec.session_id.clone());
            fields.push(rec.labels[s].to_string());
            fields.extend(row.iter().map(|&v| fmt_f64(v)));
            w.write_record(&fields)?;
        }
    }
    w.flush()?;
    Ok(())
}
