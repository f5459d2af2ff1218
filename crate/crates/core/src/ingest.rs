//! CSV ingestion and data-gap detection.
//!
//! Files are UTF-8 with the header `timestamp,moisture`; lines starting with
//! `#` and blank lines are ignored. Samples must already be in strictly
//! increasing time order: out-of-order rows are rejected, never re-sorted.

use chrono::TimeDelta;
use thiserror::Error;

use crate::types::{
    format_timestamp, parse_timestamp, Percent, Sample, SeriesMeta,
    SoilMoistureSeries, Timestamp,
};

pub const CSV_HEADER: &str = "timestamp,moisture";

/// Gaps must exceed this multiple of the nominal interval.
pub const DEFAULT_GAP_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("missing header `{CSV_HEADER}`, line {line}")]
    MissingHeader { line: usize },
    #[error("expected two fields, line {line}")]
    FieldCount { line: usize },
    #[error("malformed timestamp, line {line}")]
    MalformedTimestamp { line: usize },
    #[error("non-numeric moisture, line {line}")]
    NonNumericMoisture { line: usize },
    #[error("duplicate timestamp, line {line}")]
    DuplicateTimestamp { line: usize },
    #[error("non-monotonic timestamp, line {line}")]
    NonMonotonic { line: usize },
    #[error("empty body")]
    EmptyBody,
}

impl IngestError {
    pub fn line(&self) -> Option<usize> {
        match *self {
            IngestError::MissingHeader { line }
            | IngestError::FieldCount { line }
            | IngestError::MalformedTimestamp { line }
            | IngestError::NonNumericMoisture { line }
            | IngestError::DuplicateTimestamp { line }
            | IngestError::NonMonotonic { line } => Some(line),
            IngestError::NotUtf8 | IngestError::EmptyBody => None,
        }
    }
}

pub fn parse_csv(bytes: &[u8], meta: SeriesMeta) -> Result<SoilMoistureSeries, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|_| IngestError::NotUtf8)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let samples = parse_lines(text, true)?;
    // Ordering was enforced row by row.
    SoilMoistureSeries::new(samples, meta).map_err(|_| IngestError::EmptyBody)
}

/// Parses header-less `timestamp,moisture` rows with the same checks as
/// [`parse_csv`]. Used on the data block of a prompt.
pub fn parse_rows(text: &str) -> Result<Vec<Sample>, IngestError> {
    parse_lines(text, false)
}

fn parse_lines(text: &str, expect_header: bool) -> Result<Vec<Sample>, IngestError> {
    let mut header_seen = !expect_header;
    let mut samples: Vec<Sample> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            let normalized: String = line.chars().filter(|c| !c.is_whitespace()).collect();
            if normalized != CSV_HEADER {
                return Err(IngestError::MissingHeader { line: line_no });
            }
            header_seen = true;
            continue;
        }
        let sample = parse_row(line, line_no)?;
        if let Some(prev) = samples.last() {
            if sample.timestamp == prev.timestamp {
                return Err(IngestError::DuplicateTimestamp { line: line_no });
            }
            if sample.timestamp < prev.timestamp {
                return Err(IngestError::NonMonotonic { line: line_no });
            }
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(IngestError::EmptyBody);
    }
    Ok(samples)
}

fn parse_row(line: &str, line_no: usize) -> Result<Sample, IngestError> {
    let mut fields = line.split(',');
    let (Some(ts), Some(value), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(IngestError::FieldCount { line: line_no });
    };
    let timestamp =
        parse_timestamp(ts).ok_or(IngestError::MalformedTimestamp { line: line_no })?;
    let moisture = Percent::parse_decimal(value)
        .map_err(|_| IngestError::NonNumericMoisture { line: line_no })?;
    Ok(Sample::new(timestamp, moisture))
}

/// One CSV line per sample, no header, newline-terminated.
pub fn render_rows(samples: &[Sample]) -> String {
    let mut out = String::with_capacity(samples.len() * 25);
    for s in samples {
        out.push_str(&format_timestamp(&s.timestamp));
        out.push(',');
        out.push_str(&s.moisture.to_string());
        out.push('\n');
    }
    out
}

pub fn render_csv(series: &SoilMoistureSeries) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    out.push_str(&render_rows(series.samples()));
    out
}

/// A stretch with no samples between two consecutive readings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gap {
    /// Last sample before the hole.
    pub before: Timestamp,
    /// First sample after the hole.
    pub after: Timestamp,
    /// `after - before`.
    pub missing_span: TimeDelta,
}

pub fn detect_gaps(
    series: &SoilMoistureSeries,
    nominal_interval: TimeDelta,
    gap_factor: f64,
) -> Vec<Gap> {
    find_gaps(series.samples(), nominal_interval, gap_factor)
}

/// Slice form of [`detect_gaps`], usable on segments.
pub fn find_gaps(samples: &[Sample], nominal_interval: TimeDelta, gap_factor: f64) -> Vec<Gap> {
    let limit = nominal_interval.num_milliseconds() as f64 * gap_factor;
    samples
        .windows(2)
        .filter_map(|w| {
            let span = w[1].timestamp - w[0].timestamp;
            (span.num_milliseconds() as f64 > limit).then_some(Gap {
                before: w[0].timestamp,
                after: w[1].timestamp,
                missing_span: span,
            })
        })
        .collect()
}
