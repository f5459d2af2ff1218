//! The report wire format.
//!
//! [`render`] writes the canonical layout; [`parse`] reads it back and also
//! accepts the decorations chat models tend to add (markdown bullets, bold
//! keys, numbering, prose around the two sections). A JSON mirror is provided
//! for machine consumers.

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{
    format_timestamp, validate_report, AnalysisReport, AnomalyEvent, AnomalyType, IrrigationEvent,
    Percent, Span, Timestamp, Violation,
};

pub const ANOMALY_HEADER: &str = "ANOMALY REPORT";
pub const IRRIGATION_HEADER: &str = "IRRIGATION REPORT";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("invalid report: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("unstructured response")]
    Unstructured,
    #[error("{0}")]
    UnknownType(String),
    #[error("line {line}: cannot parse number {text:?}")]
    BadNumber { line: usize, text: String },
    #[error("line {line}: cannot parse time {text:?}")]
    BadTime { line: usize, text: String },
    #[error("line {line}: {field} given before any `time:` entry")]
    Orphan { line: usize, field: &'static str },
    #[error("line {line}: entry is missing {field}")]
    MissingField { line: usize, field: &'static str },
    #[error("invalid JSON report: {0}")]
    Json(String),
}

pub fn render(report: &AnalysisReport) -> Result<String, ReportError> {
    let violations = validate_report(report);
    if !violations.is_empty() {
        return Err(ReportError::Invalid(violations));
    }
    let mut out = String::new();
    out.push_str(ANOMALY_HEADER);
    out.push('\n');
    out.push_str(if report.anomaly_detected {
        "anomaly_detected: yes\n"
    } else {
        "anomaly_detected: no\n"
    });
    for a in &report.anomalies {
        out.push_str(&format!("- time: {}\n", a.span));
        out.push_str(&format!("  type: {}\n", a.kind));
        out.push_str(&format!("  explanation: {}\n", a.explanation));
    }
    out.push_str(IRRIGATION_HEADER);
    out.push('\n');
    out.push_str(&format!(
        "summary: {} valid irrigation/rainfall events detected\n",
        report.irrigation_events.len()
    ));
    for e in &report.irrigation_events {
        out.push_str(&format!("- time: {}\n", format_timestamp(&e.onset)));
        out.push_str(&format!("  net_gain: {}\n", e.net_gain));
    }
    match report.key_event {
        Some(k) => out.push_str(&format!("key_event: {}\n", format_timestamp(&k))),
        None => out.push_str("key_event: none\n"),
    }
    out.push_str(&format!("final_net_gain: {}\n", report.final_net_gain));
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Anomaly,
    Irrigation,
}

/// Strips list markers, emphasis and heading marks from a line.
fn strip_decoration(line: &str) -> &str {
    let mut s = line.trim();
    loop {
        let before = s;
        s = s.trim_start_matches(['#', '>']).trim_start();
        for marker in ["- ", "* ", "+ ", "• ", "-\t", "*\t"] {
            if let Some(rest) = s.strip_prefix(marker) {
                s = rest.trim_start();
            }
        }
        // `1.` / `1)` numbering
        let digits = s.bytes().take_while(u8::is_ascii_digit).count();
        if digits > 0 && digits < 4 {
            let rest = &s[digits..];
            if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
                s = r.trim_start();
            }
        }
        if s == before {
            return s;
        }
    }
}

fn strip_emphasis(s: &str) -> String {
    s.replace("**", "").replace("__", "").replace('`', "")
}

fn header_of(clean: &str) -> Option<Section> {
    let key: String = clean
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_uppercase)
        .collect();
    match key.as_str() {
        "ANOMALYREPORT" => Some(Section::Anomaly),
        "IRRIGATIONREPORT" => Some(Section::Irrigation),
        _ => None,
    }
}

/// Splits `key: value`; emphasis is removed from the key and from the ends
/// of the value only, so explanation text passes through unchanged.
fn split_key(clean: &str) -> Option<(String, &str)> {
    let (k, v) = clean.split_once(':')?;
    let v = v.trim().trim_matches(['*', '`']).trim();
    let key: String = strip_emphasis(k)
        .trim()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .flat_map(char::to_lowercase)
        .collect();
    if key.is_empty() || !key.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return None;
    }
    Some((key, v.trim()))
}

fn parse_time(text: &str, line: usize) -> Result<Timestamp, ReportError> {
    let t = text.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == ',');
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"] {
        if let Ok(ts) = NaiveDateTime::parse_from_str(t, fmt) {
            return Ok(ts);
        }
    }
    Err(ReportError::BadTime {
        line,
        text: text.to_string(),
    })
}

fn parse_span(text: &str, line: usize) -> Result<Span, ReportError> {
    let t = text.trim();
    for sep in ["/", " to ", " \u{2013} ", " \u{2014} ", " - "] {
        if let Some((a, b)) = t.split_once(sep) {
            let start = parse_time(a, line)?;
            let end = parse_time(b, line)?;
            return Ok(Span::between(start, end));
        }
    }
    Ok(Span::At(parse_time(t, line)?))
}

fn parse_number(text: &str, line: usize) -> Result<Percent, ReportError> {
    let t = text
        .trim()
        .trim_end_matches(['.', ','])
        .trim_end_matches("percentage points")
        .trim_end_matches("pp")
        .trim_end_matches('%')
        .trim();
    Percent::parse_decimal(t).map_err(|_| ReportError::BadNumber {
        line,
        text: text.to_string(),
    })
}

fn parse_flag(text: &str) -> Option<bool> {
    let t: String = text
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    match t.as_str() {
        "yes" | "true" | "y" => Some(true),
        "no" | "false" | "n" => Some(false),
        _ => None,
    }
}

struct PendingAnomaly {
    line: usize,
    span: Span,
    kind: Option<AnomalyType>,
    explanation: String,
}

struct PendingEvent {
    line: usize,
    onset: Timestamp,
    net_gain: Option<Percent>,
}

/// Reads a report, tolerating markdown and surrounding prose.
///
/// Content is taken as stated: a wrong `final_net_gain` or `key_event` in
/// the text is preserved, not recomputed. When `anomaly_detected` is absent
/// it is derived from the anomaly list.
pub fn parse(text: &str) -> Result<AnalysisReport, ReportError> {
    let mut section = Section::Preamble;
    let mut seen_anomaly = false;
    let mut seen_irrigation = false;

    let mut anomaly_detected = None;
    let mut anomalies: Vec<PendingAnomaly> = Vec::new();
    let mut events: Vec<PendingEvent> = Vec::new();
    let mut key_event: Option<Option<Timestamp>> = None;
    let mut final_net_gain = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let clean = strip_decoration(raw).trim();
        if clean.is_empty() {
            continue;
        }
        if let Some(s) = header_of(&strip_emphasis(clean)) {
            match s {
                Section::Anomaly => seen_anomaly = true,
                Section::Irrigation => seen_irrigation = true,
                Section::Preamble => {}
            }
            section = s;
            continue;
        }
        let Some((key, value)) = split_key(clean) else {
            continue;
        };
        match (section, key.as_str()) {
            (Section::Anomaly, "anomaly_detected") => anomaly_detected = parse_flag(value),
            (Section::Anomaly, "time") => anomalies.push(PendingAnomaly {
                line: line_no,
                span: parse_span(value, line_no)?,
                kind: None,
                explanation: String::new(),
            }),
            (Section::Anomaly, "type") => {
                let kind = value
                    .parse::<AnomalyType>()
                    .map_err(|e| ReportError::UnknownType(e.to_string()))?;
                anomalies
                    .last_mut()
                    .ok_or(ReportError::Orphan { line: line_no, field: "type" })?
                    .kind = Some(kind);
            }
            (Section::Anomaly, "explanation") => {
                anomalies
                    .last_mut()
                    .ok_or(ReportError::Orphan { line: line_no, field: "explanation" })?
                    .explanation = value.to_string();
            }
            (Section::Irrigation, "time") => events.push(PendingEvent {
                line: line_no,
                onset: parse_time(value, line_no)?,
                net_gain: None,
            }),
            (Section::Irrigation, "net_gain") => {
                let gain = parse_number(value, line_no)?;
                events
                    .last_mut()
                    .ok_or(ReportError::Orphan { line: line_no, field: "net_gain" })?
                    .net_gain = Some(gain);
            }
            (Section::Irrigation, "key_event") => {
                let v = value.trim().trim_end_matches('.');
                key_event = Some(if v.eq_ignore_ascii_case("none") || v.eq_ignore_ascii_case("n/a") {
                    None
                } else {
                    Some(parse_time(v, line_no)?)
                });
            }
            (Section::Irrigation, "final_net_gain") => {
                final_net_gain = Some(parse_number(value, line_no)?);
            }
            _ => {}
        }
    }

    if !seen_anomaly || !seen_irrigation {
        return Err(ReportError::Unstructured);
    }

    let anomalies = anomalies
        .into_iter()
        .map(|p| {
            Ok(AnomalyEvent {
                kind: p.kind.ok_or(ReportError::MissingField { line: p.line, field: "type" })?,
                span: p.span,
                explanation: p.explanation,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;
    let irrigation_events = events
        .into_iter()
        .map(|p| {
            Ok(IrrigationEvent::reported(
                p.onset,
                p.net_gain.ok_or(ReportError::MissingField { line: p.line, field: "net_gain" })?,
            ))
        })
        .collect::<Result<Vec<_>, ReportError>>()?;

    let derived = AnalysisReport::from_events(anomalies, irrigation_events);
    Ok(AnalysisReport {
        anomaly_detected: anomaly_detected.unwrap_or(derived.anomaly_detected),
        key_event: key_event.unwrap_or(derived.key_event),
        final_net_gain: final_net_gain.unwrap_or(derived.final_net_gain),
        ..derived
    })
}

#[derive(Serialize, Deserialize)]
struct JsonAnomaly {
    time: String,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    explanation: String,
}

#[derive(Serialize, Deserialize)]
struct JsonEvent {
    time: String,
    net_gain: Percent,
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    anomaly_detected: bool,
    anomalies: Vec<JsonAnomaly>,
    events: Vec<JsonEvent>,
    key_event: Option<String>,
    final_net_gain: Percent,
}

pub fn to_json(report: &AnalysisReport) -> String {
    let doc = JsonReport {
        anomaly_detected: report.anomaly_detected,
        anomalies: report
            .anomalies
            .iter()
            .map(|a| JsonAnomaly {
                time: a.span.to_string(),
                kind: a.kind.label().to_string(),
                explanation: a.explanation.clone(),
            })
            .collect(),
        events: report
            .irrigation_events
            .iter()
            .map(|e| JsonEvent {
                time: format_timestamp(&e.onset),
                net_gain: e.net_gain,
            })
            .collect(),
        key_event: report.key_event.as_ref().map(format_timestamp),
        final_net_gain: report.final_net_gain,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<AnalysisReport, ReportError> {
    let doc: JsonReport =
        serde_json::from_str(text).map_err(|e| ReportError::Json(e.to_string()))?;
    let anomalies = doc
        .anomalies
        .into_iter()
        .map(|a| {
            Ok(AnomalyEvent {
                kind: a
                    .kind
                    .parse()
                    .map_err(|e: crate::types::UnknownAnomalyType| ReportError::UnknownType(e.to_string()))?,
                span: parse_span(&a.time, 0)?,
                explanation: a.explanation,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;
    let irrigation_events = doc
        .events
        .into_iter()
        .map(|e| Ok(IrrigationEvent::reported(parse_time(&e.time, 0)?, e.net_gain)))
        .collect::<Result<Vec<_>, ReportError>>()?;
    let key_event = doc.key_event.map(|k| parse_time(&k, 0)).transpose()?;
    Ok(AnalysisReport {
        anomaly_detected: doc.anomaly_detected,
        anomalies,
        irrigation_events,
        key_event,
        final_net_gain: doc.final_net_gain,
    })
}
