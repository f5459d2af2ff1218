//! Domain types shared by every stage of the pipeline.
//!
//! Moisture values are carried as [`Percent`], a fixed-point count of tenths of
//! a percentage point, so the one-decimal rule holds by construction and
//! equality is exact.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Timestamp layout used in CSV files, prompts and reports.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Lower edge of the physically plausible volumetric moisture range.
pub const MOISTURE_MIN: Percent = Percent(0);
/// Upper edge of the physically plausible volumetric moisture range.
pub const MOISTURE_MAX: Percent = Percent(600);

pub type Timestamp = NaiveDateTime;

pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(text: &str) -> Option<Timestamp> {
    NaiveDateTime::parse_from_str(text.trim(), TIMESTAMP_FORMAT).ok()
}

/// A percentage stored in tenths of a point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(i32);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PercentError {
    #[error("not a decimal number: {0:?}")]
    NotANumber(String),
    #[error("non-finite value: {0:?}")]
    NonFinite(String),
    #[error("value out of representable range: {0:?}")]
    OutOfRange(String),
}

impl Percent {
    pub const ZERO: Percent = Percent(0);

    pub const fn from_tenths(tenths: i32) -> Self {
        Percent(tenths)
    }

    pub const fn tenths(self) -> i32 {
        self.0
    }

    /// Round half away from zero to one decimal.
    pub fn from_f64(value: f64) -> Self {
        let scaled = value * 10.0;
        // Nudge values that sit a hair under .5 because of binary representation.
        let nudged = scaled + scaled.signum() * 1e-9;
        Percent(nudged.round() as i32)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }

    /// Parse a decimal literal, rounding half-up to one decimal.
    ///
    /// Plain literals (`-12.345`, `7`, `.5`) are rounded on their digits, so
    /// `23.45` becomes `23.5` regardless of binary representation. Exponent
    /// forms fall back to `f64` parsing.
    pub fn parse_decimal(text: &str) -> Result<Self, PercentError> {
        let t = text.trim();
        if t.is_empty() {
            return Err(PercentError::NotANumber(text.to_string()));
        }
        let (negative, body) = match t.as_bytes()[0] {
            b'-' => (true, &t[1..]),
            b'+' => (false, &t[1..]),
            _ => (false, t),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        let plain = !(int_part.is_empty() && frac_part.is_empty())
            && int_part.bytes().all(|b| b.is_ascii_digit())
            && frac_part.bytes().all(|b| b.is_ascii_digit());
        if !plain {
            let v: f64 = t
                .parse()
                .map_err(|_| PercentError::NotANumber(text.to_string()))?;
            if !v.is_finite() {
                return Err(PercentError::NonFinite(text.to_string()));
            }
            if v.abs() > 1e8 {
                return Err(PercentError::OutOfRange(text.to_string()));
            }
            return Ok(Percent::from_f64(v));
        }
        let digits = int_part.trim_start_matches('0');
        if digits.len() > 8 {
            return Err(PercentError::OutOfRange(text.to_string()));
        }
        let int_val: i64 = if digits.is_empty() { 0 } else { digits.parse().unwrap_or(0) };
        let mut frac = frac_part.bytes().map(|b| i64::from(b - b'0'));
        let first = frac.next().unwrap_or(0);
        let round_up = frac.next().is_some_and(|d| d >= 5);
        let magnitude = int_val * 10 + first + i64::from(round_up);
        let tenths = if negative { -magnitude } else { magnitude };
        Ok(Percent(tenths as i32))
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{}", abs / 10, abs % 10)
    }
}

impl FromStr for Percent {
    type Err = PercentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Percent::parse_decimal(s)
    }
}

impl std::ops::Add for Percent {
    type Output = Percent;
    fn add(self, rhs: Percent) -> Percent {
        Percent(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Percent {
    type Output = Percent;
    fn sub(self, rhs: Percent) -> Percent {
        Percent(self.0 - rhs.0)
    }
}

impl std::ops::Neg for Percent {
    type Output = Percent;
    fn neg(self) -> Percent {
        Percent(-self.0)
    }
}

impl std::iter::Sum for Percent {
    fn sum<I: Iterator<Item = Percent>>(iter: I) -> Percent {
        Percent(iter.map(|p| p.0).sum())
    }
}

impl Serialize for Percent {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        if !v.is_finite() {
            return Err(serde::de::Error::custom("non-finite percent"));
        }
        Ok(Percent::from_f64(v))
    }
}

/// One timestamped moisture reading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Sample {
    pub timestamp: Timestamp,
    pub moisture: Percent,
}

impl Sample {
    pub fn new(timestamp: Timestamp, moisture: Percent) -> Self {
        Self { timestamp, moisture }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub probe: String,
    pub depth_cm: u32,
    pub crop: Option<String>,
}

impl SeriesMeta {
    pub fn new(probe: impl Into<String>, depth_cm: u32) -> Self {
        Self {
            probe: probe.into(),
            depth_cm,
            crop: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("series is empty")]
    Empty,
    #[error("timestamps not strictly increasing at sample {index}")]
    NotIncreasing { index: usize },
    #[error("series too short")]
    TooShort,
}

/// A validated, chronologically ordered moisture series for one probe depth.
///
/// Values are never rescaled; out-of-range readings are kept as evidence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SoilMoistureSeries {
    samples: Vec<Sample>,
    meta: SeriesMeta,
}

impl SoilMoistureSeries {
    pub fn new(samples: Vec<Sample>, meta: SeriesMeta) -> Result<Self, SeriesError> {
        if samples.is_empty() {
            return Err(SeriesError::Empty);
        }
        if let Some(index) = samples
            .windows(2)
            .position(|w| w[1].timestamp <= w[0].timestamp)
        {
            return Err(SeriesError::NotIncreasing { index: index + 1 });
        }
        Ok(Self { samples, meta })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn meta(&self) -> &SeriesMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_timestamp(&self) -> Timestamp {
        self.samples[0].timestamp
    }

    pub fn last_timestamp(&self) -> Timestamp {
        self.samples[self.samples.len() - 1].timestamp
    }
}

impl AsRef<[Sample]> for SoilMoistureSeries {
    fn as_ref(&self) -> &[Sample] {
        &self.samples
    }
}

/// Median spacing between consecutive samples.
pub fn infer_interval(series: &SoilMoistureSeries) -> Result<TimeDelta, SeriesError> {
    median_interval(series.samples())
}

pub fn median_interval(samples: &[Sample]) -> Result<TimeDelta, SeriesError> {
    if samples.len() < 2 {
        return Err(SeriesError::TooShort);
    }
    let mut gaps: Vec<i64> = samples
        .windows(2)
        .map(|w| (w[1].timestamp - w[0].timestamp).num_seconds())
        .collect();
    gaps.sort_unstable();
    let mid = gaps.len() / 2;
    let secs = if gaps.len() % 2 == 1 {
        gaps[mid]
    } else {
        (gaps[mid - 1] + gaps[mid]).div_euclid(2)
    };
    Ok(TimeDelta::seconds(secs))
}

/// The closed anomaly taxonomy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnomalyType {
    SingleSpike,
    SingleDip,
    MultipleSpikes,
    PersistentLevelShiftUp,
    PersistentLevelShiftDown,
    TransientLevelShiftUp,
    TransientLevelShiftDown,
    MissingValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown anomaly type: {0}")]
pub struct UnknownAnomalyType(pub String);

impl AnomalyType {
    pub const ALL: [AnomalyType; 8] = [
        AnomalyType::SingleSpike,
        AnomalyType::SingleDip,
        AnomalyType::MultipleSpikes,
        AnomalyType::PersistentLevelShiftUp,
        AnomalyType::PersistentLevelShiftDown,
        AnomalyType::TransientLevelShiftUp,
        AnomalyType::TransientLevelShiftDown,
        AnomalyType::MissingValue,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AnomalyType::SingleSpike => "SingleSpike",
            AnomalyType::SingleDip => "SingleDip",
            AnomalyType::MultipleSpikes => "MultipleSpikes",
            AnomalyType::PersistentLevelShiftUp => "PersistentLevelShiftUp",
            AnomalyType::PersistentLevelShiftDown => "PersistentLevelShiftDown",
            AnomalyType::TransientLevelShiftUp => "TransientLevelShiftUp",
            AnomalyType::TransientLevelShiftDown => "TransientLevelShiftDown",
            AnomalyType::MissingValue => "MissingValue",
        }
    }

    pub fn is_level_shift(self) -> bool {
        matches!(
            self,
            AnomalyType::PersistentLevelShiftUp
                | AnomalyType::PersistentLevelShiftDown
                | AnomalyType::TransientLevelShiftUp
                | AnomalyType::TransientLevelShiftDown
        )
    }
}

impl fmt::Display for AnomalyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AnomalyType {
    type Err = UnknownAnomalyType;

    /// Case-insensitive; spaces, underscores and hyphens are ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-' | '\t'))
            .flat_map(char::to_lowercase)
            .collect();
        AnomalyType::ALL
            .into_iter()
            .find(|t| t.label().to_lowercase() == key)
            .ok_or_else(|| UnknownAnomalyType(s.trim().to_string()))
    }
}

/// Where an anomaly occurs: one instant or an inclusive range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Span {
    At(Timestamp),
    Range(Timestamp, Timestamp),
}

impl Span {
    /// Collapses degenerate ranges to a single instant.
    pub fn between(start: Timestamp, end: Timestamp) -> Span {
        if start == end {
            Span::At(start)
        } else {
            Span::Range(start, end)
        }
    }

    pub fn start(&self) -> Timestamp {
        match *self {
            Span::At(t) | Span::Range(t, _) => t,
        }
    }

    pub fn end(&self) -> Timestamp {
        match *self {
            Span::At(t) | Span::Range(_, t) => t,
        }
    }

    pub fn contains(&self, ts: Timestamp) -> bool {
        self.start() <= ts && ts <= self.end()
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Span::At(t) => f.write_str(&format_timestamp(t)),
            Span::Range(a, b) => write!(f, "{}/{}", format_timestamp(a), format_timestamp(b)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnomalyEvent {
    pub kind: AnomalyType,
    pub span: Span,
    pub explanation: String,
}

impl AnomalyEvent {
    pub fn new(kind: AnomalyType, span: Span) -> Self {
        Self {
            kind,
            span,
            explanation: String::new(),
        }
    }

    pub fn with_explanation(mut self, explanation: impl Into<String>) -> Self {
        self.explanation = explanation.into();
        self
    }
}

/// A valid irrigation or rainfall event.
///
/// Baseline and plateau are known when the event came from a detector or a
/// generator; the wire format carries only onset and net gain, so parsed
/// reports leave them empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IrrigationEvent {
    pub onset: Timestamp,
    pub pre_spike_baseline: Option<Percent>,
    pub plateau: Option<Percent>,
    pub net_gain: Percent,
}

impl IrrigationEvent {
    pub fn measured(onset: Timestamp, pre_spike_baseline: Percent, plateau: Percent) -> Self {
        Self {
            onset,
            pre_spike_baseline: Some(pre_spike_baseline),
            plateau: Some(plateau),
            net_gain: plateau - pre_spike_baseline,
        }
    }

    pub fn reported(onset: Timestamp, net_gain: Percent) -> Self {
        Self {
            onset,
            pre_spike_baseline: None,
            plateau: None,
            net_gain,
        }
    }

    /// Drops the detector-only fields, leaving what the report format carries.
    pub fn wire(self) -> Self {
        Self::reported(self.onset, self.net_gain)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AnalysisReport {
    pub anomaly_detected: bool,
    pub anomalies: Vec<AnomalyEvent>,
    pub irrigation_events: Vec<IrrigationEvent>,
    pub key_event: Option<Timestamp>,
    pub final_net_gain: Percent,
}

impl AnalysisReport {
    /// Builds a report whose derived fields are consistent with its lists.
    pub fn from_events(anomalies: Vec<AnomalyEvent>, irrigation_events: Vec<IrrigationEvent>) -> Self {
        let key_event = key_event_of(&irrigation_events);
        let final_net_gain = irrigation_events.iter().map(|e| e.net_gain).sum();
        Self {
            anomaly_detected: !anomalies.is_empty(),
            anomalies,
            irrigation_events,
            key_event,
            final_net_gain,
        }
    }

    /// The same report with detector-only irrigation fields removed.
    pub fn wire(&self) -> Self {
        Self {
            irrigation_events: self.irrigation_events.iter().map(|e| e.wire()).collect(),
            ..self.clone()
        }
    }
}

/// Onset of the event with the largest net gain; ties go to the earliest onset.
pub fn key_event_of(events: &[IrrigationEvent]) -> Option<Timestamp> {
    events
        .iter()
        .min_by(|a, b| b.net_gain.cmp(&a.net_gain).then(a.onset.cmp(&b.onset)))
        .map(|e| e.onset)
}

/// One broken report invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: String,
}

impl Violation {
    fn new(field: &'static str, rule: impl Into<String>) -> Self {
        Self {
            field,
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Checks every report invariant; an empty result means the report is valid.
pub fn validate_report(report: &AnalysisReport) -> Vec<Violation> {
    let mut out = Vec::new();

    if report.anomaly_detected != !report.anomalies.is_empty() {
        out.push(Violation::new(
            "anomaly_detected",
            format!(
                "must be {} when {} anomalies are listed",
                !report.anomalies.is_empty(),
                report.anomalies.len()
            ),
        ));
    }

    for (i, a) in report.anomalies.iter().enumerate() {
        if a.span.start() > a.span.end() {
            out.push(Violation::new(
                "anomalies.span",
                format!("anomaly {i}: range start after range end"),
            ));
        }
        if a.explanation.contains(['\n', '\r']) || a.explanation.trim() != a.explanation {
            out.push(Violation::new(
                "anomalies.explanation",
                format!("anomaly {i}: explanation must be one trimmed line"),
            ));
        }
    }

    for (i, e) in report.irrigation_events.iter().enumerate() {
        if let (Some(base), Some(plateau)) = (e.pre_spike_baseline, e.plateau) {
            // Both sides are exact tenths, so the 0.05 slack means equality.
            if plateau - base != e.net_gain {
                out.push(Violation::new(
                    "irrigation_events.net_gain",
                    format!(
                        "event {i}: net_gain {} differs from plateau {} minus baseline {}",
                        e.net_gain, plateau, base
                    ),
                ));
            }
        }
    }

    let expected_key = key_event_of(&report.irrigation_events);
    match (report.key_event, expected_key) {
        (None, None) => {}
        (Some(k), Some(exp)) if k == exp => {}
        (Some(_), None) => out.push(Violation::new(
            "key_event",
            "present although no irrigation events are listed",
        )),
        (None, Some(exp)) => out.push(Violation::new(
            "key_event",
            format!("missing; expected {}", format_timestamp(&exp)),
        )),
        (Some(k), Some(exp)) => out.push(Violation::new(
            "key_event",
            format!(
                "{} is not the onset of the maximum-net-gain event ({})",
                format_timestamp(&k),
                format_timestamp(&exp)
            ),
        )),
    }

    let sum: Percent = report.irrigation_events.iter().map(|e| e.net_gain).sum();
    let slack = report.irrigation_events.len() as i32 / 2;
    if (report.final_net_gain - sum).tenths().abs() > slack {
        out.push(Violation::new(
            "final_net_gain",
            format!(
                "{} differs from the sum of event net gains {}",
                report.final_net_gain, sum
            ),
        ));
    }

    out
}

/// Flags events whose net gain falls below the validity threshold.
pub fn validate_event_gains(report: &AnalysisReport, threshold: Percent) -> Vec<Violation> {
    report
        .irrigation_events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.net_gain < threshold)
        .map(|(i, e)| {
            Violation::new(
                "irrigation_events.net_gain",
                format!("event {i}: net_gain {} below threshold {}", e.net_gain, threshold),
            )
        })
        .collect()
}
