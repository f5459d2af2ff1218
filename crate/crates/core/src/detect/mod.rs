//! Rule-based detectors: the reference irrigation and anomaly detector, and
//! the FlagIT threshold baseline.

mod anomaly;
mod flagit;
mod irrigation;
mod params;

use chrono::TimeDelta;
use thiserror::Error;

use crate::ingest::{find_gaps, Gap};
use crate::types::{median_interval, AnalysisReport, AnomalyEvent, IrrigationEvent, Sample, Timestamp};

pub use anomaly::detect_anomalies;
pub use flagit::flagit;
pub use irrigation::detect_irrigation;
pub use params::{DetectorParams, FlagitParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectError {
    #[error("segment too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },
}

/// Builds a consistent report from detector output.
pub fn compose_report(
    mut irrigation: Vec<IrrigationEvent>,
    mut anomalies: Vec<AnomalyEvent>,
) -> AnalysisReport {
    irrigation.sort_by_key(|e| e.onset);
    anomalies.sort_by_key(|a| (a.span.start(), a.span.end()));
    AnalysisReport::from_events(anomalies, irrigation)
}

/// Runs both reference detectors on one segment. Segments too short for
/// irrigation detection are reported without irrigation events.
pub fn analyze(samples: &[Sample], params: &DetectorParams) -> AnalysisReport {
    let irrigation = detect_irrigation(samples, params).unwrap_or_default();
    let anomalies = detect_anomalies(samples, params, &irrigation);
    compose_report(irrigation, anomalies)
}

/// Moisture values as floats plus the gap structure of a segment.
pub(crate) struct View {
    pub ts: Vec<Timestamp>,
    pub x: Vec<f64>,
    pub interval: TimeDelta,
    pub gaps: Vec<Gap>,
    /// `block[i]` counts gap boundaries at or before sample `i`.
    block: Vec<usize>,
}

impl View {
    pub fn new(samples: &[Sample], gap_factor: f64) -> Self {
        let interval = median_interval(samples).unwrap_or(TimeDelta::minutes(15));
        let gaps = find_gaps(samples, interval, gap_factor);
        let mut block = Vec::with_capacity(samples.len());
        let mut g = gaps.iter().peekable();
        let mut count = 0;
        for s in samples {
            if g.peek().is_some_and(|gap| gap.after == s.timestamp) {
                count += 1;
                g.next();
            }
            block.push(count);
        }
        Self {
            ts: samples.iter().map(|s| s.timestamp).collect(),
            x: samples.iter().map(|s| s.moisture.as_f64()).collect(),
            interval,
            gaps,
            block,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    /// True when `a..=b` lies inside the segment without crossing a gap.
    pub fn contiguous(&self, a: usize, b: usize) -> bool {
        a <= b && b < self.len() && self.block[a] == self.block[b]
    }

    /// Median of `x[a..b]`, or `None` if the range is empty, out of bounds
    /// or crosses a gap.
    pub fn median(&self, a: usize, b: usize) -> Option<f64> {
        (a < b && self.contiguous(a, b - 1)).then(|| median(&self.x[a..b]))
    }

    /// Step between the medians of `w` samples after and before `j`.
    pub fn step(&self, j: usize, w: usize) -> Option<f64> {
        let left = self.median(j.checked_sub(w)?, j)?;
        let right = self.median(j, j + w)?;
        Some(right - left)
    }

    pub fn index_of(&self, ts: Timestamp) -> Option<usize> {
        self.ts.binary_search(&ts).ok()
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
