//! Weekly windowing under a token budget.
//!
//! Windows are anchored at the first sample, cover `window_days` each and are
//! split at their time midpoint while their serialized form is over budget.
//! [`extend_for_gaps`] then merges neighbours so no data gap is cut in two.

use std::ops::Range;

use chrono::TimeDelta;
use thiserror::Error;

use crate::ingest::{render_rows, Gap};
use crate::types::{Sample, SoilMoistureSeries, Timestamp};

pub const DEFAULT_WINDOW_DAYS: u32 = 7;
pub const DEFAULT_TOKEN_BUDGET: usize = 30_000;

/// Characters of serialized CSV per estimated token.
pub const CHARS_PER_TOKEN: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("window_days must be at least 1")]
    WindowTooSmall,
    #[error("budget infeasible: {budget} tokens cannot hold a {needed}-token sample line")]
    BudgetInfeasible { budget: usize, needed: usize },
}

/// A contiguous run of samples from one series, the unit of analysis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub samples: Vec<Sample>,
    pub window_start: Timestamp,
    /// Inclusive.
    pub window_end: Timestamp,
    pub token_estimate: usize,
    /// Positions of `samples` in the source series.
    pub source_range: Range<usize>,
}

impl Segment {
    fn new(series: &[Sample], range: Range<usize>, window_start: Timestamp, window_end: Timestamp) -> Self {
        let samples = series[range.clone()].to_vec();
        let token_estimate = estimate_tokens(&samples);
        Self {
            samples,
            window_start,
            window_end,
            token_estimate,
            source_range: range,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn tokens_for_chars(chars: usize) -> usize {
    chars.div_ceil(CHARS_PER_TOKEN)
}

/// Token estimate for arbitrary text.
pub fn estimate_text_tokens(text: &str) -> usize {
    tokens_for_chars(text.chars().count())
}

/// Token estimate for the serialized form of `samples`.
pub fn estimate_tokens(samples: &[Sample]) -> usize {
    tokens_for_chars(render_rows(samples).len())
}

pub fn segment_weekly(
    series: &SoilMoistureSeries,
    window_days: u32,
    budget: usize,
) -> Result<Vec<Segment>, SegmentError> {
    if window_days == 0 {
        return Err(SegmentError::WindowTooSmall);
    }
    let samples = series.samples();
    let needed = samples
        .iter()
        .map(|s| estimate_tokens(std::slice::from_ref(s)))
        .max()
        .unwrap_or(0);
    if budget == 0 || needed > budget {
        return Err(SegmentError::BudgetInfeasible { budget, needed });
    }

    let width = TimeDelta::days(i64::from(window_days));
    let one_sec = TimeDelta::seconds(1);
    let first = series.first_timestamp();
    let mut out = Vec::new();
    let mut pos = 0;
    let mut window_start = first;
    while pos < samples.len() {
        let window_end = window_start + width - one_sec;
        let end = pos + samples[pos..].partition_point(|s| s.timestamp <= window_end);
        if end > pos {
            split_to_budget(samples, pos..end, window_start, window_end, budget, &mut out);
        }
        pos = end;
        window_start += width;
    }
    Ok(out)
}

fn split_to_budget(
    samples: &[Sample],
    range: Range<usize>,
    start: Timestamp,
    end: Timestamp,
    budget: usize,
    out: &mut Vec<Segment>,
) {
    if range.is_empty() {
        return;
    }
    let seg = Segment::new(samples, range.clone(), start, end);
    if seg.token_estimate <= budget || range.len() == 1 {
        out.push(seg);
        return;
    }
    let half = TimeDelta::seconds((end - start).num_seconds() / 2);
    let mut mid = start + half;
    let mut cut = range.start + samples[range.clone()].partition_point(|s| s.timestamp <= mid);
    if cut == range.start || cut == range.end {
        // Every sample sits on one side of the time midpoint; cut by count instead.
        cut = range.start + range.len() / 2;
        mid = samples[cut - 1].timestamp;
    }
    split_to_budget(samples, range.start..cut, start, mid, budget, out);
    split_to_budget(samples, cut..range.end, mid + TimeDelta::seconds(1), end, budget, out);
}

/// Merges adjacent segments whose shared boundary falls inside a gap.
///
/// Merged segments can exceed the original budget; callers that need the
/// budget guarantee re-check `token_estimate`.
pub fn extend_for_gaps(segments: Vec<Segment>, gaps: &[Gap]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segments.len());
    for seg in segments {
        let straddles = out.last().is_some_and(|prev: &Segment| {
            let (Some(last), Some(first)) = (prev.samples.last(), seg.samples.first()) else {
                return false;
            };
            gaps.iter()
                .any(|g| g.before == last.timestamp && g.after == first.timestamp)
        });
        if straddles {
            let prev = out.pop().expect("checked above");
            out.push(merge(prev, seg));
        } else {
            out.push(seg);
        }
    }
    out
}

fn merge(a: Segment, b: Segment) -> Segment {
    let mut samples = a.samples;
    samples.extend(b.samples);
    let token_estimate = estimate_tokens(&samples);
    Segment {
        samples,
        window_start: a.window_start,
        window_end: b.window_end,
        token_estimate,
        source_range: a.source_range.start..b.source_range.end,
    }
}
