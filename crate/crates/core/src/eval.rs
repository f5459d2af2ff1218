//! Event matching and detection metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::TimeDelta;
use serde::Serialize;
use thiserror::Error;

use crate::types::{AnalysisReport, AnomalyEvent, AnomalyType, Timestamp};

pub const DEFAULT_TOLERANCE: TimeDelta = TimeDelta::hours(1);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("length mismatch: {predicted} predictions for {truth} truths")]
    LengthMismatch { predicted: usize, truth: usize },
}

/// A ratio that is 0.0 and flagged when its denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rate {
    pub value: f64,
    pub degenerate: bool,
}

impl Rate {
    fn ratio(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Rate {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Rate {
                value: num / den,
                degenerate: false,
            }
        }
    }
}

pub fn precision(tp: usize, fp: usize) -> Rate {
    Rate::ratio(tp as f64, (tp + fp) as f64)
}

pub fn recall(tp: usize, fn_: usize) -> Rate {
    Rate::ratio(tp as f64, (tp + fn_) as f64)
}

pub fn f1(p: f64, r: f64) -> Rate {
    Rate::ratio(2.0 * p * r, p + r)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// (detected index, truth index)
    pub pairs: Vec<(usize, usize)>,
}

/// One-to-one matching of reference timestamps within `tolerance`.
///
/// Both lists are walked in time order; each detection takes the earliest
/// unmatched truth within reach. Truths that fall behind the window of the
/// current detection can match no later detection either, which makes the
/// greedy choice maximal.
pub fn match_events(detected: &[Timestamp], truth: &[Timestamp], tolerance: TimeDelta) -> MatchResult {
    let mut d_order: Vec<usize> = (0..detected.len()).collect();
    d_order.sort_by_key(|&i| detected[i]);
    let mut t_order: Vec<usize> = (0..truth.len()).collect();
    t_order.sort_by_key(|&i| truth[i]);

    let mut pairs = Vec::new();
    let mut j = 0;
    for &di in &d_order {
        let d = detected[di];
        while j < t_order.len() && truth[t_order[j]] < d - tolerance {
            j += 1;
        }
        if j < t_order.len() && truth[t_order[j]] <= d + tolerance {
            pairs.push((di, t_order[j]));
            j += 1;
        }
    }
    MatchResult {
        tp: pairs.len(),
        fp: detected.len() - pairs.len(),
        fn_: truth.len() - pairs.len(),
        pairs,
    }
}

/// Share of matched pairs whose anomaly types agree.
pub fn type_accuracy(pairs: &[(usize, usize)], detected: &[AnomalyEvent], truth: &[AnomalyEvent]) -> Rate {
    let same = pairs
        .iter()
        .filter(|&&(d, t)| detected[d].kind == truth[t].kind)
        .count();
    Rate::ratio(same as f64, pairs.len() as f64)
}

pub fn net_gain_mse(predicted: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predicted.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskScores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Rate,
    pub recall: Rate,
    pub f1: Rate,
}

impl TaskScores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let p = precision(tp, fp);
        let r = recall(tp, fn_);
        Self {
            tp,
            fp,
            fn_,
            precision: p,
            recall: r,
            f1: f1(p.value, r.value),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentRow {
    pub key: String,
    pub anomaly_tp: usize,
    pub anomaly_fp: usize,
    pub anomaly_fn: usize,
    pub type_matches: usize,
    pub irrigation_tp: usize,
    pub irrigation_fp: usize,
    pub irrigation_fn: usize,
    pub predicted_final_net_gain: f64,
    pub true_final_net_gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalOutcome {
    pub anomaly: TaskScores,
    pub irrigation: TaskScores,
    pub type_accuracy: Rate,
    pub net_gain_mse: f64,
    pub n_segments: usize,
    pub segments: Vec<SegmentRow>,
}

/// Scores detected reports against truth reports, summing counts over all
/// segments before computing rates.
pub fn evaluate_corpus(
    reports: &[AnalysisReport],
    truths: &[AnalysisReport],
    tolerance: TimeDelta,
) -> Result<EvalOutcome, EvalError> {
    if reports.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            predicted: reports.len(),
            truth: truths.len(),
        });
    }
    let mut rows = Vec::with_capacity(reports.len());
    for (i, (r, t)) in reports.iter().zip(truths).enumerate() {
        let a = match_events(&anomaly_times(&r.anomalies), &anomaly_times(&t.anomalies), tolerance);
        let type_matches = a
            .pairs
            .iter()
            .filter(|&&(d, k)| r.anomalies[d].kind == t.anomalies[k].kind)
            .count();
        let g = match_events(&onsets(r), &onsets(t), tolerance);
        rows.push(SegmentRow {
            key: i.to_string(),
            anomaly_tp: a.tp,
            anomaly_fp: a.fp,
            anomaly_fn: a.fn_,
            type_matches,
            irrigation_tp: g.tp,
            irrigation_fp: g.fp,
            irrigation_fn: g.fn_,
            predicted_final_net_gain: r.final_net_gain.as_f64(),
            true_final_net_gain: t.final_net_gain.as_f64(),
        });
    }
    Ok(summarize(rows))
}

/// Aggregates per-segment rows.
pub fn summarize(rows: Vec<SegmentRow>) -> EvalOutcome {
    let sum = |f: fn(&SegmentRow) -> usize| rows.iter().map(f).sum::<usize>();
    let anomaly = TaskScores::from_counts(sum(|r| r.anomaly_tp), sum(|r| r.anomaly_fp), sum(|r| r.anomaly_fn));
    let irrigation = TaskScores::from_counts(
        sum(|r| r.irrigation_tp),
        sum(|r| r.irrigation_fp),
        sum(|r| r.irrigation_fn),
    );
    let type_accuracy = Rate::ratio(sum(|r| r.type_matches) as f64, anomaly.tp as f64);
    let predicted: Vec<f64> = rows.iter().map(|r| r.predicted_final_net_gain).collect();
    let truth: Vec<f64> = rows.iter().map(|r| r.true_final_net_gain).collect();
    let net_gain_mse = net_gain_mse(&predicted, &truth).expect("equal lengths");
    EvalOutcome {
        anomaly,
        irrigation,
        type_accuracy,
        net_gain_mse,
        n_segments: rows.len(),
        segments: rows,
    }
}

fn anomaly_times(a: &[AnomalyEvent]) -> Vec<Timestamp> {
    a.iter().map(|e| e.span.start()).collect()
}

fn onsets(r: &AnalysisReport) -> Vec<Timestamp> {
    r.irrigation_events.iter().map(|e| e.onset).collect()
}

/// Matched and total truth anomalies per type, for recall by type.
pub fn recall_by_type(
    reports: &[AnalysisReport],
    truths: &[AnalysisReport],
    tolerance: TimeDelta,
) -> BTreeMap<AnomalyType, (usize, usize)> {
    let mut out: BTreeMap<AnomalyType, (usize, usize)> = BTreeMap::new();
    for (r, t) in reports.iter().zip(truths) {
        let m = match_events(&anomaly_times(&r.anomalies), &anomaly_times(&t.anomalies), tolerance);
        for e in &t.anomalies {
            out.entry(e.kind).or_default().1 += 1;
        }
        for &(_, k) in &m.pairs {
            out.entry(t.anomalies[k].kind).or_default().0 += 1;
        }
    }
    out
}

impl EvalOutcome {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("outcome serializes");
        s.push('\n');
        s
    }

    /// Per-segment confusion tallies as CSV.
    pub fn tallies_csv(&self) -> String {
        let mut out = String::from(
            "segment,anomaly_tp,anomaly_fp,anomaly_fn,type_matches,irrigation_tp,irrigation_fp,irrigation_fn,predicted_final_net_gain,true_final_net_gain\n",
        );
        for r in &self.segments {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:.1},{:.1}",
                r.key,
                r.anomaly_tp,
                r.anomaly_fp,
                r.anomaly_fn,
                r.type_matches,
                r.irrigation_tp,
                r.irrigation_fp,
                r.irrigation_fn,
                r.predicted_final_net_gain,
                r.true_final_net_gain
            );
        }
        out
    }

    /// A fixed-width table of the headline metrics.
    pub fn summary_table(&self) -> String {
        let rate = |r: Rate| {
            if r.degenerate {
                "n/a".to_string()
            } else {
                format!("{:.2}", r.value)
            }
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22}{:>10}{:>8}{:>8}{:>15}{:>14}",
            "Task", "Precision", "Recall", "F1", "Type accuracy", "Net-gain MSE"
        );
        let _ = writeln!(
            out,
            "{:<22}{:>10}{:>8}{:>8}{:>15}{:>14}",
            "Anomaly detection",
            rate(self.anomaly.precision),
            rate(self.anomaly.recall),
            rate(self.anomaly.f1),
            rate(self.type_accuracy),
            "-"
        );
        let _ = writeln!(
            out,
            "{:<22}{:>10}{:>8}{:>8}{:>15}{:>14.2}",
            "Irrigation detection",
            rate(self.irrigation.precision),
            rate(self.irrigation.recall),
            rate(self.irrigation.f1),
            "-",
            self.net_gain_mse
        );
        let _ = writeln!(out, "segments: {}", self.n_segments);
        out
    }
}
