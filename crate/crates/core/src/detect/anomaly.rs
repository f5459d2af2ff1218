use chrono::TimeDelta;

use super::irrigation::abrupt;
use super::{DetectorParams, View};
use crate::types::{AnomalyEvent, AnomalyType, IrrigationEvent, Sample, Span, MOISTURE_MAX, MOISTURE_MIN};

#[derive(Clone, Copy, Debug)]
struct Step {
    at: usize,
    size: f64,
}

/// Classifies abnormal patterns in one segment.
///
/// Regions are claimed in priority order so one pattern gets one label:
/// data gaps, isolated spikes and dips (with clusters of spikes merged),
/// level shifts, then any remaining out-of-range values. Rises belonging to
/// `irrigation` are not reported unless suppression is disabled, in which
/// case each irrigation onset is reported as a spike.
pub fn detect_anomalies(
    samples: &[Sample],
    params: &DetectorParams,
    irrigation: &[IrrigationEvent],
) -> Vec<AnomalyEvent> {
    if samples.is_empty() {
        return Vec::new();
    }
    let v = View::new(samples, params.gap_factor);
    let n = v.len();
    let mut claimed = vec![false; n];
    let mut out = Vec::new();

    for g in &v.gaps {
        let first = g.before + v.interval;
        let last = g.after - v.interval;
        let span = if last > first {
            Span::Range(first, last)
        } else {
            Span::At(first)
        };
        let missing = (g.missing_span.num_seconds() / v.interval.num_seconds().max(1)) - 1;
        out.push(
            AnomalyEvent::new(AnomalyType::MissingValue, span).with_explanation(format!(
                "No readings for {}, about {} samples missing.",
                describe(g.missing_span),
                missing.max(1)
            )),
        );
    }

    let spikes = spike_candidates(&v, params);
    let mut spike_zones = Vec::new();
    for group in cluster_spikes(&spikes, params) {
        let first = &spikes[group[0]];
        let last = &spikes[*group.last().expect("non-empty cluster")];
        spike_zones.push((first.start, last.end));
        claim(&mut claimed, first.start, last.end);
        if group.len() >= 3 {
            out.push(
                AnomalyEvent::new(
                    AnomalyType::MultipleSpikes,
                    Span::Range(v.ts[first.peak], v.ts[last.peak]),
                )
                .with_explanation(format!(
                    "{} short upward spikes in quick succession, each returning to the surrounding level.",
                    group.len()
                )),
            );
        } else {
            for &k in &group {
                let s = &spikes[k];
                let (kind, word) = if s.dev > 0.0 {
                    (AnomalyType::SingleSpike, "jump")
                } else {
                    (AnomalyType::SingleDip, "drop")
                };
                out.push(AnomalyEvent::new(kind, Span::At(v.ts[s.peak])).with_explanation(format!(
                    "Isolated {word} of {:.1} points that reverts within {} readings.",
                    s.dev.abs(),
                    s.end - s.start + 1
                )));
            }
        }
    }

    let onsets: Vec<usize> = irrigation.iter().filter_map(|e| v.index_of(e.onset)).collect();
    let lb = params.baseline_lookback;
    let steps: Vec<Step> = find_steps(&v, params)
        .into_iter()
        .filter(|s| {
            !spike_zones
                .iter()
                .any(|&(a, b)| s.at + lb >= a && s.at <= b + lb)
        })
        .filter(|s| {
            s.size < 0.0
                || !onsets
                    .iter()
                    .any(|&o| s.at.abs_diff(o) <= params.spike_revert_window)
        })
        .collect();

    let mut paired = vec![false; steps.len()];
    for a in 0..steps.len() {
        if paired[a] {
            continue;
        }
        let sa = steps[a];
        let partner = (a + 1..steps.len())
            .filter(|&b| !paired[b])
            .find(|&b| steps[b].size.signum() != sa.size.signum());
        let Some(b) = partner else { continue };
        let sb = steps[b];
        let ratio = sb.size.abs() / sa.size.abs();
        if sb.at - sa.at > params.shift_min_duration || !(0.5..=2.0).contains(&ratio) {
            continue;
        }
        paired[a] = true;
        paired[b] = true;
        claim(&mut claimed, sa.at.saturating_sub(1), sb.at);
        let up = sa.size > 0.0;
        if sb.at - sa.at <= params.spike_revert_window {
            let kind = if up { AnomalyType::SingleSpike } else { AnomalyType::SingleDip };
            out.push(AnomalyEvent::new(kind, Span::At(v.ts[sa.at])).with_explanation(format!(
                "Brief excursion of {:.1} points that reverts within {} readings.",
                sa.size.abs(),
                sb.at - sa.at
            )));
            continue;
        }
        let kind = if up {
            AnomalyType::TransientLevelShiftUp
        } else {
            AnomalyType::TransientLevelShiftDown
        };
        out.push(
            AnomalyEvent::new(kind, Span::between(v.ts[sa.at], v.ts[sb.at - 1])).with_explanation(
                format!(
                    "Abrupt {} shift of {:.1} points that returns to the previous level after {} readings.",
                    if up { "upward" } else { "downward" },
                    sa.size.abs(),
                    sb.at - sa.at
                ),
            ),
        );
    }

    let horizon = params.shape_horizon();
    for (k, s) in steps.iter().enumerate() {
        if paired[k] {
            continue;
        }
        claim(&mut claimed, s.at.saturating_sub(1), (s.at + 1).min(n - 1));
        let up = s.size > 0.0;
        let pre = v.median(s.at.saturating_sub(lb), s.at);
        let post = v.median(s.at + horizon, s.at + horizon + lb);
        let retained = match (pre, post) {
            (Some(a), Some(b)) => (b - a) / s.size >= 0.7,
            _ => true,
        };
        if retained {
            let kind = if up {
                AnomalyType::PersistentLevelShiftUp
            } else {
                AnomalyType::PersistentLevelShiftDown
            };
            out.push(
                AnomalyEvent::new(kind, Span::between(v.ts[s.at], v.ts[n - 1])).with_explanation(
                    format!(
                        "Abrupt {} step of {:.1} points to a new level that does not return.",
                        if up { "upward" } else { "downward" },
                        s.size.abs()
                    ),
                ),
            );
        } else {
            let kind = if up { AnomalyType::SingleSpike } else { AnomalyType::SingleDip };
            out.push(AnomalyEvent::new(kind, Span::At(v.ts[s.at])).with_explanation(format!(
                "Abrupt change of {:.1} points that does not follow an irrigation pattern.",
                s.size.abs()
            )));
        }
    }

    if !params.suppress_near_irrigation {
        for e in irrigation {
            if let Some(o) = v.index_of(e.onset) {
                claim(&mut claimed, o, (o + params.rise_window).min(n - 1));
            }
            out.push(
                AnomalyEvent::new(AnomalyType::SingleSpike, Span::At(e.onset)).with_explanation(format!(
                    "Sharp rise of {} points.",
                    e.net_gain
                )),
            );
        }
    }

    out.extend(out_of_range(&v, params, &claimed));
    out.sort_by_key(|a| (a.span.start(), a.span.end()));
    out
}

fn claim(claimed: &mut [bool], a: usize, b: usize) {
    claimed[a..=b].iter_mut().for_each(|c| *c = true);
}

fn describe(d: TimeDelta) -> String {
    let minutes = d.num_minutes();
    if minutes % 60 == 0 {
        format!("{} h", minutes / 60)
    } else {
        format!("{minutes} min")
    }
}

struct SpikeCandidate {
    start: usize,
    end: usize,
    peak: usize,
    dev: f64,
}

/// Runs of samples far from their rolling median, short enough to revert
/// within `spike_revert_window`.
fn spike_candidates(v: &View, p: &DetectorParams) -> Vec<SpikeCandidate> {
    let n = v.len();
    let h = p.spike_revert_window;
    let dev: Vec<f64> = (0..n)
        .map(|i| {
            let mut a = i.saturating_sub(h);
            while !v.contiguous(a, i) {
                a += 1;
            }
            let mut b = (i + h).min(n - 1);
            while !v.contiguous(i, b) {
                b -= 1;
            }
            if b - a < h {
                return 0.0;
            }
            v.x[i] - super::median(&v.x[a..=b])
        })
        .collect();

    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if dev[i].abs() < p.deviation_threshold {
            i += 1;
            continue;
        }
        let sign = dev[i].signum();
        let start = i;
        while i < n && dev[i].abs() >= p.deviation_threshold && dev[i].signum() == sign && v.contiguous(start, i) {
            i += 1;
        }
        let end = i - 1;
        if end - start < h {
            let peak = (start..=end)
                .max_by(|&a, &b| dev[a].abs().total_cmp(&dev[b].abs()))
                .expect("non-empty run");
            out.push(SpikeCandidate {
                start,
                end,
                peak,
                dev: dev[peak],
            });
        }
    }
    out
}

/// Groups upward spikes that follow each other closely; every other
/// candidate forms its own group.
fn cluster_spikes(spikes: &[SpikeCandidate], p: &DetectorParams) -> Vec<Vec<usize>> {
    let link = p.shape_horizon();
    let reach = 2 * p.shift_min_duration;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for (k, s) in spikes.iter().enumerate() {
        if s.dev < 0.0 {
            groups.push(vec![k]);
            continue;
        }
        if let Some(&last) = current.last() {
            let first = &spikes[current[0]];
            if s.peak - spikes[last].peak > link || s.peak - first.peak > reach {
                groups.push(std::mem::take(&mut current));
            }
        }
        current.push(k);
    }
    if !current.is_empty() {
        groups.push(current);
    }
    groups.sort_by_key(|g| spikes[g[0]].start);
    groups
}

/// Abrupt changes of the running level, located at their steepest point.
fn find_steps(v: &View, p: &DetectorParams) -> Vec<Step> {
    let w = p.baseline_lookback;
    let n = v.len();
    let s: Vec<Option<f64>> = (0..n).map(|j| v.step(j, w)).collect();
    let mut out = Vec::new();
    let mut j = 0;
    while j < n {
        let Some(first) = s[j].filter(|x| x.abs() >= p.deviation_threshold) else {
            j += 1;
            continue;
        };
        let sign = first.signum();
        let start = j;
        while j < n && s[j].is_some_and(|x| x.abs() >= p.deviation_threshold && x.signum() == sign) {
            j += 1;
        }
        let run = start..j;
        let peak = run
            .clone()
            .map(|k| s[k].expect("in run").abs())
            .fold(0.0, f64::max);
        let strong: Vec<usize> = run
            .filter(|&k| s[k].expect("in run").abs() >= 0.9 * peak)
            .collect();
        let at = strong[strong.len() / 2];
        if abrupt(v, at, peak) {
            out.push(Step {
                at,
                size: sign * peak,
            });
        }
    }
    out
}

/// Remaining samples outside the physical range, labeled by run length.
fn out_of_range(v: &View, p: &DetectorParams, claimed: &[bool]) -> Vec<AnomalyEvent> {
    let lo = MOISTURE_MIN.as_f64();
    let hi = MOISTURE_MAX.as_f64();
    let side = |x: f64| {
        if x > hi {
            1
        } else if x < lo {
            -1
        } else {
            0
        }
    };
    let n = v.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let s = side(v.x[i]);
        if s == 0 || claimed[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && side(v.x[i]) == s && !claimed[i] && v.contiguous(start, i) {
            i += 1;
        }
        let len = i - start;
        let up = s > 0;
        let kind = match (len <= p.spike_revert_window, len >= p.shift_min_duration, up) {
            (true, _, true) => AnomalyType::SingleSpike,
            (true, _, false) => AnomalyType::SingleDip,
            (false, true, true) => AnomalyType::PersistentLevelShiftUp,
            (false, true, false) => AnomalyType::PersistentLevelShiftDown,
            (false, false, true) => AnomalyType::TransientLevelShiftUp,
            (false, false, false) => AnomalyType::TransientLevelShiftDown,
        };
        out.push(
            AnomalyEvent::new(kind, Span::between(v.ts[start], v.ts[i - 1])).with_explanation(format!(
                "{len} readings {} the 0-60% range.",
                if up { "above" } else { "below" }
            )),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::detect_irrigation;
    use crate::types::{parse_timestamp, Percent, Timestamp};

    fn series(values: &[f64]) -> Vec<Sample> {
        let t0 = parse_timestamp("2023-07-01 00:00:00").unwrap();
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample::new(t0 + TimeDelta::minutes(15 * i as i64), Percent::from_f64(v)))
            .collect()
    }

    fn at(i: usize) -> Timestamp {
        parse_timestamp("2023-07-01 00:00:00").unwrap() + TimeDelta::minutes(15 * i as i64)
    }

    fn run(values: &[f64]) -> Vec<AnomalyEvent> {
        let s = series(values);
        let p = DetectorParams::default();
        let irr = detect_irrigation(&s, &p).unwrap();
        detect_anomalies(&s, &p, &irr)
    }

    fn kinds(a: &[AnomalyEvent]) -> Vec<AnomalyType> {
        a.iter().map(|e| e.kind).collect()
    }

    #[test]
    fn out_of_range_isolated_spike() {
        let mut v = vec![22.0; 100];
        v[50] = 75.0;
        let a = run(&v);
        assert_eq!(kinds(&a), [AnomalyType::SingleSpike]);
        assert_eq!(a[0].span, Span::At(at(50)));
    }

    #[test]
    fn dip_and_clustered_spikes() {
        let mut v = vec![30.0; 300];
        v[40] = 24.0;
        for k in [150, 158, 170] {
            v[k] = 34.5;
        }
        let a = run(&v);
        assert_eq!(kinds(&a), [AnomalyType::SingleDip, AnomalyType::MultipleSpikes]);
        assert_eq!(a[1].span, Span::Range(at(150), at(170)));
    }

    #[test]
    fn level_shifts() {
        let mut v = vec![30.0; 100];
        v.extend([25.0; 30]);
        v.extend([30.0; 100]);
        v.extend([35.0; 120]);
        let a = run(&v);
        assert_eq!(
            kinds(&a),
            [AnomalyType::TransientLevelShiftDown, AnomalyType::PersistentLevelShiftUp]
        );
        assert_eq!(a[0].span, Span::Range(at(100), at(129)));
        assert_eq!(a[1].span, Span::Range(at(230), at(349)));
    }

    #[test]
    fn gap_is_missing_value() {
        let mut s = series(&[25.0; 200]);
        s.drain(80..104);
        let a = detect_anomalies(&s, &DetectorParams::default(), &[]);
        assert_eq!(kinds(&a), [AnomalyType::MissingValue]);
        assert_eq!(a[0].span, Span::Range(at(80), at(103)));
    }

    fn irrigation_shape() -> Vec<f64> {
        let mut v = vec![20.0; 60];
        v.extend([24.0, 28.0, 28.3, 28.2]);
        for k in 0..200 {
            v.push(20.0 + 8.0 * (-(k as f64) / 25.0).exp());
        }
        v
    }

    #[test]
    fn irrigation_alone_is_not_anomalous() {
        assert!(run(&irrigation_shape()).is_empty());
    }

    #[test]
    fn unsuppressed_irrigation_is_a_spike() {
        let s = series(&irrigation_shape());
        let p = DetectorParams {
            suppress_near_irrigation: false,
            ..Default::default()
        };
        let irr = detect_irrigation(&s, &p).unwrap();
        assert_eq!(irr.len(), 1);
        let a = detect_anomalies(&s, &p, &irr);
        assert_eq!(kinds(&a), [AnomalyType::SingleSpike]);
        assert_eq!(a[0].span, Span::At(irr[0].onset));
    }
}
