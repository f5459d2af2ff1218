use super::{DetectError, DetectorParams, View};
use crate::types::{IrrigationEvent, Percent, Sample};

/// Finds irrigation and rainfall events: a sharp rise, a plateau, then a
/// decline.
///
/// A rise of at least `rise_threshold` within `rise_window` samples opens a
/// candidate. The onset is the first sample clearly above the local level,
/// the baseline is the median of the `baseline_lookback` samples before it
/// and the plateau the maximum of the `plateau_window` samples from it.
///
/// Candidates whose shape is not rise-then-decline are discarded: a rise that
/// falls back at once (spike), drops abruptly later (transient shift), stays
/// flat (persistent shift) or recovers from an abrupt drop.
pub fn detect_irrigation(
    samples: &[Sample],
    params: &DetectorParams,
) -> Result<Vec<IrrigationEvent>, DetectError> {
    let lb = params.baseline_lookback;
    let needed = lb + params.plateau_window;
    if samples.len() < needed {
        return Err(DetectError::TooShort {
            len: samples.len(),
            needed,
        });
    }
    let v = View::new(samples, params.gap_factor);
    let x = &v.x;
    let n = v.len();
    let mut events = Vec::new();

    let mut i = lb - 1;
    while i + 1 < n {
        let hi = (i + params.rise_window).min(n - 1);
        if !v.contiguous(i + 1 - lb, hi) {
            i += 1;
            continue;
        }
        let (peak, peak_val) = argmax(x, i + 1, hi + 1);
        if peak_val - x[i] < params.rise_threshold {
            i += 1;
            continue;
        }
        let b0 = super::median(&x[i + 1 - lb..=i]);
        let rise = peak_val - b0;
        if rise < params.rise_threshold {
            i += 1;
            continue;
        }
        let onset_level = (0.25 * rise).max(0.5);
        let onset = (i + 1..=peak)
            .find(|&j| x[j] - b0 >= onset_level)
            .unwrap_or(peak);
        let Some(baseline) = v.median(onset - lb, onset) else {
            i = peak + 1;
            continue;
        };
        let mut plateau_end = (onset + params.plateau_window).min(n);
        while !v.contiguous(onset, plateau_end - 1) {
            plateau_end -= 1;
        }
        let (plat_idx, plateau) = argmax(x, onset, plateau_end);
        let net = plateau - baseline;
        let level = Level { onset, plat_idx, baseline, plateau };

        if net >= params.net_gain_threshold && shape_ok(&v, params, &level) {
            events.push(IrrigationEvent::measured(
                v.ts[onset],
                Percent::from_f64(baseline),
                Percent::from_f64(plateau),
            ));
            i = onset + params.plateau_window;
        } else {
            i = peak + 1;
        }
    }
    Ok(events)
}

/// First maximum of `x[a..b]`.
fn argmax(x: &[f64], a: usize, b: usize) -> (usize, f64) {
    let mut best = (a, x[a]);
    for (j, &val) in x.iter().enumerate().take(b).skip(a + 1) {
        if val > best.1 {
            best = (j, val);
        }
    }
    best
}

struct Level {
    onset: usize,
    plat_idx: usize,
    baseline: f64,
    plateau: f64,
}

fn shape_ok(v: &View, p: &DetectorParams, e: &Level) -> bool {
    let Level { onset, plat_idx, baseline, plateau } = *e;
    let net = plateau - baseline;
    let lb = p.baseline_lookback;
    let horizon = p.shape_horizon();
    let n = v.len();

    // The level right after the plateau must hold.
    let after_end = (plat_idx + 1 + lb).min(n);
    if let Some(after) = v.median(plat_idx + 1, after_end) {
        if after - baseline < 0.5 * net {
            return false;
        }
    }

    // No abrupt fall within the horizon. Later on, up to the persistent
    // shift duration, no single-reading fall back to the baseline.
    for j in plat_idx + 1..=(onset + p.shift_min_duration).min(n) {
        let Some(step) = v.step(j, lb) else { continue };
        if -step < 0.6 * net {
            continue;
        }
        if j <= onset + horizon {
            return false;
        }
        let held = v.median(j - lb, j).is_some_and(|m| m - baseline >= 0.5 * net);
        let back = v.median(j, (j + lb).min(n)).is_some_and(|m| (m - baseline).abs() <= 0.35 * net);
        if held && back && abrupt(v, j, -step) {
            return false;
        }
    }

    // Most of the gain must be gone by the end of the horizon.
    if let Some(later) = v.median(onset + horizon, onset + horizon + lb) {
        if (later - baseline) / net >= 0.7 {
            return false;
        }
    }

    // Not the return to a level left by an abrupt drop.
    let start = onset.saturating_sub(p.shift_min_duration).max(lb);
    let mut dropped = false;
    for j in start..=onset.saturating_sub(lb) {
        let Some(step) = v.step(j, lb) else { continue };
        if -step >= 0.6 * net && abrupt(v, j, -step) {
            let before = v.median(j.saturating_sub(2 * lb), j - lb).unwrap_or(f64::NAN);
            dropped = (plateau - before).abs() <= 0.35 * net;
        } else if step >= 0.6 * net {
            dropped = false;
        }
    }
    !dropped
}

/// True when most of a median step of size `magnitude` near `j` happens
/// between two neighbouring samples.
pub(super) fn abrupt(v: &View, j: usize, magnitude: f64) -> bool {
    let lo = j.saturating_sub(2).max(1);
    let hi = (j + 2).min(v.len() - 1);
    (lo..=hi).any(|k| v.contiguous(k - 1, k) && (v.x[k] - v.x[k - 1]).abs() >= 0.75 * magnitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{parse_timestamp, Timestamp};
    use chrono::TimeDelta;

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

    #[test]
    fn constant_series_has_no_events() {
        let s = series(&[22.0; 200]);
        assert!(detect_irrigation(&s, &DetectorParams::default()).unwrap().is_empty());
    }

    #[test]
    fn step_to_sustained_level() {
        // The step example: 10 samples at 20.0, then 24.5 held. The plateau
        // check is limited by the available data.
        let mut v = vec![20.0; 10];
        v.extend([24.5; 30]);
        let ev = detect_irrigation(&series(&v), &DetectorParams::default()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].net_gain, Percent::from_tenths(45));
        assert_eq!(ev[0].onset, at(10));
        assert_eq!(ev[0].pre_spike_baseline, Some(Percent::from_tenths(200)));
    }

    #[test]
    fn rise_then_decline() {
        let mut v = vec![20.0; 40];
        v.extend([23.0, 26.0, 26.2, 26.1]);
        for k in 0..150 {
            v.push(20.0 + 6.0 * (-(k as f64) / 25.0).exp());
        }
        let ev = detect_irrigation(&series(&v), &DetectorParams::default()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].onset, at(40));
        assert_eq!(ev[0].net_gain, Percent::from_tenths(62));
    }

    #[test]
    fn spike_is_not_irrigation() {
        let mut v = vec![20.0; 200];
        v[80] = 30.0;
        assert!(detect_irrigation(&series(&v), &DetectorParams::default()).unwrap().is_empty());
    }

    #[test]
    fn flat_shift_is_not_irrigation() {
        let mut v = vec![20.0; 80];
        v.extend([25.0; 120]);
        assert!(detect_irrigation(&series(&v), &DetectorParams::default()).unwrap().is_empty());
        // Transient: up for 20 samples then back.
        let mut v = vec![20.0; 80];
        v.extend([25.0; 20]);
        v.extend([20.0; 100]);
        assert!(detect_irrigation(&series(&v), &DetectorParams::default()).unwrap().is_empty());
        // A longer transient that ends past the shape horizon.
        let mut v = vec![20.0; 80];
        v.extend([25.0; 60]);
        v.extend([20.0; 100]);
        assert!(detect_irrigation(&series(&v), &DetectorParams::default()).unwrap().is_empty());
        // Recovery from a transient dip.
        let mut v = vec![25.0; 80];
        v.extend([20.0; 20]);
        v.extend([25.0; 100]);
        assert!(detect_irrigation(&series(&v), &DetectorParams::default()).unwrap().is_empty());
    }

    #[test]
    fn small_rise_below_threshold() {
        let mut v = vec![20.0; 40];
        v.extend([20.8; 4]);
        for k in 0..100 {
            v.push(20.0 + 0.8 * (-(k as f64) / 20.0).exp());
        }
        assert!(detect_irrigation(&series(&v), &DetectorParams::default()).unwrap().is_empty());
    }

    #[test]
    fn too_short() {
        let s = series(&[20.0; 19]);
        assert_eq!(
            detect_irrigation(&s, &DetectorParams::default()),
            Err(DetectError::TooShort { len: 19, needed: 20 })
        );
    }
}
