use super::FlagitParams;
use crate::types::{AnomalyEvent, AnomalyType, Sample, Span};

/// Threshold baseline: flags samples outside `[abs_min, abs_max]` and
/// samples that differ from their predecessor by at least
/// `derivative_threshold`. Adjacent flags become one event.
pub fn flagit(samples: &[Sample], params: &FlagitParams) -> Vec<AnomalyEvent> {
    let x: Vec<f64> = samples.iter().map(|s| s.moisture.as_f64()).collect();
    let n = x.len();
    let delta = |i: usize| if i == 0 { 0.0 } else { x[i] - x[i - 1] };
    let out_of_range = |v: f64| v < params.abs_min || v > params.abs_max;
    let flagged: Vec<bool> = (0..n)
        .map(|i| out_of_range(x[i]) || delta(i).abs() >= params.derivative_threshold)
        .collect();

    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if !flagged[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && flagged[i] {
            i += 1;
        }
        let end = i - 1;
        let jumps: Vec<f64> = (start..=end)
            .map(delta)
            .filter(|d| d.abs() >= params.derivative_threshold)
            .collect();
        let ups = jumps.iter().filter(|d| **d > 0.0).count();
        let high = (start..=end).any(|k| x[k] > params.abs_max);
        let kind = match jumps.first() {
            _ if ups >= 3 => AnomalyType::MultipleSpikes,
            Some(d) if *d > 0.0 => AnomalyType::SingleSpike,
            Some(_) => AnomalyType::SingleDip,
            None if end - start < 4 => {
                if high {
                    AnomalyType::SingleSpike
                } else {
                    AnomalyType::SingleDip
                }
            }
            None if high => AnomalyType::PersistentLevelShiftUp,
            None => AnomalyType::PersistentLevelShiftDown,
        };
        out.push(AnomalyEvent::new(
            kind,
            Span::between(samples[start].timestamp, samples[end].timestamp),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{parse_timestamp, Percent};
    use chrono::TimeDelta;

    fn series(values: &[f64]) -> Vec<Sample> {
        let t0 = parse_timestamp("2023-07-01 00:00:00").unwrap();
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample::new(t0 + TimeDelta::minutes(15 * i as i64), Percent::from_f64(v)))
            .collect()
    }

    #[test]
    fn flat_series_unflagged() {
        assert!(flagit(&series(&[25.0; 100]), &FlagitParams::default()).is_empty());
    }

    #[test]
    fn out_of_range_sample_flagged() {
        let mut v = vec![25.0; 20];
        v[7] = 75.0;
        let s = series(&v);
        let ev = flagit(&s, &FlagitParams::default());
        assert_eq!(ev.len(), 1);
        assert!(ev[0].span.contains(s[7].timestamp));
        assert_eq!(ev[0].kind, AnomalyType::SingleSpike);
        assert_eq!(ev[0].explanation, "");
    }

    #[test]
    fn dip_and_small_steps() {
        let mut v = vec![25.0; 40];
        v[10] = 18.0;
        v[30] = 29.0;
        let ev = flagit(&series(&v), &FlagitParams::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, AnomalyType::SingleDip);
    }

    #[test]
    fn sustained_out_of_range() {
        let v: Vec<f64> = (0..20).map(|i| 3.0 - 0.5 * i as f64).collect();
        let ev = flagit(&series(&v), &FlagitParams::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, AnomalyType::PersistentLevelShiftDown);
    }
}
