use chrono::TimeDelta;
use proptest::prelude::*;
use spade_core::ingest::{find_gaps, parse_csv, render_csv};
use spade_core::segment::{estimate_tokens, extend_for_gaps, segment_weekly, DEFAULT_TOKEN_BUDGET};
use spade_core::{parse_timestamp, Percent, Sample, SeriesMeta, SoilMoistureSeries};

/// Series from (minutes since previous sample, tenths) pairs.
fn build(steps: &[(i64, i32)]) -> SoilMoistureSeries {
    let mut t = parse_timestamp("2023-06-30 23:45:00").unwrap();
    let samples = steps
        .iter()
        .map(|&(dt, v)| {
            t += TimeDelta::minutes(dt);
            Sample::new(t, Percent::from_tenths(v))
        })
        .collect();
    SoilMoistureSeries::new(samples, SeriesMeta::new("P1", 30)).unwrap()
}

fn steps() -> impl Strategy<Value = Vec<(i64, i32)>> {
    prop::collection::vec(
        (prop_oneof![8 => Just(15i64), 1 => 16i64..3000, 1 => 1i64..15], 0i32..=600),
        1..1500,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn segments_partition_the_series(st in steps(), days in 1u32..10, budget in 30usize..5000) {
        let series = build(&st);
        let segs = segment_weekly(&series, days, budget).unwrap();
        let joined: Vec<Sample> = segs.iter().flat_map(|s| s.samples.iter().copied()).collect();
        prop_assert_eq!(joined.as_slice(), series.samples());
        let mut pos = 0;
        for s in &segs {
            prop_assert!(!s.is_empty());
            prop_assert_eq!(s.source_range.start, pos);
            pos = s.source_range.end;
            prop_assert!(s.token_estimate <= budget);
            prop_assert_eq!(s.token_estimate, estimate_tokens(&s.samples));
            prop_assert!(s.window_start <= s.samples[0].timestamp);
            prop_assert!(s.samples.last().unwrap().timestamp <= s.window_end);
            prop_assert!(s.window_end - s.window_start < TimeDelta::days(days.into()));
        }
        prop_assert_eq!(pos, series.len());

        // Merging across gaps keeps every sample exactly once.
        let gaps = find_gaps(series.samples(), TimeDelta::minutes(15), 3.0);
        let merged = extend_for_gaps(segs.clone(), &gaps);
        let joined: Vec<Sample> = merged.iter().flat_map(|s| s.samples.iter().copied()).collect();
        prop_assert_eq!(joined.as_slice(), series.samples());
        prop_assert!(merged.len() <= segs.len());
    }

    #[test]
    fn csv_round_trip(st in steps()) {
        let series = build(&st);
        let text = render_csv(&series);
        let back = parse_csv(text.as_bytes(), series.meta().clone()).unwrap();
        prop_assert_eq!(back.samples(), series.samples());
        prop_assert_eq!(render_csv(&back), text);
    }

    #[test]
    fn weekly_estimate_in_range(values in prop::collection::vec(0i32..=600, 672)) {
        let st: Vec<(i64, i32)> = values.into_iter().map(|v| (15, v)).collect();
        let series = build(&st);
        let segs = segment_weekly(&series, 7, DEFAULT_TOKEN_BUDGET).unwrap();
        prop_assert_eq!(segs.len(), 1);
        prop_assert!((2000..=4000).contains(&segs[0].token_estimate), "{}", segs[0].token_estimate);
    }
}
