use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use spade_core::ingest::{find_gaps, parse_csv};
use spade_core::prompt::{build_prompt, serialize_segment, RuleSet};
use spade_core::segment::{extend_for_gaps, segment_weekly, Segment};
use spade_core::{median_interval, SeriesMeta, SoilMoistureSeries, Timestamp};
use spade_gateway::{Analysis, Gateway, GatewayError};

use crate::settings::Settings;

/// One segment ready to send.
#[derive(Clone, Debug)]
pub struct Job {
    pub key: String,
    pub segment: Segment,
    pub prompt: String,
}

/// File key for a segment: `<probe>_<YYYYmmddTHHMMSS>` of the window start.
pub fn segment_key(probe: &str, window_start: Timestamp) -> String {
    format!("{probe}_{}", window_start.format("%Y%m%dT%H%M%S"))
}

pub fn probe_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string())
}

pub fn load_series(path: &Path) -> Result<SoilMoistureSeries> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_csv(&bytes, SeriesMeta::new(probe_of(path), 0)).with_context(|| format!("parsing {}", path.display()))
}

/// Weekly segments, merged across gaps when the merge stays within budget.
pub fn segments(series: &SoilMoistureSeries, s: &Settings) -> Result<Vec<Segment>> {
    let segs = segment_weekly(series, s.window_days, s.budget)?;
    let interval = median_interval(series.samples())?;
    let gaps = find_gaps(series.samples(), interval, s.params.gap_factor);
    let merged = extend_for_gaps(segs.clone(), &gaps);
    Ok(if merged.iter().all(|m| m.token_estimate <= s.budget) {
        merged
    } else {
        segs
    })
}

pub fn jobs(series: &SoilMoistureSeries, s: &Settings, rules: &RuleSet) -> Result<Vec<Job>> {
    segments(series, s)?
        .into_iter()
        .map(|segment| {
            let text = serialize_segment(&segment.samples)?;
            Ok(Job {
                key: segment_key(&series.meta().probe, segment.window_start),
                prompt: build_prompt(rules, &text),
                segment,
            })
        })
        .collect()
}

/// Sends every job through the gateway with at most `max_inflight`
/// requests at once. Results come back in job order.
pub fn run_jobs(gateway: &Gateway, jobs: &[Job], max_inflight: usize) -> Vec<Result<Analysis, GatewayError>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Analysis, GatewayError>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..max_inflight.min(jobs.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let r = gateway.analyze(&job.key, &job.prompt);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}
