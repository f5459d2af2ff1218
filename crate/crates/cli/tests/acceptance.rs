//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeDelta};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spade_core::detect::{flagit, DetectorParams, FlagitParams};
use spade_core::eval::{evaluate_corpus, f1, EvalOutcome, DEFAULT_TOLERANCE};
use spade_core::ingest::render_csv;
use spade_core::prompt::{build_prompt, serialize_segment, RuleSet};
use spade_core::report::{from_json, parse, render};
use spade_core::segment::{segment_weekly, DEFAULT_TOKEN_BUDGET};
use spade_core::synth::{standard_corpus, DeclineShape, Generated};
use spade_core::{
    parse_timestamp, AnalysisReport, AnomalyEvent, AnomalyType, IrrigationEvent, Percent, Sample, SeriesMeta,
    SoilMoistureSeries, Span, Timestamp,
};
use spade_gateway::{
    estimate_cost, max_window_spend, Backend, BackendConfig, BackendKind, Completion, Gateway, GatewayError,
    Grant, LocalRules, SimulatedClock, Usd,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Corpus {
    generated: Vec<Generated>,
    truth: Vec<AnalysisReport>,
    reference: Vec<AnalysisReport>,
    runtime: Duration,
}

/// The standard corpus analyzed through the local-rules backend, once.
fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| {
        let started = Instant::now();
        let generated = standard_corpus().expect("standard corpus generates");
        let gw = Gateway::new(
            BackendConfig::default(),
            Box::new(LocalRules::with_params(DetectorParams::default())),
            Arc::new(SimulatedClock::default()),
        )
        .unwrap();
        let rules = RuleSet::default();
        let reference = generated
            .iter()
            .map(|g| {
                let prompt = build_prompt(&rules, &serialize_segment(g.series.samples()).unwrap());
                parse(&gw.analyze(&g.series.meta().probe, &prompt).unwrap().text).unwrap()
            })
            .collect();
        let runtime = started.elapsed();
        Corpus {
            truth: generated.iter().map(|g| g.truth.to_report()).collect(),
            generated,
            reference,
            runtime,
        }
    })
}

fn reference_outcome() -> EvalOutcome {
    let c = corpus();
    evaluate_corpus(&c.reference, &c.truth, DEFAULT_TOLERANCE).unwrap()
}

fn criterion_1() -> Verdict {
    let c = corpus();
    let mut per_type: BTreeMap<AnomalyType, usize> = BTreeMap::new();
    for t in &c.truth {
        for a in &t.anomalies {
            *per_type.entry(a.kind).or_default() += 1;
        }
    }
    let composition = per_type.len() == 8 && per_type.values().all(|&n| n >= 12);
    let o = reference_outcome();
    let (p, r, ta) = (o.anomaly.precision.value, o.anomaly.recall.value, o.type_accuracy.value);
    let secs = c.runtime.as_secs_f64();
    verdict(
        composition && r >= 0.90 && p >= 0.85 && ta >= 0.90 && secs < 30.0,
        format!(
            "anomaly recall {r:.3} (>= 0.90), precision {p:.3} (>= 0.85), type accuracy {ta:.3} (>= 0.90), runtime {secs:.2}s (< 30), min per type {}",
            per_type.values().min().copied().unwrap_or(0)
        ),
    )
}

fn criterion_2() -> Verdict {
    let c = corpus();
    let events: usize = c.truth.iter().map(|t| t.irrigation_events.len()).sum();
    let mut shapes = std::collections::BTreeSet::new();
    for g in &c.generated {
        let spec = spade_core::synth::standard_corpus_spec(seed_of(g));
        for k in 0..spec.irrigation_count {
            shapes.insert(spec.decline_shapes[k % spec.decline_shapes.len()].to_string());
        }
    }
    let composition = events >= 150 && shapes.len() == DeclineShape::ALL.len();
    let o = reference_outcome();
    let (p, r, mse) = (o.irrigation.precision.value, o.irrigation.recall.value, o.net_gain_mse);
    verdict(
        composition && p >= 0.90 && r >= 0.85 && mse <= 1.0,
        format!("irrigation precision {p:.3} (>= 0.90), recall {r:.3} (>= 0.85), net-gain MSE {mse:.3} (<= 1.0), {events} events, {} shapes", shapes.len()),
    )
}

fn seed_of(g: &Generated) -> u64 {
    g.series.meta().probe.trim_start_matches("synth-").parse().unwrap()
}

fn criterion_3() -> Verdict {
    let c = corpus();
    let flagged: Vec<AnalysisReport> = c
        .generated
        .iter()
        .map(|g| AnalysisReport::from_events(flagit(g.series.samples(), &FlagitParams::default()), vec![]))
        .collect();
    let f = evaluate_corpus(&flagged, &c.truth, DEFAULT_TOLERANCE).unwrap();
    let reference_recall = reference_outcome().anomaly.recall.value;
    let (p, r) = (f.anomaly.precision.value, f.anomaly.recall.value);
    verdict(
        p >= 0.85 && r <= reference_recall - 0.25,
        format!("FlagIT precision {p:.3} (>= 0.85), recall {r:.3} (<= {:.3})", reference_recall - 0.25),
    )
}

fn criterion_4() -> Verdict {
    let a = f1(0.85, 0.97).value;
    let b = f1(0.97, 0.91).value;
    verdict(
        (a - 0.906).abs() <= 0.001 && (b - 0.939).abs() <= 0.001,
        format!("f1(0.85, 0.97) = {a:.4}, f1(0.97, 0.91) = {b:.4}"),
    )
}

fn criterion_5() -> Verdict {
    let cfg = BackendConfig::default();
    let c = estimate_cost(3000, 150, &cfg);
    let expected: Usd = "0.0072".parse().unwrap();
    verdict(
        cfg.price_in == 2.0 && cfg.price_out == 8.0 && c.total_cost == expected,
        format!("(3000 in, 150 out) at ($2.00, $8.00)/M = ${}", c.total_cost),
    )
}

fn series_from(samples: Vec<Sample>) -> SoilMoistureSeries {
    SoilMoistureSeries::new(samples, SeriesMeta::new("p", 30)).unwrap()
}

/// Every sample in exactly one segment, in order, and each segment within budget.
fn partition_ok(series: &SoilMoistureSeries, window_days: u32, budget: usize) -> Result<usize, String> {
    let segs = segment_weekly(series, window_days, budget).map_err(|e| e.to_string())?;
    let mut seen: HashMap<Timestamp, usize> = HashMap::new();
    for s in &segs {
        if s.token_estimate > budget {
            return Err(format!("segment estimate {} over budget {budget}", s.token_estimate));
        }
        for x in &s.samples {
            *seen.entry(x.timestamp).or_default() += 1;
        }
    }
    let all_once = series.samples().iter().all(|x| seen.get(&x.timestamp) == Some(&1));
    if !all_once || seen.len() != series.len() {
        return Err("a sample was dropped or duplicated".into());
    }
    let joined: Vec<Sample> = segs.iter().flat_map(|s| s.samples.iter().copied()).collect();
    if joined != series.samples() {
        return Err("segments out of order".into());
    }
    Ok(segs.len())
}

fn criterion_6() -> Verdict {
    // Weekly 15-minute segments: the standard corpus plus random-valued weeks.
    let mut estimates = Vec::new();
    for g in &corpus().generated {
        estimates.extend(segment_weekly(&g.series, 7, DEFAULT_TOKEN_BUDGET).unwrap().iter().map(|s| s.token_estimate));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t0 = parse_timestamp("2023-01-01 00:00:00").unwrap();
    for _ in 0..200 {
        let samples = (0..672)
            .map(|i| Sample::new(t0 + TimeDelta::minutes(15 * i), Percent::from_tenths(rng.gen_range(0..=600))))
            .collect();
        let s = series_from(samples);
        estimates.extend(segment_weekly(&s, 7, DEFAULT_TOKEN_BUDGET).unwrap().iter().map(|s| s.token_estimate));
    }
    let (lo, hi) = (*estimates.iter().min().unwrap(), *estimates.iter().max().unwrap());
    let weekly_ok = estimates.len() == 300 && lo >= 2000 && hi <= 4000;

    // Budget and membership on long irregular series, many window sizes.
    let mut problems = Vec::new();
    let mut checked = 0;
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = t0;
        let n = rng.gen_range(1000..20_000);
        let samples: Vec<Sample> = (0..n)
            .map(|_| {
                t += TimeDelta::minutes(match rng.gen_range(0..100) {
                    0 => rng.gen_range(60..5000),
                    1..=3 => rng.gen_range(1..15),
                    _ => 15,
                });
                Sample::new(t, Percent::from_tenths(rng.gen_range(0..=600)))
            })
            .collect();
        let s = series_from(samples);
        for (w, b) in [(7, DEFAULT_TOKEN_BUDGET), (30, DEFAULT_TOKEN_BUDGET), (120, DEFAULT_TOKEN_BUDGET), (7, 1000)] {
            checked += 1;
            if let Err(e) = partition_ok(&s, w, b) {
                problems.push(format!("seed {seed} window {w}: {e}"));
            }
        }
    }
    verdict(
        weekly_ok && problems.is_empty(),
        format!(
            "{} weekly estimates in [{lo}, {hi}] (need [2000, 4000]); {checked} segmentations within budget with exact membership{}",
            estimates.len(),
            problems.first().map(|p| format!("; first problem: {p}")).unwrap_or_default()
        ),
    )
}

fn report_strategy() -> impl Strategy<Value = AnalysisReport> {
    let ts = || (1_577_836_800i64..1_893_456_000).prop_map(|s| DateTime::from_timestamp(s, 0).unwrap().naive_utc());
    let anomaly = (
        prop::sample::select(AnomalyType::ALL.to_vec()),
        ts(),
        prop::option::of(1i64..500_000),
        "[A-Za-z0-9 ,.%()/+-]{0,80}",
    )
        .prop_map(|(kind, start, len, text)| {
            let span = match len {
                Some(secs) => Span::Range(start, start + TimeDelta::seconds(secs)),
                None => Span::At(start),
            };
            AnomalyEvent::new(kind, span).with_explanation(text.trim())
        });
    let event = (ts(), 10i32..=600).prop_map(|(t, g)| IrrigationEvent::reported(t, Percent::from_tenths(g)));
    (prop::collection::vec(anomaly, 0..8), prop::collection::vec(event, 0..8))
        .prop_map(|(a, e)| AnalysisReport::from_events(a, e))
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/decorated")
}

fn criterion_7() -> Verdict {
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let round_trip = runner.run(&report_strategy(), |r| {
        let text = render(&r).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(parse(&text).map_err(|e| TestCaseError::fail(e.to_string()))?, r);
        Ok(())
    });

    let mut fixtures = 0;
    let mut mismatched = Vec::new();
    for n in 1..=20 {
        let text = std::fs::read_to_string(fixture_dir().join(format!("{n:02}.txt"))).unwrap();
        let expected = from_json(&std::fs::read_to_string(fixture_dir().join(format!("{n:02}.json"))).unwrap()).unwrap();
        fixtures += 1;
        if parse(&text).ok() != Some(expected) {
            mismatched.push(n);
        }
    }
    verdict(
        round_trip.is_ok() && fixtures == 20 && mismatched.is_empty(),
        format!(
            "10000 random reports round-trip: {}; decorated fixtures parsed as expected: {}/20{}",
            if round_trip.is_ok() { "ok" } else { "failed" },
            fixtures - mismatched.len(),
            if mismatched.is_empty() { String::new() } else { format!(" (mismatched {mismatched:?})") }
        ),
    )
}

/// One week at 15 minutes with a single large irrigation at 06:00 on day 3
/// and a gradual decline, over a slowly drying baseline.
fn ablation_fixture() -> SoilMoistureSeries {
    let t0 = parse_timestamp("2023-07-10 00:00:00").unwrap();
    let onset = 2 * 96 + 24;
    let samples = (0..672)
        .map(|i: usize| {
            let dry = 24.0 - 0.004 * i as f64;
            let wiggle = 0.1 * ((i * 7 % 5) as f64 - 2.0) / 2.0;
            let wet = match i.checked_sub(onset) {
                None => 0.0,
                Some(0) => 5.0,
                Some(k) if k < 6 => 11.0,
                Some(k) => 11.0 * (-((k - 6) as f64) / 40.0).exp(),
            };
            Sample::new(t0 + TimeDelta::minutes(15 * i as i64), Percent::from_f64(dry + wiggle + wet))
        })
        .collect();
    SoilMoistureSeries::new(samples, SeriesMeta::new("farm-a", 30)).unwrap()
}

fn criterion_8() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("farm-a.csv");
    std::fs::write(&csv, render_csv(&ablation_fixture())).unwrap();
    let out = dir.path().join("ablation");
    let code = spade_cli::run([
        "spade",
        "ablate",
        csv.to_str().unwrap(),
        "--disable",
        "domain.2",
        "--backend",
        "local-rules",
        "--no-suppression-map",
        "domain.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let read = |name: &str| from_json(&std::fs::read_to_string(out.join(name)).unwrap()).unwrap();
    let with = read("farm-a_20230710T000000.with.json");
    let without = read("farm-a_20230710T000000.without.json");
    let onset = with.irrigation_events.first().map(|e| e.onset);
    let spikes = without
        .anomalies
        .iter()
        .filter(|a| a.kind == AnomalyType::SingleSpike && Some(a.span.start()) == onset)
        .count();
    verdict(
        code == 0 && with.irrigation_events.len() == 1 && with.anomalies.is_empty() && spikes >= 1,
        format!(
            "with rule: {} event(s), {} anomalies; without rule: {spikes} SingleSpike at the onset {}",
            with.irrigation_events.len(),
            with.anomalies.len(),
            onset.map(|t| t.to_string()).unwrap_or_else(|| "-".into())
        ),
    )
}

/// Backend that answers instantly and reports no token usage.
struct Echo;

impl Backend for Echo {
    fn complete(&self, _prompt: &str) -> Result<Completion, GatewayError> {
        Ok(Completion { text: "ok".into(), input_tokens: None, output_tokens: None })
    }

    fn metered(&self) -> bool {
        true
    }
}

/// Independent replay: tokens granted in every 60 s window ending at a grant.
fn worst_window(log: &[Grant]) -> u64 {
    log.iter()
        .map(|g| {
            log.iter()
                .filter(|h| h.at <= g.at && g.at < h.at + Duration::from_secs(60))
                .map(|h| h.tokens)
                .sum::<u64>()
        })
        .max()
        .unwrap_or(0)
}

fn criterion_9() -> Verdict {
    let clock = Arc::new(SimulatedClock::default());
    let cfg = BackendConfig { kind: BackendKind::RemoteHttp, ..Default::default() };
    let limit = cfg.tpm_limit;
    let gw = Gateway::new(cfg, Box::new(Echo), clock.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut arrival = Duration::ZERO;
    for i in 0..1000 {
        arrival += Duration::from_millis(rng.gen_range(0..3000));
        clock.set(arrival);
        let prompt = "x".repeat(rng.gen_range(1..100_000));
        gw.analyze(&format!("r{i:04}"), &prompt).unwrap();
    }
    let log = gw.grant_log();
    let worst = worst_window(&log);
    verdict(
        log.len() == 1000 && worst <= limit && max_window_spend(&log) == worst,
        format!("{} grants, worst trailing-60 s spend {worst} (limit {limit})", log.len()),
    )
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    walk(dir, dir)
}

fn walk(root: &Path, dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(root, &p));
        } else {
            out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
        }
    }
    out
}

fn full_run(root: &Path) -> (i32, BTreeMap<String, Vec<u8>>) {
    let p = |s: &str| root.join(s).display().to_string();
    let mut code = spade_cli::run(["spade", "synth", "--standard-corpus", "--seed", "1", "--out", &p("synth")]);
    let mut args = vec!["spade".to_string(), "analyze".into()];
    let mut inputs: Vec<String> = std::fs::read_dir(root.join("synth"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| p.display().to_string())
        .collect();
    inputs.sort();
    args.extend(inputs);
    args.extend(["--backend", "local-rules", "--out"].map(String::from));
    args.push(p("reports"));
    code = code.max(spade_cli::run(args));
    code = code.max(spade_cli::run([
        "spade",
        "evaluate",
        &p("reports"),
        &p("synth/truth"),
        "--out",
        &p("eval/evaluation.json"),
    ]));
    (code, files(root))
}

fn criterion_10() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ca, fa) = full_run(a.path());
    let (cb, fb) = full_run(b.path());
    let reports = fa.keys().filter(|k| k.starts_with("reports")).count();
    let differing: Vec<&String> = fa.keys().filter(|k| fb.get(*k) != fa.get(*k)).collect();
    verdict(
        ca == 0 && cb == 0 && fa.len() == fb.len() && differing.is_empty() && reports >= 200 && fa.contains_key("eval/evaluation.json"),
        format!("{} files per run ({reports} under reports/), {} differ", fa.len(), differing.len()),
    )
}

fn main() {
    let criteria: [(u8, fn() -> Verdict); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (id, check) in criteria {
        let v = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                verdict(false, format!("panicked: {msg}"))
            });
        if !v.pass {
            failed += 1;
        }
        println!("{} criterion {id:>2}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
