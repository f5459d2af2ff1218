use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use spade_core::detect::compose_report;
use spade_core::eval::evaluate_corpus;
use spade_core::report::{from_json, parse, render, to_json};
use spade_core::segment::estimate_text_tokens;
use spade_core::synth::{export_csv, generate, standard_corpus_spec, ScenarioSpec, STANDARD_CORPUS_SIZE};
use spade_core::{kv, AnalysisReport, Percent};
use spade_gateway::{estimate_cost, BackendConfig, CostEstimate, Gateway, UsageLedger, Usd};

use crate::pipeline::{self, Job};
use crate::settings::{out_path, Settings};
use crate::{usage, Command, PipelineArgs, Status};

/// Output tokens assumed per request when estimating a dry run.
pub const DRY_RUN_OUTPUT_TOKENS: u64 = 150;

pub fn dispatch(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Analyze { inputs, out, pipeline } => analyze(&inputs, &out, &pipeline),
        Command::Evaluate { reports, truth, tolerance, out, list } => {
            evaluate(&reports, &truth, tolerance.as_deref(), &out, list)
        }
        Command::Synth { spec, standard_corpus, seed, window_days, out } => {
            synth(spec.as_deref(), standard_corpus, seed, window_days, &out)
        }
        Command::Ablate { input, out, pipeline } => ablate(&input, &out, &pipeline),
        Command::Cost { log, reprice, price_in, price_out, config } => {
            cost(&log, reprice, price_in, price_out, config.as_deref())
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn gateway(s: &Settings) -> Result<Gateway> {
    Ok(Gateway::from_config(s.backend.clone(), s.local_backend())?)
}

/// Writes prompts and returns the estimated cost of sending them.
fn dry_run(jobs: &[(String, &Job)], s: &Settings, out: &Path) -> Result<CostEstimate> {
    let mut total = CostEstimate::ZERO;
    for (name, job) in jobs {
        write(&out_path(out, &format!("{name}.prompt.txt"))?, &job.prompt)?;
        total = total + estimate_cost(estimate_text_tokens(&job.prompt) as u64, DRY_RUN_OUTPUT_TOKENS, &s.backend);
    }
    Ok(total)
}

fn print_estimate(n: usize, out: &Path, c: &CostEstimate) {
    println!("dry run: {n} prompts written to {}", out.display());
    println!(
        "estimated cost: {} ({} input tokens, {} output tokens)",
        c.total_cost.display4(),
        c.input_tokens,
        c.output_tokens
    );
}

/// Parses a response and writes `<name>.txt` and `<name>.json`. On a parse
/// failure the raw response goes to `<name>.raw.txt`.
fn store(out: &Path, name: &str, response: &str) -> Result<AnalysisReport> {
    match parse(response) {
        Ok(report) => {
            write(&out_path(out, &format!("{name}.txt"))?, &render(&report)?)?;
            write(&out_path(out, &format!("{name}.json"))?, &to_json(&report))?;
            Ok(report)
        }
        Err(e) => {
            write(&out_path(out, &format!("{name}.raw.txt"))?, response)?;
            Err(e).with_context(|| format!("segment {name}: unreadable response"))
        }
    }
}

fn analyze(inputs: &[PathBuf], out: &Path, args: &PipelineArgs) -> Result<Status> {
    let s = Settings::resolve(args)?;
    let rules = s.prompt_rules();
    let mut failed = 0;
    let mut units = 0;
    let mut jobs = Vec::new();
    for path in inputs {
        match pipeline::load_series(path).and_then(|series| pipeline::jobs(&series, &s, &rules)) {
            Ok(j) => jobs.extend(j),
            Err(e) => {
                eprintln!("error: {e:#}");
                failed += 1;
                units += 1;
            }
        }
    }
    units += jobs.len();
    if jobs.is_empty() {
        return Ok(Status::Failed);
    }

    if s.dry_run {
        let named: Vec<(String, &Job)> = jobs.iter().map(|j| (j.key.clone(), j)).collect();
        print_estimate(named.len(), out, &dry_run(&named, &s, out)?);
        return Ok(Status::from_counts(failed, units));
    }

    let gw = gateway(&s)?;
    let results = pipeline::run_jobs(&gw, &jobs, s.backend.max_inflight);
    let (mut anomalies, mut events, mut gain) = (0, 0, Percent::from_tenths(0));
    for (job, result) in jobs.iter().zip(results) {
        let report = result
            .with_context(|| format!("segment {}", job.key))
            .and_then(|a| store(out, &job.key, &a.text));
        match report {
            Ok(r) => {
                anomalies += r.anomalies.len();
                events += r.irrigation_events.len();
                gain = gain + r.final_net_gain;
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                failed += 1;
            }
        }
    }
    let ledger = gw.ledger();
    write(&out_path(out, "usage.csv")?, &ledger.to_csv())?;
    println!("segments: {} ({} failed)", jobs.len(), failed);
    println!("anomalies: {anomalies}");
    println!("irrigation events: {events}");
    println!("total net gain: {gain}");
    println!("total cost: {}", ledger.total().total_cost.display4());
    Ok(Status::from_counts(failed, units))
}

fn ablate(input: &Path, out: &Path, args: &PipelineArgs) -> Result<Status> {
    if args.disable.is_empty() {
        return Err(usage("ablate needs at least one --disable RULE_ID"));
    }
    let s = Settings::resolve(args)?;
    let series = pipeline::load_series(input)?;
    let with = pipeline::jobs(&series, &s, &s.rules)?;
    let without = pipeline::jobs(&series, &s, &s.prompt_rules())?;
    let named: Vec<(String, &Job)> = with
        .iter()
        .map(|j| (format!("{}.with", j.key), j))
        .chain(without.iter().map(|j| (format!("{}.without", j.key), j)))
        .collect();

    if s.dry_run {
        print_estimate(named.len(), out, &dry_run(&named, &s, out)?);
        return Ok(Status::Success);
    }

    let jobs: Vec<Job> = named
        .iter()
        .map(|(name, j)| Job { key: name.clone(), ..(*j).clone() })
        .collect();
    let gw = gateway(&s)?;
    let results = pipeline::run_jobs(&gw, &jobs, s.backend.max_inflight);
    let mut reports = BTreeMap::new();
    let mut failed = 0;
    for (job, result) in jobs.iter().zip(results) {
        match result.map_err(anyhow::Error::from).and_then(|a| store(out, &job.key, &a.text)) {
            Ok(r) => {
                reports.insert(job.key.clone(), r);
            }
            Err(e) => {
                eprintln!("error: segment {}: {e:#}", job.key);
                failed += 1;
            }
        }
    }
    write(&out_path(out, "usage.csv")?, &gw.ledger().to_csv())?;

    println!("disabled: {}", s.disabled.join(", "));
    println!("{:<28}{:>16}{:>16}", "segment", "with rules", "without rules");
    let count = |r: Option<&AnalysisReport>| match r {
        Some(r) => format!("{}E/{}A", r.irrigation_events.len(), r.anomalies.len()),
        None => "error".into(),
    };
    for j in &with {
        let a = reports.get(&format!("{}.with", j.key));
        let b = reports.get(&format!("{}.without", j.key));
        println!("{:<28}{:>16}{:>16}", j.key, count(a), count(b));
        if let (Some(a), Some(b)) = (a, b) {
            for x in b.anomalies.iter().filter(|x| !a.anomalies.contains(x)) {
                println!("  + {} at {}", x.kind, x.span);
            }
        }
    }
    Ok(Status::from_counts(failed, jobs.len()))
}

fn json_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            out.insert(pipeline::probe_of(&path), path);
        }
    }
    Ok(out)
}

fn load_report(path: &Path) -> Result<AnalysisReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn evaluate(reports: &Path, truth: &Path, tolerance: Option<&str>, out: &Path, list: bool) -> Result<Status> {
    let tol = match tolerance {
        Some(t) => kv::parse_duration(t).ok_or_else(|| usage(format!("invalid duration {t:?}")))?,
        None => spade_core::eval::DEFAULT_TOLERANCE,
    };
    let r = json_stems(reports)?;
    let t = json_stems(truth)?;
    let unmatched: Vec<&String> = r.keys().filter(|k| !t.contains_key(*k)).chain(t.keys().filter(|k| !r.contains_key(*k))).collect();
    if !unmatched.is_empty() {
        let names: Vec<&str> = unmatched.iter().map(|s| s.as_str()).collect();
        bail!("unmatched basenames: {}", names.join(", "));
    }
    if r.is_empty() {
        bail!("no report files in {}", reports.display());
    }
    if list {
        for (k, p) in &r {
            println!("{k}\t{}\t{}", p.display(), t[k].display());
        }
        return Ok(Status::Success);
    }
    let detected = r.values().map(|p| load_report(p)).collect::<Result<Vec<_>>>()?;
    let labels = t.values().map(|p| load_report(p)).collect::<Result<Vec<_>>>()?;
    let mut outcome = evaluate_corpus(&detected, &labels, tol)?;
    for (row, key) in outcome.segments.iter_mut().zip(r.keys()) {
        row.key = key.clone();
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write(out, &outcome.to_json())?;
    write(&out.with_extension("tallies.csv"), &outcome.tallies_csv())?;
    print!("{}", outcome.summary_table());
    Ok(Status::Success)
}

/// Truth report for each analysis segment of a generated series.
fn split_truth(series: &spade_core::SoilMoistureSeries, truth: &AnalysisReport, window_days: u32) -> Result<Vec<(String, AnalysisReport)>> {
    let s = Settings {
        window_days,
        ..Settings::default()
    };
    let segs = pipeline::segments(series, &s)?;
    Ok(segs
        .iter()
        .map(|seg| {
            let inside = |t| seg.window_start <= t && t <= seg.window_end;
            let events = truth.irrigation_events.iter().filter(|e| inside(e.onset)).cloned().collect();
            let anomalies = truth.anomalies.iter().filter(|a| inside(a.span.start())).cloned().collect();
            (
                pipeline::segment_key(&series.meta().probe, seg.window_start),
                compose_report(events, anomalies),
            )
        })
        .collect())
}

fn synth(spec: Option<&Path>, standard: bool, seed: Option<u64>, window_days: u32, out: &Path) -> Result<Status> {
    if window_days == 0 {
        return Err(usage("--window-days must be at least 1"));
    }
    let specs: Vec<ScenarioSpec> = if standard {
        let first = seed.unwrap_or(1);
        (first..first + STANDARD_CORPUS_SIZE).map(standard_corpus_spec).collect()
    } else {
        let path = spec.ok_or_else(|| usage("synth needs a scenario file or --standard-corpus"))?;
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut sc = ScenarioSpec::from_kv(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        if let Some(seed) = seed {
            sc.seed = seed;
        }
        vec![sc]
    };
    let truth_dir = out.join("truth");
    let mut segments = 0;
    for sc in &specs {
        let (series, truth) = generate(sc).with_context(|| format!("scenario {}", sc.probe))?;
        export_csv(series.samples(), &out_path(out, &format!("{}.csv", sc.probe))?)?;
        write(&out_path(out, &format!("{}.scenario", sc.probe))?, &sc.to_kv())?;
        for (key, report) in split_truth(&series, &truth.to_report(), window_days)? {
            write(&out_path(&truth_dir, &format!("{key}.json"))?, &to_json(&report))?;
            segments += 1;
        }
    }
    println!("{} series, {segments} truth segments written to {}", specs.len(), out.display());
    Ok(Status::Success)
}

fn cost(log: &Path, reprice: bool, price_in: Option<f64>, price_out: Option<f64>, config: Option<&Path>) -> Result<Status> {
    let text = std::fs::read_to_string(log).with_context(|| format!("reading {}", log.display()))?;
    let mut ledger = UsageLedger::from_csv(&text).map_err(|e| anyhow::anyhow!("{}: {e}", log.display()))?;
    if reprice {
        let mut cfg = match config {
            Some(p) => {
                let t = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                BackendConfig::from_kv(&t).map_err(|e| usage(format!("{}: {e}", p.display())))?
            }
            None => BackendConfig::default(),
        };
        cfg.price_in = price_in.unwrap_or(cfg.price_in);
        cfg.price_out = price_out.unwrap_or(cfg.price_out);
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        let mut repriced = UsageLedger::default();
        for r in ledger.records() {
            repriced.record(r.request_id.clone(), estimate_cost(r.cost.input_tokens, r.cost.output_tokens, &cfg));
        }
        ledger = repriced;
    } else if price_in.is_some() || price_out.is_some() || config.is_some() {
        return Err(usage("--price-in, --price-out and --config need --reprice"));
    }
    let n = ledger.records().len();
    let total = ledger.total();
    let mean = if n == 0 {
        Usd::ZERO
    } else {
        Usd::from_picos(total.total_cost.picos() / n as i128)
    };
    let mut table = String::new();
    let _ = writeln!(table, "{:<16}{:>14}{:>14}", "", "tokens", "cost");
    let _ = writeln!(table, "{:<16}{:>14}{:>14}", "input", total.input_tokens, total.input_cost.display4());
    let _ = writeln!(table, "{:<16}{:>14}{:>14}", "output", total.output_tokens, total.output_cost.display4());
    let _ = writeln!(
        table,
        "{:<16}{:>14}{:>14}",
        "total",
        total.input_tokens + total.output_tokens,
        total.total_cost.display4()
    );
    let _ = writeln!(table, "requests: {n}, mean per request: {}", mean.display4());
    let _ = writeln!(table, "exact total: ${}", total.total_cost);
    print!("{table}");
    Ok(Status::Success)
}
