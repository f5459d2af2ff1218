use std::path::Path;
use std::process::{Command, Output};

use spade_core::report::from_json;
use spade_gateway::{estimate_cost, BackendConfig, UsageLedger};

fn spade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spade"))
        .args(args)
        .env_remove("SPADE_ENDPOINT")
        .env_remove("SPADE_API_KEY")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SCENARIO: &str = "probe=plot-7\nseed=5\nirrigation_count=2\ndecline_shapes=gradual,stepwise\nanomaly.1=SingleDip@2.5\n";

fn synth_one(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("plot.scenario");
    std::fs::write(&spec, SCENARIO).unwrap();
    let out = dir.join("synth");
    assert_eq!(spade(&["synth", p(&spec), "--out", p(&out)]).status.code(), Some(0));
    out
}

#[test]
fn synth_analyze_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth_one(dir.path());
    assert!(syn.join("plot-7.csv").exists());
    let truth = syn.join("truth/plot-7_20230701T000000.json");
    assert!(truth.exists());

    let rep = dir.path().join("rep");
    let o = spade(&["analyze", p(&syn.join("plot-7.csv")), "--backend", "local-rules", "--out", p(&rep)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("segments: 1 (0 failed)"));
    assert!(text.contains("irrigation events: 2"));
    let report = from_json(&std::fs::read_to_string(rep.join("plot-7_20230701T000000.json")).unwrap()).unwrap();
    assert_eq!(report.irrigation_events.len(), 2);
    assert!(rep.join("plot-7_20230701T000000.txt").exists());
    assert!(rep.join("usage.csv").exists());

    let eval = dir.path().join("eval.json");
    let o = spade(&["evaluate", p(&rep), p(&syn.join("truth")), "--out", p(&eval)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Irrigation detection"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&eval).unwrap()).unwrap();
    assert_eq!(v["n_segments"], 1);
    assert_eq!(v["segments"][0]["key"], "plot-7_20230701T000000");
    assert!(dir.path().join("eval.tallies.csv").exists());

    let o = spade(&["evaluate", p(&rep), p(&syn.join("truth")), "--list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn synth_is_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = synth_one(a.path());
    let sb = synth_one(b.path());
    for f in ["plot-7.csv", "plot-7.scenario", "truth/plot-7_20230701T000000.json"] {
        assert_eq!(std::fs::read(sa.join(f)).unwrap(), std::fs::read(sb.join(f)).unwrap(), "{f}");
    }
    // A different seed changes the series.
    let spec = a.path().join("plot.scenario");
    let other = a.path().join("other");
    spade(&["synth", p(&spec), "--seed", "6", "--out", p(&other)]);
    assert_ne!(std::fs::read(sa.join("plot-7.csv")).unwrap(), std::fs::read(other.join("plot-7.csv")).unwrap());
}

#[test]
fn evaluate_rejects_unmatched_basenames() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth_one(dir.path());
    let rep = dir.path().join("rep");
    std::fs::create_dir_all(&rep).unwrap();
    std::fs::copy(syn.join("truth/plot-7_20230701T000000.json"), rep.join("other_20230701T000000.json")).unwrap();
    let o = spade(&["evaluate", p(&rep), p(&syn.join("truth"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unmatched basenames"));
}

#[test]
fn dry_run_writes_prompts_and_estimates_cost() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth_one(dir.path());
    let out = dir.path().join("dry");
    let o = spade(&["analyze", p(&syn.join("plot-7.csv")), "--backend", "remote", "--dry-run", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("estimated cost: $0.0"));
    let prompt = std::fs::read_to_string(out.join("plot-7_20230701T000000.prompt.txt")).unwrap();
    assert!(prompt.contains("---DATA BEGIN---"));
    assert!(!out.join("usage.csv").exists());
}

#[test]
fn remote_without_endpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth_one(dir.path());
    let o = spade(&["analyze", p(&syn.join("plot-7.csv")), "--backend", "remote", "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("endpoint"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth_one(dir.path());
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "timestamp,moisture\n2023-07-01 00:00:00,abc\n").unwrap();
    let good = syn.join("plot-7.csv");
    let out = dir.path().join("o");

    let o = spade(&["analyze", p(&good), p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.csv"));
    assert!(out.join("plot-7_20230701T000000.json").exists());

    assert_eq!(spade(&["analyze", p(&bad), "--out", p(&out)]).status.code(), Some(3));
    assert_eq!(spade(&["analyze", p(&dir.path().join("missing.csv"))]).status.code(), Some(3));
    assert_eq!(spade(&["analyze", p(&good), "--disable", "domain.9"]).status.code(), Some(1));
    assert_eq!(spade(&["evaluate", p(&out), p(&out), "--tolerance", "soon"]).status.code(), Some(1));
    assert_eq!(spade(&["analyze"]).status.code(), Some(1));
    assert_eq!(spade(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(spade(&["ablate", p(&good)]).status.code(), Some(1));
    assert_eq!(spade(&["synth", "--out", p(&out)]).status.code(), Some(1));
    assert_eq!(spade(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth_one(dir.path());
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "backend=remote\nwindow_days=2\nrise_threshold=1.5\n").unwrap();
    let out = dir.path().join("o");
    let o = spade(&[
        "analyze",
        p(&syn.join("plot-7.csv")),
        "--config",
        p(&cfg),
        "--backend",
        "local-rules",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // Two-day windows from the config: four segments for seven days.
    assert!(stdout(&o).contains("segments: 4 (0 failed)"));

    std::fs::write(&cfg, "colour=red\n").unwrap();
    let o = spade(&["analyze", p(&syn.join("plot-7.csv")), "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ablate_writes_paired_reports() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth_one(dir.path());
    let out = dir.path().join("ab");
    let o = spade(&[
        "ablate",
        p(&syn.join("plot-7.csv")),
        "--disable",
        "anomaly.7",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let with = from_json(&std::fs::read_to_string(out.join("plot-7_20230701T000000.with.json")).unwrap()).unwrap();
    let without =
        from_json(&std::fs::read_to_string(out.join("plot-7_20230701T000000.without.json")).unwrap()).unwrap();
    assert!(without.anomalies.len() > with.anomalies.len());
    assert!(stdout(&o).contains("+ SingleSpike"));
}

#[test]
fn cost_sums_a_usage_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BackendConfig::default();
    let mut ledger = UsageLedger::default();
    for i in 0..100 {
        ledger.record(format!("seg-{i:03}"), estimate_cost(3000, 150, &cfg));
    }
    let log = dir.path().join("usage.csv");
    std::fs::write(&log, ledger.to_csv()).unwrap();
    let o = spade(&["cost", p(&log)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("exact total: $0.72"), "{text}");
    assert!(text.contains("mean per request: $0.0072"));

    let o = spade(&["cost", p(&log), "--reprice", "--price-in", "4", "--price-out", "8"]);
    assert!(stdout(&o).contains("exact total: $1.32"));
    assert_eq!(spade(&["cost", p(&log), "--price-in", "4"]).status.code(), Some(1));

    std::fs::write(&log, "nonsense\n").unwrap();
    assert_eq!(spade(&["cost", p(&log)]).status.code(), Some(3));
}
