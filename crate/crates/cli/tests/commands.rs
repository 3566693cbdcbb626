use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use shardsim_cli::analyze_file;
use shardsim_core::metrics::{parse_csv_rows, serialize_reports};
use shardsim_core::{gen_clustered, Aggregates, MetricSeries, ReportFormat};

fn shardsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shardsim")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_in(dir: &Path, suffix: &str) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    v.sort();
    v
}

const CLUSTERED: &str = "clustered:communities=4,size=25,p_intra=0.9,churn=0.01,txs=40,blocks=400,seed=5";

#[test]
fn gen_trace_uniform_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    let msg = ok(&shardsim(&[
        "gen-trace",
        "--gen",
        "uniform:accounts=100,txs=10,blocks=10,seed=1",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(msg.contains("100 transactions"), "{msg}");
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 101);
    assert!(text.starts_with("block_number,tx_index,from,to\n"));
}

#[test]
fn gen_trace_pure_communities_never_cross() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let spec = "clustered:communities=5,size=10,p_intra=1,churn=0,txs=20,blocks=50,seed=2";
    ok(&shardsim(&["gen-trace", "--gen", spec, "--out", out.to_str().unwrap()]));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let c = |s: &str| shardsim_core::trace::community_of(s).unwrap();
        assert_eq!(c(&rec[2]), c(&rec[3]), "{rec:?}");
        rows += 1;
    }
    assert_eq!(rows, 1000);
}

#[test]
fn gen_trace_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        ok(&shardsim(&["gen-trace", "--gen", CLUSTERED, "--out", p.to_str().unwrap()]));
    }
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn gen_trace_unwritable_path_fails() {
    let out = shardsim(&["gen-trace", "--gen", "uniform", "--out", "/nonexistent-dir/x/y.csv"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn simulate_writes_configured_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&shardsim(&["simulate", "--gen", CLUSTERED, "--k", "4", "--tau", "4", "--epochs", "7", "--out", d]));
    let metrics = csv_in(dir.path(), ".metrics.csv");
    assert_eq!(metrics.len(), 1);
    let rows = parse_csv_rows(fs::File::open(&metrics[0]).unwrap()).unwrap();
    assert_eq!(rows.len(), 7);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&csv_in(dir.path(), ".manifest.json")[0]).unwrap()).unwrap();
    assert_eq!(manifest["params"]["k"], 4);
    assert_eq!(manifest["epochs_run"], 7);
    assert_eq!(manifest["trace"]["digest"].as_str().unwrap().len(), 64);
    assert!(manifest["code_version"].is_string());
}

#[test]
fn hash_baseline_crosses_more_than_pilot() {
    let dir = tempfile::tempdir().unwrap();
    let mut means = Vec::new();
    for alloc in ["hash", "pilot"] {
        let sub = dir.path().join(alloc);
        let d = sub.to_str().unwrap();
        ok(&shardsim(&["simulate", "--gen", CLUSTERED, "--k", "4", "--tau", "4", "--allocator", alloc, "--out", d]));
        means.push(analyze_file(&csv_in(&sub, ".metrics.csv")[0], None).unwrap().mean_cross_ratio);
    }
    assert!(means[0] > means[1], "{means:?}");
}

#[test]
fn json_output_embeds_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&shardsim(&["simulate", "--gen", CLUSTERED, "--k", "4", "--tau", "4", "--format", "json", "--out", d]));
    let files = csv_in(dir.path(), ".metrics.json");
    assert_eq!(files.len(), 1);
    assert!(csv_in(dir.path(), ".manifest.json").is_empty());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert!(v["run_manifest"]["run_id"].is_string());
    let analyzed = ok(&shardsim(&["analyze", files[0].to_str().unwrap()]));
    assert!(analyzed.contains("cross-shard ratio"));
}

#[test]
fn simulate_from_trace_file_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    ok(&shardsim(&["gen-trace", "--gen", CLUSTERED, "--out", trace.to_str().unwrap()]));
    let from_file = dir.path().join("file");
    let from_gen = dir.path().join("gen");
    ok(&shardsim(&[
        "simulate",
        "--trace",
        trace.to_str().unwrap(),
        "--k",
        "4",
        "--tau",
        "4",
        "--out",
        from_file.to_str().unwrap(),
    ]));
    ok(&shardsim(&["simulate", "--gen", CLUSTERED, "--k", "4", "--tau", "4", "--out", from_gen.to_str().unwrap()]));
    let a = csv_in(&from_file, ".metrics.csv");
    let b = csv_in(&from_gen, ".metrics.csv");
    // same digest, same run id
    assert_eq!(a[0].file_name(), b[0].file_name());
    assert_eq!(fs::read(&a[0]).unwrap(), fs::read(&b[0]).unwrap());
}

#[test]
fn missing_trace_file_fails() {
    let out = shardsim(&["simulate", "--trace", "/no/such/trace.csv", "--out", "/tmp"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/trace.csv"));
}

#[test]
fn bad_eta_is_a_usage_error() {
    let out = shardsim(&["simulate", "--gen", "uniform", "--eta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eta"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.toml");
    fs::write(
        &conf,
        format!("k = 4\ntau = 4\nepochs = 3\ngen = \"{CLUSTERED}\"\nout = \"{}\"\n", dir.path().join("o").display()),
    )
    .unwrap();
    ok(&shardsim(&["simulate", "--config", conf.to_str().unwrap(), "--k", "8"]));
    let files = csv_in(&dir.path().join("o"), ".manifest.json");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(manifest["params"]["k"], 8);
    assert_eq!(manifest["params"]["tau"], 4);
    assert_eq!(manifest["epochs_run"], 3);
}

fn write_series(path: &Path, series: &MetricSeries) {
    serialize_reports(series, ReportFormat::Csv, fs::File::create(path).unwrap()).unwrap();
}

fn hand_series() -> MetricSeries {
    let spec = shardsim_core::ClusteredSpec {
        n_communities: 2,
        accounts_per_community: 5,
        p_intra: 0.8,
        txs_per_block: 4,
        n_blocks: 60,
        churn: 0.0,
        seed: 1,
    };
    let trace = gen_clustered(&spec).unwrap();
    let cfg = shardsim_core::ExperimentConfig {
        params: shardsim_core::SimParams { k: 2, tau: 3, ..Default::default() },
        lambda: Some(5.0),
        epochs: Some(2),
        ..Default::default()
    };
    shardsim_core::run_experiment(&trace, &cfg).unwrap()
}

#[test]
fn analyze_single_row_equals_that_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut series = hand_series();
    series.reports.truncate(1);
    let path = dir.path().join("one.csv");
    write_series(&path, &series);
    let agg = analyze_file(&path, None).unwrap();
    let r = &series.reports[0];
    assert_eq!(agg.epochs, 1);
    assert_eq!(agg.mean_cross_ratio, r.cross_ratio);
    assert_eq!(agg.mean_workload_deviation, r.workload_deviation);
    assert_eq!(agg.mean_normalized_throughput, r.normalized_throughput);
}

#[test]
fn analyze_two_rows_matches_hand_means() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two.csv");
    let header = "epoch,committed_tx,dropped_tx,intra,cross,cross_ratio,workload_deviation,normalized_throughput,proposed_mr,committed_mr";
    fs::write(&path, format!("{header}\n0,10,0,8,2,0.2,1.5,2.0,3,1\n1,12,1,9,4,0.3076923076923077,0.5,2.4,2,2\n"))
        .unwrap();
    let agg = analyze_file(&path, None).unwrap();
    assert_eq!(agg.epochs, 2);
    assert!((agg.mean_cross_ratio - (0.2 + 0.3076923076923077) / 2.0).abs() < 1e-15);
    assert_eq!(agg.mean_workload_deviation, 1.0);
    assert!((agg.mean_normalized_throughput - 2.2).abs() < 1e-15);
    assert_eq!(agg.total_committed_mr, 3);
}

#[test]
fn analyze_matches_in_memory_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let series = hand_series();
    let path = dir.path().join("s.csv");
    write_series(&path, &series);
    let from_file: Aggregates = analyze_file(&path, None).unwrap();
    assert_eq!(from_file, series.aggregates());
}

#[test]
fn analyze_empty_file_fails_without_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    fs::write(&path, "").unwrap();
    let out = shardsim(&["analyze", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn analyze_names_malformed_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let header = "epoch,committed_tx,dropped_tx,intra,cross,cross_ratio,workload_deviation,normalized_throughput,proposed_mr,committed_mr";
    fs::write(&path, format!("{header}\n0,10,0,8,2,0.2,1.5,2.0,3,1\n1,x,1,9,4,0.3,0.5,2.4,2,2\n")).unwrap();
    let out = shardsim(&["analyze", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2"), "{err}");
}
