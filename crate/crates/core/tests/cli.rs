mod common;

use std::process::{Command, Output};

use common::fixture;
use relqa::graph;

fn relqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relqa"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let out = relqa(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_exits_1() {
    assert_eq!(relqa(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn version_exits_0() {
    let out = relqa(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn missing_input_is_a_data_error() {
    assert_eq!(relqa(&["stats", "--graph", "/nonexistent/g.bin"]).status.code(), Some(2));
}

#[test]
fn missing_required_path_is_a_usage_error() {
    assert_eq!(relqa(&["stats"]).status.code(), Some(1));
}

#[test]
fn graph_stats_and_generation() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.bin");
    let out = relqa(&[
        "build-graph",
        "--corpus",
        path(&fixture("mini_wiki.txt")),
        "--triplets",
        path(&fixture("triplets.tsv")),
        "--out",
        path(&g),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let stats = relqa(&["stats", "--graph", path(&g)]);
    assert_eq!(stats.status.code(), Some(0));
    let expected = graph::compute_stats(&graph::load_graph(&g).unwrap()).to_kv();
    assert_eq!(String::from_utf8(stats.stdout).unwrap(), expected);

    let ds = dir.path().join("ds.jsonl");
    let out = relqa(&["gen-qa", "--graph", path(&g), "--out", path(&ds)]);
    assert_eq!(out.status.code(), Some(0));
    let lines = std::fs::read_to_string(&ds).unwrap().lines().count();
    assert!(String::from_utf8_lossy(&out.stdout).contains(&format!("datapoints={lines}")));

    let batches = dir.path().join("b.jsonl");
    let out = relqa(&[
        "sample-batches", "--graph", path(&g), "--dataset", path(&ds), "--out", path(&batches),
        "--n", "3", "--b", "2", "--B", "6", "--K", "1", "--seed", "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&batches).unwrap().lines().count(), 3);

    let ck = dir.path().join("m.ckpt");
    let metrics = dir.path().join("m.csv");
    let args = [
        "pretrain-toy", "--graph", path(&g), "--dataset", path(&ds), "--out-checkpoint", path(&ck),
        "--metrics-out", path(&metrics), "--epochs", "2", "--lr", "0.3", "--warmup", "0.2",
        "--B", "6", "--b", "2", "--K", "1", "--m", "1", "--reader-batch", "4", "--seed", "3",
    ];
    assert_eq!(relqa(&args).status.code(), Some(0));
    let csv = std::fs::read_to_string(&metrics).unwrap();
    assert!(csv.starts_with(relqa::losses::METRICS_HEADER));
    let loaded = relqa::model::load_checkpoint::<f64>(&ck).unwrap();
    assert_eq!(loaded.epoch, 2);
    assert_eq!(
        relqa::model::encode_checkpoint(&loaded),
        std::fs::read(&ck).unwrap()
    );

    let resumed = dir.path().join("r.ckpt");
    let mut more = args.to_vec();
    more.extend(["--checkpoint", path(&ck)]);
    more[6] = path(&resumed);
    assert_eq!(relqa(&more).status.code(), Some(0));

    let bad = relqa(&["pretrain-toy", "--graph", path(&g), "--dataset", path(&ds), "--out-checkpoint", path(&ck), "--metrics-out", path(&metrics), "--epochs", "0"]);
    assert_eq!(bad.status.code(), Some(1));

    let reports = dir.path().join("rep");
    let out = relqa(&[
        "analyze-bias", "--graph", path(&g), "--qa", path(&fixture("qa.tsv")), "--predictions",
        path(&fixture("predictions.tsv")), "--out-dir", path(&reports),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let coverage = std::fs::read_to_string(reports.join("coverage.txt")).unwrap();
    assert!(coverage.contains("aligned=26"));
}
