use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use modgae::graph::read_node_map;
use modgae::prior::read_partition_csv;

fn modgae(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modgae"))
        .current_dir(dir)
        .env_remove("MODGAE_JOBS")
        .env_remove("MODGAE_DATA_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = modgae(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

/// Four dense blocks of 25 nodes, split with seed 3.
fn fixture(dir: &Path) {
    ok(
        dir,
        &[
            "sbm",
            "--communities",
            "4",
            "--size",
            "25",
            "--pin",
            "0.4",
            "--pout",
            "0.01",
            "--seed",
            "1",
            "--out",
            "sbm",
        ],
    );
    ok(
        dir,
        &[
            "split",
            "--edges",
            "sbm/sbm.edges",
            "--seed",
            "3",
            "--out",
            "split",
        ],
    );
}

#[test]
fn split_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    ok(
        d,
        &[
            "split",
            "--edges",
            "sbm/sbm.edges",
            "--seed",
            "3",
            "--out",
            "again",
        ],
    );
    for f in [
        "train.edges",
        "val_pos.csv",
        "val_neg.csv",
        "test_pos.csv",
        "test_neg.csv",
        "split.json",
        "node_map.csv",
    ] {
        assert_eq!(
            fs::read(d.join("split").join(f)).unwrap(),
            fs::read(d.join("again").join(f)).unwrap(),
            "{f}"
        );
    }
    let other = ok(
        d,
        &[
            "split",
            "--edges",
            "sbm/sbm.edges",
            "--seed",
            "4",
            "--out",
            "other",
        ],
    );
    assert!(!other.is_empty());
    assert_ne!(
        fs::read(d.join("split/test_pos.csv")).unwrap(),
        fs::read(d.join("other/test_pos.csv")).unwrap()
    );
}

#[test]
fn usage_and_data_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(modgae(d, &["split", "--out", "x"]).status.code(), Some(2));
    assert_eq!(
        modgae(d, &["train", "--edges", "missing.edges", "--out", "x"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        modgae(d, &["sbm", "--communities", "0", "--out", "x"])
            .status
            .code(),
        Some(2)
    );
    fs::write(d.join("bad.edges"), "0 1\n1 two\n").unwrap();
    let out = modgae(d, &["split", "--edges", "bad.edges", "--out", "x"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.edges:2"));
}

#[test]
fn train_then_eval_writes_artifacts_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    for (seed, model) in [("1", "gae"), ("2", "vgae")] {
        ok(
            d,
            &[
                "train",
                "--split",
                "split",
                "--model",
                model,
                "--encoder",
                "linear",
                "--iters",
                "60",
                "--lambda",
                "0.5",
                "--beta",
                "0.5",
                "--seed",
                seed,
                "--out",
                &format!("run{seed}"),
            ],
        );
    }
    let run = d.join("run1");
    for f in [
        "config.json",
        "telemetry.jsonl",
        "embedding.csv",
        "node_map.csv",
        "manifest.json",
    ] {
        assert!(run.join(f).is_file(), "{f}");
    }
    assert!(run.join("params").is_dir());
    let telemetry = fs::read_to_string(run.join("telemetry.jsonl")).unwrap();
    let last = json(telemetry.lines().last().unwrap());
    assert_eq!(last["iter"], 59);
    let manifest = json(&fs::read_to_string(run.join("manifest.json")).unwrap());
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seeds"], serde_json::json!([1]));
    assert_eq!(manifest["dataset_fingerprint"].as_str().unwrap().len(), 64);

    let report = json(&ok(
        d,
        &[
            "eval",
            "--run",
            "run1",
            "--task",
            "lpcd",
            "--labels",
            "sbm/sbm.labels.csv",
        ],
    ));
    for key in ["ami", "ari", "auc", "ap", "modularity"] {
        assert!(report[key].as_f64().unwrap().is_finite(), "{key}");
    }
    assert!(report["auc"].as_f64().unwrap() > 0.5);
    assert_eq!(
        json(&fs::read_to_string(run.join("metrics-lpcd.json")).unwrap()),
        report,
        "report file matches stdout"
    );
    let again = json(&ok(
        d,
        &[
            "eval",
            "--run",
            "run1",
            "--task",
            "lpcd",
            "--labels",
            "sbm/sbm.labels.csv",
        ],
    ));
    assert_eq!(again, report);

    let summary = json(&ok(
        d,
        &["eval", "--runs", "run*", "--labels", "sbm/sbm.labels.csv"],
    ));
    assert_eq!(summary["runs"], 2);
    assert!(summary["std"]["ami"].as_f64().unwrap() >= 0.0);
}

#[test]
fn oracle_embedding_recovers_communities() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    ok(
        d,
        &[
            "train", "--split", "split", "--iters", "2", "--seed", "5", "--out", "run",
        ],
    );
    let truth: HashMap<u64, u64> = read_partition_csv(d.join("sbm/sbm.labels.csv"))
        .unwrap()
        .into_iter()
        .collect();
    let rows: String = read_node_map(d.join("run/node_map.csv"))
        .unwrap()
        .iter()
        .map(|id| {
            let c = truth[id];
            (0..4)
                .map(|k| if k == c { "10" } else { "0" })
                .collect::<Vec<_>>()
                .join(",")
                + "\n"
        })
        .collect();
    fs::write(d.join("run/embedding.csv"), rows).unwrap();
    let report = json(&ok(
        d,
        &[
            "eval",
            "--run",
            "run",
            "--labels",
            "sbm/sbm.labels.csv",
            "--out",
            "m.json",
        ],
    ));
    assert_eq!(report["ami"].as_f64().unwrap(), 1.0);
    assert_eq!(report["ari"].as_f64().unwrap(), 1.0);
    assert!(d.join("m.json").is_file());
}

#[test]
fn ground_truth_partition_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    let report = json(&ok(
        d,
        &[
            "eval",
            "--partition",
            "sbm/sbm.labels.csv",
            "--edges",
            "sbm/sbm.edges",
            "--labels",
            "sbm/sbm.labels.csv",
        ],
    ));
    assert_eq!(report["ami"].as_f64().unwrap(), 1.0);
    assert!(report["modularity"].as_f64().unwrap() > 0.5);
}

#[test]
fn disconnected_cliques_from_sbm() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "sbm",
            "--communities",
            "3",
            "--size",
            "5",
            "--pin",
            "1",
            "--pout",
            "0",
            "--seed",
            "9",
            "--out",
            "g",
        ],
    );
    let edges = fs::read_to_string(d.join("g/sbm.edges")).unwrap();
    assert_eq!(edges.lines().count(), 3 * 10);
    assert_eq!(
        fs::read_to_string(d.join("g/sbm.labels.csv"))
            .unwrap()
            .lines()
            .count(),
        16
    );
    let manifest = json(&fs::read_to_string(d.join("g/manifest.json")).unwrap());
    assert_eq!(manifest["config"]["p_in"], 1.0);
}

#[test]
fn search_over_a_single_point_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    let grid = serde_json::json!({
        "base": { "iterations": 40, "seed": 0 },
        "lr": [0.01],
        "iterations": [40],
        "dropout": [0.0],
        "lambda": [0.5],
        "beta": [0.5],
        "gamma": [1.0],
        "s": [2],
        "runs_per_point": 1
    });
    fs::write(d.join("grid.json"), grid.to_string()).unwrap();
    let out = modgae(
        d,
        &[
            "search",
            "--grid",
            "grid.json",
            "--split",
            "split",
            "--k",
            "4",
            "--out",
            "s",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        fs::read_to_string(d.join("s/grid.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );
    let best = json(&fs::read_to_string(d.join("s/best.json")).unwrap());
    let (auc, q) = (
        best["val_auc"].as_f64().unwrap(),
        best["modularity"].as_f64().unwrap(),
    );
    assert!((best["criterion"].as_f64().unwrap() - (auc + q) / 2.0).abs() < 1e-12);
    assert_eq!(
        json(&fs::read_to_string(d.join("s/config.json")).unwrap())["lambda"],
        0.5
    );
}
