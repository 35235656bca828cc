//! CLI surface tests: exit codes, file outputs, and the stage-composability
//! contract (chaining the subcommands through intermediate files reproduces
//! the metrics of a full `run`).

use std::path::Path;
use std::process::Command;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gbfl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gbfl"))
}

fn write_dataset(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = Array2::from_shape_fn((n, 2), |_| rng.gen_range(0.0..10.0));
    let labels: Vec<usize> = (0..n).map(|i| usize::from(features[[i, 0]] > 5.0)).collect();
    let data = gbfl::data::Dataset::from_parts(features, labels).unwrap();
    gbfl::data::save_csv(&data, path).unwrap();
}

#[test]
fn missing_config_exits_one() {
    let out = gbfl()
        .args(["run", "--config", "definitely-missing.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let out = gbfl().args(["grid", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("usage") || stderr.contains("--help"));
}

#[test]
fn help_exits_zero() {
    let out = gbfl().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{"data_path": "d.csv", "label_column": "y", "tree_hieght": 4}"#,
    )
    .unwrap();
    let out = gbfl()
        .args(["run", "--config", cfg_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tree_hieght"));
}

#[test]
fn grid_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    write_dataset(&data_path, 80, 3);
    let grid_path = dir.path().join("grid.csv");
    let out = gbfl()
        .args([
            "grid",
            "--data",
            data_path.to_str().unwrap(),
            "--label",
            "label",
            "--grid-points",
            "5",
            "--out",
            grid_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (grid, names) = gbfl::grid::load_grid(&grid_path).unwrap();
    assert_eq!(grid.n_intervals(), 4);
    assert_eq!(names, vec!["x0".to_string(), "x1".to_string()]);
}

/// Chaining the stage subcommands with intermediate files must reproduce the
/// metrics of `run` with the same (singleton) parameters and seed.
#[test]
fn stage_chain_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    write_dataset(&data_path, 160, 9);
    let seed = "7";
    let path = |name: &str| dir.path().join(name).display().to_string();

    // Full pipeline with singleton search sets.
    let cfg = serde_json::json!({
        "data_path": data_path.display().to_string(),
        "label_column": "label",
        "seeds": [7],
        "grid_counts": [5],
        "deltas": [1],
        "heights": [3],
        "explainer": {},
        "blackbox": {},
        "output_dir": path("run_out"),
    });
    std::fs::write(dir.path().join("cfg.json"), cfg.to_string()).unwrap();
    let out = gbfl()
        .args(["run", "--config", &path("cfg.json")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("run_out/report.json")).unwrap())
            .unwrap();
    let gbfl_row = report["per_seed"][0]["methods"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["method"] == "GBFL")
        .unwrap()
        .clone();

    // The same stages, chained by hand.
    let run = |args: &[&str]| {
        let out = gbfl().args(args).output().unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "command {:?} failed: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let data = ["--data", data_path.to_str().unwrap(), "--label", "label"];
    run(&[
        &["train-blackbox"][..],
        &data,
        &["--split", "train", "--seed", seed, "--out", &path("bb.bin")],
    ]
    .concat());
    run(&[
        &["explain"][..],
        &data,
        &["--split", "train", "--seed", seed, "--model", &path("bb.bin"), "--out", &path("expl_train.csv")],
    ]
    .concat());
    run(&[
        &["explain"][..],
        &data,
        &["--split", "test", "--seed", seed, "--model", &path("bb.bin"), "--out", &path("expl_test.csv")],
    ]
    .concat());
    run(&[
        &["grid"][..],
        &data,
        &["--split", "train", "--seed", seed, "--grid-points", "5", "--out", &path("grid.csv")],
    ]
    .concat());
    run(&[
        &["gbfl"][..],
        &data,
        &[
            "--split", "train", "--seed", seed,
            "--model", &path("bb.bin"),
            "--explanations", &path("expl_train.csv"),
            "--grid", &path("grid.csv"),
            "--delta", "1",
            "--out", &path("clauses.json"),
        ],
    ]
    .concat());
    run(&[
        &["fit"][..],
        &data,
        &[
            "--split", "train", "--seed", seed,
            "--model", &path("bb.bin"),
            "--clauses", &path("clauses.json"),
            "--learner", "tree",
            "--height", "3",
            "--out", &path("tmodel.json"),
        ],
    ]
    .concat());
    run(&[
        &["evaluate"][..],
        &data,
        &[
            "--split", "test", "--seed", seed,
            "--model", &path("bb.bin"),
            "--tmodel", &path("tmodel.json"),
            "--explanations", &path("expl_test.csv"),
            "--out", &path("metrics.json"),
        ],
    ]
    .concat());

    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["consistency"]["c_tb"], gbfl_row["c_tb"]);
    assert_eq!(metrics["consistency"]["c_tb_pp"], gbfl_row["c_tb_pp"]);
    assert_eq!(metrics["consistency"]["c_tb_pn"], gbfl_row["c_tb_pn"]);
    assert_eq!(metrics["accuracy"], gbfl_row["accuracy"]);
}

#[test]
fn report_subcommand_rerenders() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    write_dataset(&data_path, 100, 5);
    let cfg = serde_json::json!({
        "data_path": data_path.display().to_string(),
        "label_column": "label",
        "seeds": [0],
        "grid_counts": [5],
        "deltas": [1],
        "heights": [2],
        "explainer": {"max_iters": 100},
        "blackbox": {"epochs": 30},
        "output_dir": dir.path().join("out").display().to_string(),
    });
    std::fs::write(dir.path().join("cfg.json"), cfg.to_string()).unwrap();
    let out = gbfl()
        .args(["run", "--config", dir.path().join("cfg.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let rendered = dir.path().join("rerender");
    std::fs::create_dir_all(&rendered).unwrap();
    let out = gbfl()
        .args([
            "report",
            "--report",
            dir.path().join("out/report.json").to_str().unwrap(),
            "--out",
            rendered.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let original = std::fs::read_to_string(dir.path().join("out/report.md")).unwrap();
    let again = std::fs::read_to_string(rendered.join("report.md")).unwrap();
    assert_eq!(original, again);
    assert!(rendered.join("rules.txt").exists());
}
