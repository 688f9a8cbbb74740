mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn convforest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convforest")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

/// 60 rows, 9 attributes, three well separated classes, as CSV and ARFF.
fn fixture(dir: &Path) -> (String, String) {
    let mut csv = (0..9).map(|j| format!("a{j}")).collect::<Vec<_>>().join(",") + ",class\n";
    let mut arff = String::from("@relation t\n");
    for j in 0..9 {
        arff += &format!("@attribute a{j} numeric\n");
    }
    arff += "@attribute class {c0,c1,c2}\n@data\n";
    for i in 0..60 {
        let c = i % 3;
        let row: Vec<String> = (0..9).map(|j| format!("{}", c as f64 + ((i * 7 + j * 3) % 10) as f64 * 0.05)).collect();
        let line = format!("{},c{c}\n", row.join(","));
        csv += &line;
        arff += &line;
    }
    let (a, b) = (dir.join("t.csv"), dir.join("t.arff"));
    fs::write(&a, csv).unwrap();
    fs::write(&b, arff).unwrap();
    (a.to_string_lossy().into(), b.to_string_lossy().into())
}

#[test]
fn every_subcommand_has_help() {
    for cmd in ["inspect", "train-dcnn", "extract", "train-frf", "predict", "experiment", "ttest"] {
        let o = convforest(&[cmd, "--help"]);
        assert_eq!(code(&o), 0, "{cmd}");
        assert!(stdout(&o).contains("Usage"), "{cmd}");
    }
    assert_eq!(code(&convforest(&["--help"])), 0);
    assert_eq!(code(&convforest(&["no-such-command"])), 1);
}

#[test]
fn inspect_reports_the_grid() {
    let path = common::data_path("optdigits.arff");
    let v = json(&convforest(&["--json", "inspect", path.to_str().unwrap()]));
    assert_eq!(v["attributes"], 64);
    assert_eq!(v["instances"], 5620);
    assert_eq!(v["classes"], 10);
    assert_eq!(v["grid"]["height"], 8);
    assert_eq!(v["grid"]["width"], 8);
}

#[test]
fn missing_file_is_a_user_error() {
    let o = convforest(&["inspect", "/no/such/file.csv"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("/no/such/file.csv"));
    let o = convforest(&["--json", "inspect", "/no/such/file.csv"]);
    assert_eq!(code(&o), 1);
    assert!(json(&o)["error"].as_str().unwrap().contains("/no/such/file.csv"));
}

#[test]
fn csv_and_arff_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, arff) = fixture(dir.path());
    let mut a = json(&convforest(&["--json", "inspect", &csv]));
    let mut b = json(&convforest(&["--json", "inspect", &arff]));
    for v in [&mut a, &mut b] {
        let m = v.as_object_mut().unwrap();
        m.remove("path");
        m.remove("dataset");
    }
    assert_eq!(a, b);
}

#[test]
fn network_that_does_not_fit_the_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = fixture(dir.path());
    let out = dir.path().join("m.json");
    let o = convforest(&["train-dcnn", &csv, "--preset", "large", "--grid", "square", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("3x3"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn end_to_end_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, arff) = fixture(dir.path());
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    for m in ["m1.json", "m2.json"] {
        let o = convforest(&["--seed", "4", "train-dcnn", &csv, "--epochs", "3", "--lr", "0.0095", "--out", &p(m)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(fs::read(p("m1.json")).unwrap(), fs::read(p("m2.json")).unwrap());

    let o = convforest(&["extract", &csv, "--model", &p("m1.json"), "--out", &p("f.csv")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let features = fs::read_to_string(p("f.csv")).unwrap();
    let lines: Vec<&str> = features.lines().collect();
    assert_eq!(lines.len(), 61);
    // 64 dense units plus the class column.
    assert_eq!(lines[0].split(',').count(), 65);

    let o = convforest(&["--json", "train-frf", &p("f.csv"), "--trees", "10", "--out", &p("forest.json"), "--importance", &p("imp.csv")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["mtry"], 7);
    assert_eq!(v["trees"], 10);
    let imp = fs::read_to_string(p("imp.csv")).unwrap();
    assert!(imp.starts_with("attribute,importance\n"));
    assert_eq!(imp.lines().count(), 65);

    let o = convforest(&["--json", "predict", &arff, "--network", &p("m1.json"), "--forest", &p("forest.json"), "--out", &p("pred.csv")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(json(&o)["accuracy"].as_f64().unwrap() > 0.9);
    let pred = fs::read_to_string(p("pred.csv")).unwrap();
    assert!(pred.starts_with("row,predicted,actual\n"));
    assert_eq!(pred.lines().count(), 61);

    // A checkpoint fitted on 9 attributes cannot read a 16-attribute file.
    let other = common::data_path("pendigits.csv");
    let o = convforest(&["extract", other.to_str().unwrap(), "--model", &p("m1.json"), "--out", &p("g.csv")]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("9 attributes"), "{}", stderr(&o));
}

#[test]
fn mtry_out_of_range_is_rejected() {
    let path = common::data_path("optdigits.arff");
    let o = convforest(&["train-frf", path.to_str().unwrap(), "--mtry", "9999", "--trees", "2"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("9999"));
    let v = json(&convforest(&["--json", "train-frf", path.to_str().unwrap(), "--trees", "2"]));
    assert_eq!(v["mtry"], 7);
    assert_eq!(v["features"], 64);
}

#[test]
fn threads_must_be_positive() {
    assert_eq!(code(&convforest(&["--threads", "0", "ttest", "1,2", "2,4"])), 1);
}

#[test]
fn ttest_on_lists() {
    let v = json(&convforest(&["--json", "ttest", "0.9,0.8,0.85", "0.7,0.75,0.8"]));
    assert!((v["t"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(v["df"], 2);
    assert!((v["p_value"].as_f64().unwrap() - 0.1835).abs() < 1e-4);
    assert_eq!(code(&convforest(&["ttest", "0.9,0.8", "0.7"])), 1);
}

#[test]
fn experiment_runs_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = fixture(dir.path());
    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "name = \"empty\"\n").unwrap();
    assert_eq!(code(&convforest(&["experiment", empty.to_str().unwrap()])), 1);

    let manifest = dir.path().join("small.toml");
    fs::write(
        &manifest,
        format!(
            r#"name = "small"
k = 3
seeds = [2]

[[dataset]]
name = "toy"
path = "{}"

[[pipeline]]
name = "dcnn+frf"
kind = "dcnn+frf"
overrides = {{ epochs = 2, learning_rate = 0.0095 }}
forest = {{ n_trees = 10 }}

[[pipeline]]
name = "frf-raw"
kind = "frf-raw"
forest = {{ n_trees = 10 }}
"#,
            csv.replace('\\', "/")
        ),
    )
    .unwrap();
    let mut tables = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = convforest(&["--json", "experiment", manifest.to_str().unwrap(), "--no-timing", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        tables.push(fs::read_to_string(out.join("tables.md")).unwrap());
        assert!(out.join("ttests.json").exists());
        assert!(out.join("reports/toy__frf-raw__seed2.json").exists());
    }
    assert_eq!(tables[0], tables[1]);
    assert!(tables[0].contains("| toy |"));
}
