//! Runs the binary on every scenario preset and compares the reports with
//! the stored golden values in `tests/golden`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use franson_cli::config::SCENARIOS;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_franson-bell"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn check_golden(path: &Path) -> Vec<String> {
    let golden: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let args: Vec<&str> = golden["args"].as_array().unwrap().iter().map(|a| a.as_str().unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let output = run(&args, dir.path());
    let name = path.file_name().unwrap().to_string_lossy().to_string();
    if !output.status.success() {
        return vec![format!("{name}: exit {:?}: {}", output.status.code(), String::from_utf8_lossy(&output.stderr))];
    }
    let rep = report(dir.path());
    let mut failures = Vec::new();
    for check in golden["checks"].as_array().unwrap() {
        let pointer = check["pointer"].as_str().unwrap();
        let Some(actual) = rep.pointer(pointer) else {
            failures.push(format!("{name}: {pointer} missing"));
            continue;
        };
        if let Some(expected) = check.get("equals") {
            if actual != expected {
                failures.push(format!("{name}: {pointer} = {actual}, expected {expected}"));
            }
        } else {
            let (a, e, tol) = (actual.as_f64().unwrap(), check["value"].as_f64().unwrap(), check["tolerance"].as_f64().unwrap());
            if (a - e).abs() > tol {
                failures.push(format!("{name}: {pointer} = {a}, expected {e} +- {tol}"));
            }
        }
    }
    failures
}

#[test]
fn golden_reports() {
    let mut files: Vec<PathBuf> = fs::read_dir(golden_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let failures: Vec<String> = files.iter().flat_map(|f| check_golden(f)).collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn every_scenario_has_a_golden_file() {
    let covered: Vec<String> = fs::read_dir(golden_dir())
        .unwrap()
        .map(|e| {
            let g: Value = serde_json::from_str(&fs::read_to_string(e.unwrap().path()).unwrap()).unwrap();
            let args = g["args"].as_array().unwrap();
            args.iter()
                .position(|a| a == "--scenario")
                .map_or("custom".to_string(), |i| args[i + 1].as_str().unwrap().to_string())
        })
        .collect();
    for s in SCENARIOS {
        assert!(covered.iter().any(|c| c == s), "no golden file runs scenario {s}");
    }
}

#[test]
fn identical_config_and_seed_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{"scenario": "aklz-demo", "trials": 20000, "seed": 11, "model_class": null,
            "geometry": {"path_difference_ns": 40, "modulator_to_detector_ns": 15, "setting_switch_period_ns": 10}}"#,
    )
    .unwrap();
    let config = config.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["report", "--config", config], &a).status.success());
    assert!(run(&["report", "--config", config], &b).status.success());
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n:?} differs");
    }
    let c = dir.path().join("c");
    assert!(run(&["report", "--config", config, "--seed", "12"], &c).status.success());
    assert_ne!(fs::read(a.join("report.json")).unwrap(), fs::read(c.join("report.json")).unwrap());

    let rep = report(&a);
    assert_eq!(rep["geometry"]["premise"]["margin_ns"], 15.0);
    assert_eq!(rep["simulation"]["verdicts"][1]["model_class"]["class"], "delays");
    assert!(rep["simulation"]["efficiency"]["entries"].as_array().unwrap().len() == 4);
}

#[test]
fn csv_outputs_have_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["simulate", "--terms", "6", "--trials", "2000"], dir.path()).status.success());
    let table = fs::read_to_string(dir.path().join("correlations.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("term,setting1,setting2,estimate,std_error,count"));
    assert_eq!(lines.count(), 6);
    let plot = fs::read_to_string(dir.path().join("plot_correlations.csv")).unwrap();
    assert!(plot.starts_with("x,y,yerr\n"));
    assert!(!table.contains("-0.0,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let code = |o: Output| o.status.code();

    assert_eq!(code(run(&["simulate", "--terms", "5"], out)), Some(2));
    assert_eq!(code(run(&["simulate", "--scenario", "table2"], out)), Some(2));
    assert_eq!(code(run(&["simulate", "--visibility", "1.5"], out)), Some(2));
    assert_eq!(code(run(&["bounds", "--model-class", "delays"], out)), Some(2));
    assert_eq!(code(run(&["geometry"], out)), Some(2));
    assert_eq!(code(run(&["verify-bounds", "--model-class", "delays", "--eta", "0.9"], out)), Some(2));

    let bad = out.join("bad.json");
    fs::write(&bad, r#"{"trails": 10}"#).unwrap();
    assert_eq!(code(run(&["simulate", "--config", bad.to_str().unwrap()], out)), Some(2));
    fs::write(&bad, "not json").unwrap();
    assert_eq!(code(run(&["simulate", "--config", bad.to_str().unwrap()], out)), Some(2));

    let limited = out.join("limited.json");
    fs::write(&limited, r#"{"model_class": "plain-local-realism", "terms": 8, "search": {"vertex_limit": 100}}"#).unwrap();
    let o = run(&["verify-bounds", "--config", limited.to_str().unwrap()], out);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    // a violation of a bound is a result, not a failure
    assert_eq!(code(run(&["simulate", "--trials", "1000", "--model-class", "plain-local-realism"], out)), Some(0));
}
