use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intermittency-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("INTERMITTENCY_LAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn observe_free_e0_writes_csv_and_clips_at_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["observe", "--operator", "free", "--size", "1024", "--xi", "e0", "--A", "proj:e0", "--t-decades", "1:3"];
    let o = lab(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,value,quantity,operator_hash,xi_label"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows[0].0, 10.0);
    // 0.8 (1024 - 0) / 2
    assert!((rows.last().unwrap().0 - 409.6).abs() < 1e-9);
    // ⟨|P_0|⟩_t for free hopping decays roughly like ln t / t
    assert!(rows.windows(2).all(|w| w[1].1 < w[0].1));

    let mut with_out = args.to_vec();
    with_out.extend(["--out", "obs"]);
    assert_eq!(lab(dir.path(), &with_out).status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("obs/series.csv")).unwrap(), csv);
    let meta = json(&dir.path().join("obs/run.json"));
    assert_eq!(meta["clipped"], Value::Bool(true));
    assert_eq!(meta["horizon"].as_f64(), Some(409.6));
}

#[test]
fn missing_flag_is_a_validation_error_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(
        dir.path(),
        &["observe", "--operator", "free", "--xi", "e0", "--A", "proj:e0", "--t-decades", "0:1", "--out", "o"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--size"));
    assert!(o.stdout.is_empty());
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_subcommand_and_bad_values_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lab(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(lab(dir.path(), &["forge", "--kind", "sideways", "--size", "4"]).status.code(), Some(2));
    assert_eq!(lab(dir.path(), &["forge", "--kind", "free", "--size", "-3"]).status.code(), Some(2));
    assert_eq!(lab(dir.path(), &["experiment", "--name", "nope"]).status.code(), Some(2));
    assert_eq!(lab(dir.path(), &["--threads", "0", "report", "."]).status.code(), Some(2));
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"operator": "free", "size": 32, "xi": "e0", "A": "proj:e0", "t-decades": "0:1"}"#,
    )
    .unwrap();
    let from_file = lab(dir.path(), &["observe", "--config", "c.json"]);
    assert_eq!(from_file.status.code(), Some(0));
    let overridden = lab(dir.path(), &["observe", "--config", "c.json", "--size", "48"]);
    assert_eq!(overridden.status.code(), Some(0));
    let direct = lab(
        dir.path(),
        &["observe", "--operator", "free", "--size", "48", "--xi", "e0", "--A", "proj:e0", "--t-decades", "0:1"],
    );
    assert_eq!(stdout(&overridden), stdout(&direct));
    assert_ne!(stdout(&overridden), stdout(&from_file));

    fs::write(dir.path().join("bad.json"), r#"{"size": 32, "colour": "blue"}"#).unwrap();
    let o = lab(dir.path(), &["observe", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["observe", "--operator", "anderson", "--size", "200", "--disorder", "2", "--seed", "5", "--xi", "e0", "--A", "rank:3:4", "--t-decades", "0:1.5"];
    let one = lab(dir.path(), &[&["--threads", "1"][..], &args].concat());
    let three = Command::new(env!("CARGO_BIN_EXE_intermittency-lab"))
        .args(args)
        .current_dir(dir.path())
        .env("INTERMITTENCY_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(three.status.code(), Some(0));
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn forge_then_evolve_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["forge", "--kind", "anderson", "--size", "16", "--disorder", "2", "--seed", "9", "--out", "ops/a.json"]);
    assert_eq!(o.status.code(), Some(0));
    let op = json(&dir.path().join("ops/a.json"));
    assert_eq!(op["kind"], "jacobi");
    assert_eq!(op["potential"].as_array().unwrap().len(), 33);
    assert_eq!(op["provenance"]["seed"], 9);

    let o = lab(dir.path(), &["evolve", "--operator", "ops/a.json", "--xi", "e0", "--t", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let total: f64 = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-10);

    // 0.8 (16 - 0) / 2 = 6.4
    let o = lab(dir.path(), &["evolve", "--operator", "ops/a.json", "--xi", "e0", "--t", "7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exponents_from_an_observed_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(
        dir.path(),
        &["observe", "--operator", "free", "--size", "2048", "--xi", "e0", "--quantity", "return-prob", "--t-decades", "1:2.6", "--out", "rp"],
    );
    assert_eq!(o.status.code(), Some(0));
    let o = lab(
        dir.path(),
        &["exponents", "--estimator", "d2", "--series", "rp/series.csv", "--log-correction", "--out", "ex"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ests = json(&dir.path().join("ex/estimates.json"));
    assert_eq!(ests.as_array().unwrap().len(), 2);
    for e in ests.as_array().unwrap() {
        let (lo, hi) = (e["lower"].as_f64().unwrap(), e["upper"].as_f64().unwrap());
        assert!(lo >= 0.85 && hi <= 1.05, "{lo} {hi}");
    }
    assert!(dir.path().join("ex/slopes_w0.5.csv").exists());

    // beta needs a moment series
    let o = lab(dir.path(), &["exponents", "--estimator", "beta", "--series", "rp/series.csv"]);
    assert_eq!(o.status.code(), Some(2));

    let o = lab(dir.path(), &["exponents", "--estimator", "alpha", "--alpha", "power:1", "--series", "rp/series.csv"]);
    assert_eq!(o.status.code(), Some(0));
    let scan: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(scan["sup_value"].as_f64().unwrap() > 0.0);
}

#[test]
fn experiment_records_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["experiment", "--name", "eigenweight", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let path = dir.path().join(stdout(&o).trim());
    assert!(path.starts_with(dir.path().join("runs/eigenweight")));
    let first = json(&path);
    assert_eq!(first["verdict"], "pass");

    let o = lab(dir.path(), &["experiment", "--name", "eigenweight", "--seed", "1"]);
    assert_eq!(dir.path().join(stdout(&o).trim()), path);
    let mut second = json(&path);
    second["wall_time_s"] = first["wall_time_s"].clone();
    assert_eq!(first, second);
}

#[test]
fn inconclusive_experiment_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("rage.json"), r#"{"half_width": 64}"#).unwrap();
    let o = lab(dir.path(), &["experiment", "--name", "rage", "--config", "rage.json", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    fs::write(dir.path().join("typo.json"), r#"{"half_widht": 64}"#).unwrap();
    let o = lab(dir.path(), &["experiment", "--name", "rage", "--config", "typo.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_sorts_and_flags_corruption() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("empty")).unwrap();
    let o = lab(dir.path(), &["report", "empty"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());

    for seed in ["1", "2"] {
        let o = lab(dir.path(), &["experiment", "--name", "eigenweight", "--seed", seed]);
        assert_eq!(o.status.code(), Some(0));
    }
    let o = lab(dir.path(), &["report"]);
    assert_eq!(o.status.code(), Some(0));
    let table = stdout(&o);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0] < lines[1]);
    assert!(lines.iter().all(|l| l.contains("eigenweight") && l.contains("pass")));

    let victim = fs::read_dir(dir.path().join("runs/eigenweight"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "json"))
        .unwrap();
    let text = fs::read_to_string(&victim).unwrap().replace("\"pass\"", "\"fail\"");
    fs::write(&victim, text).unwrap();
    let o = lab(dir.path(), &["report"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("corrupt"));
}
