use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn simcal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simcal"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn simulate_mm1_writes_rows_and_metadata() {
    let dir = TempDir::new().unwrap();
    let args = [
        "simulate", "--model", "mm1", "--lambda", "0.5", "--mu", "1", "--reps", "100", "--seed", "7", "-o", "out.csv",
    ];
    let out = simcal(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("out.csv"));
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[0], vec!["sojourn_mean"]);
    let first: Vec<f64> = rows[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(first.iter().all(|v| *v > 0.0));

    let meta = json_file(&dir.path().join("out.csv.meta.json"));
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);

    let before = fs::read(dir.path().join("out.csv")).unwrap();
    let meta_before = fs::read(dir.path().join("out.csv.meta.json")).unwrap();
    assert_eq!(code(&simcal(dir.path(), &args)), 0);
    assert_eq!(before, fs::read(dir.path().join("out.csv")).unwrap());
    assert_eq!(meta_before, fs::read(dir.path().join("out.csv.meta.json")).unwrap());
}

#[test]
fn simulate_market_rows_have_1799_returns() {
    let dir = TempDir::new().unwrap();
    let out = simcal(dir.path(), &["simulate", "--model", "market", "--reps", "3", "-o", "m.csv"]);
    assert_eq!(code(&out), 0);
    let rows = csv_rows(&dir.path().join("m.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.len() == 1799));
    assert_eq!(rows[0][0], "r_1");
    for field in &rows[1] {
        let v: f64 = field.parse().unwrap();
        // Shortest round-trip formatting.
        assert_eq!(format!("{v:?}"), *field);
    }
}

#[test]
fn bad_alpha_is_rejected_everywhere() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["simulate", "--model", "mm1", "-o", "x.csv", "--alpha", "1.5"][..],
        &["calibrate", "--alpha", "1.5"],
        &["typeerror", "--alpha", "1.5"],
        &["bounds", "--gap", "0.5", "--eps1", "0.1", "--eps2", "0.1", "--alpha", "1.5"],
        &["realism", "--alpha", "0"],
        &["extract", "-i", "a.csv", "-o", "b.csv", "--alpha", "-1"],
    ] {
        let out = simcal(dir.path(), args);
        assert_eq!(code(&out), 2, "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn invalid_parameters_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = simcal(dir.path(), &["simulate", "--model", "mm1", "--mu", "-1", "-o", "x.csv"]);
    assert_eq!(code(&out), 2);
    let out = simcal(dir.path(), &["simulate", "--model", "nope", "-o", "x.csv"]);
    assert_eq!(code(&out), 2);
    let out = simcal(dir.path(), &["calibrate", "--m", "0"]);
    assert_eq!(code(&out), 2);
    let out = simcal(dir.path(), &["calibrate", "--real-data", "missing.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = TempDir::new().unwrap();
    let out = simcal(dir.path(), &["simulate", "--model", "mm1", "-o", "no/such/dir/x.csv"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn calibrate_mm1_sweep() {
    let dir = TempDir::new().unwrap();
    let args = ["calibrate", "--m", "1000", "--n", "100", "--big-n", "100", "--seed", "3", "-o", "d.csv"];
    let out = simcal(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("d.csv"));
    assert_eq!(
        rows[0],
        vec!["id", "theta_1", "theta_2", "statistic", "threshold", "eligible", "error_flag"]
    );
    assert_eq!(rows.len(), 1001);
    for r in &rows[1..] {
        let stat: f64 = r[3].parse().unwrap();
        let thr: f64 = r[4].parse().unwrap();
        assert_eq!(r[5] == "1", stat <= thr);
        assert_eq!(r[6], "0");
    }
    let summary = json_file(&dir.path().join("d.csv.summary.json"));
    assert_eq!(summary["m"], 1000);
    assert_eq!(summary["alpha"], 0.05);
    assert_eq!(summary["mode"], "two_sample");
    assert_eq!(summary["seed"], 3);
    let eligible = rows[1..].iter().filter(|r| r[5] == "1").count();
    assert_eq!(summary["eligible"], eligible);
    assert!(eligible > 0);
    assert!(dir.path().join("d.csv.meta.json").is_file());

    let first = fs::read(dir.path().join("d.csv")).unwrap();
    let again = simcal(dir.path(), &[&["--threads", "1"][..], &args].concat());
    assert_eq!(code(&again), 0);
    assert_eq!(first, fs::read(dir.path().join("d.csv")).unwrap());
}

#[test]
fn calibrate_from_config_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let config = r#"{
        "model": {"model": "gg1", "k": 1, "theta": 1, "mu": -2, "sigma": 2},
        "free": ["k", "theta"],
        "space": [{"name": "k", "lower": 0, "upper": 5}, {"name": "theta", "lower": 0, "upper": 5}],
        "m": 50, "n": 200, "N": 200, "alpha": 0.05,
        "candidates": "grid",
        "aggregation": {"method": "ssmd"},
        "seed": 11,
        "output": "g.csv"
    }"#;
    fs::write(dir.path().join("run.json"), config).unwrap();
    // 50 is not a perfect square.
    assert_eq!(code(&simcal(dir.path(), &["calibrate", "--config", "run.json"])), 2);
    let out = simcal(dir.path(), &["calibrate", "--config", "run.json", "--m", "49"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("g.csv"));
    assert_eq!(rows.len(), 50);
    assert_eq!(rows[1][1], "0.625");
    let summary = json_file(&dir.path().join("g.csv.summary.json"));
    assert_eq!(summary["aggregation"]["method"], "ssmd");
    assert_eq!(summary["mode"], Value::Null);
}

#[test]
fn empty_eligibility_set_is_a_valid_outcome() {
    let dir = TempDir::new().unwrap();
    let mut real = String::from("sojourn_mean\n");
    for _ in 0..50 {
        real.push_str("1000\n");
    }
    fs::write(dir.path().join("real.csv"), real).unwrap();
    let out = simcal(dir.path(), &["calibrate", "--m", "20", "--real-data", "real.csv", "-o", "e.csv"]);
    assert_eq!(code(&out), 0);
    let summary = json_file(&dir.path().join("e.csv.summary.json"));
    assert_eq!(summary["empty"], true);
    assert_eq!(summary["eligible"], 0);
    assert_eq!(summary["N"], 50);
    assert_eq!(summary["eligible_hull"], Value::Null);

    fs::write(dir.path().join("psi.csv"), "id,psi\n0,1.0\n").unwrap();
    let out = simcal(dir.path(), &["bounds", "--decisions", "e.csv", "--psi", "psi.csv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["empty"], true);
}

#[test]
fn mostly_failing_simulator_exits_4() {
    let dir = TempDir::new().unwrap();
    // Lognormal services with sigma in the hundreds overflow to infinity.
    let config = r#"{
        "model": {"model": "gg1", "k": 1, "theta": 1, "mu": 0, "sigma": 2},
        "free": ["sigma"],
        "truth": [2.0],
        "space": [{"name": "sigma", "lower": 500, "upper": 1000}],
        "m": 20, "n": 50, "N": 50
    }"#;
    fs::write(dir.path().join("bad.json"), config).unwrap();
    let out = simcal(dir.path(), &["calibrate", "--config", "bad.json", "-o", "f.csv"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed"));
    let rows = csv_rows(&dir.path().join("f.csv"));
    assert!(rows[1..].iter().all(|r| r[4] == "0"));
    assert!(rows[1..].iter().filter(|r| r[5] == "1").count() > 10);
}

#[test]
fn typeerror_reports() {
    let dir = TempDir::new().unwrap();
    let out = simcal(dir.path(), &["typeerror", "--reps", "1"]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["se"], Value::Null);
    assert_eq!(report["reps"], 1);

    let out = simcal(dir.path(), &["typeerror", "--reps", "500", "--seed", "4", "-o", "t.json"]);
    assert_eq!(code(&out), 0);
    let report = json_file(&dir.path().join("t.json"));
    let rate = report["rate"].as_f64().unwrap();
    assert!((0.0..=0.07).contains(&rate), "{rate}");
    assert!(report["se"].as_f64().unwrap() > 0.0);
    assert!(report["mean_q_minus_statistic"].as_f64().unwrap() > 0.0);
}

#[test]
fn bounds_values() {
    let dir = TempDir::new().unwrap();
    let out = simcal(
        dir.path(),
        &["bounds", "--n", "1000", "--big-n", "1000", "--m", "1", "--eps1", "0.1", "--eps2", "0.1", "--gap", "0.5"],
    );
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["min_real_data_size"], 21);
    let b = v["type2_bound"].as_f64().unwrap();
    assert!((8.2e-9..=8.3e-9).contains(&b));
    assert_eq!(code(&simcal(dir.path(), &["bounds"])), 2);
}

#[test]
fn robust_bounds_from_decisions() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("d.csv"),
        "id,theta_1,statistic,threshold,eligible,error_flag\n0,0.5,0.1,0.2,1,0\n1,1.0,0.3,0.2,0,0\n2,1.5,0.05,0.2,1,0\n",
    )
    .unwrap();
    fs::write(dir.path().join("psi.csv"), "id,psi\n0,2.0\n1,10.0\n2,3.5\n").unwrap();
    let out = simcal(dir.path(), &["bounds", "--decisions", "d.csv", "--psi", "psi.csv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["ro_bounds"], serde_json::json!([2.0, 3.5]));

    fs::write(dir.path().join("short.csv"), "id,psi\n0,2.0\n").unwrap();
    let out = simcal(dir.path(), &["bounds", "--decisions", "d.csv", "--psi", "short.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn extract_with_summary_and_neural_weights() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("x.csv"), "a,b,c,d\n1,2,3,4\n0,0,1,1\n").unwrap();
    let weights = r#"{"input_dim": 4, "output_dim": 2, "layers": [
        {"type": "conv1d", "weights": [[[1, 1]]], "bias": [0], "activation": "linear",
         "kernel": 2, "stride": 2, "in_channels": 1, "out_channels": 1}
    ]}"#;
    fs::write(dir.path().join("w.json"), weights).unwrap();
    let out = simcal(dir.path(), &["extract", "-i", "x.csv", "--extractor", "w.json", "-o", "f.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("f.csv"));
    assert_eq!(rows, vec![vec!["f_1", "f_2"], vec!["3.0", "7.0"], vec!["0.0", "2.0"]]);

    fs::write(dir.path().join("bad.json"), r#"{"input_dim": 4, "output_dim": 2, "layers": []}"#).unwrap();
    let out = simcal(dir.path(), &["extract", "-i", "x.csv", "--extractor", "bad.json", "-o", "g.csv"]);
    assert_eq!(code(&out), 2);

    fs::write(dir.path().join("nan.csv"), "a,b\n1,x\n").unwrap();
    let out = simcal(dir.path(), &["extract", "-i", "nan.csv", "-o", "h.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn realism_report_from_simulation() {
    let dir = TempDir::new().unwrap();
    let out = simcal(dir.path(), &["realism", "--reps", "4", "--seed", "1", "-o", "r.json"]);
    assert_eq!(code(&out), 0);
    let v = json_file(&dir.path().join("r.json"));
    assert_eq!(v["runs"], 4);
    let report = &v["reports"][0];
    assert_eq!(report["one_second_returns"], 1799);
    assert_eq!(report["minutely_returns"], 29);
    assert_eq!(report["squared_return_autocorr"].as_array().unwrap().len(), 10);
    assert!(v["median_abs_return_autocorr"]["20"].is_number());
}
