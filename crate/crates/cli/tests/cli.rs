use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neural-pulse"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_schema(doc: &Value, name: &str) {
    let schema_path = repo_root().join("schemas").join(format!("{name}.schema.json"));
    let schema = read_json(&schema_path);
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    if let Err(errors) = compiled.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{name}.json violates its schema: {msgs:?}");
    };
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const EXP: &str = r#"{"kernel": {"type": "exponential", "rho": 1.0}, "theta": 0.25, "gamma": 0.2, "epsilon": 0.005}"#;

#[test]
fn front_reports_closed_form_speed() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["front"], &write_config(tmp.path(), EXP), &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&out.join("front.json"));
    assert_schema(&doc, "front");
    assert!((doc["c_f"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
    assert!(doc["phi_prime"].as_f64().unwrap() < 0.0);
    assert_eq!(doc["evans_sign_consistent"], Value::Bool(true));

    let (header, rows) = csv_rows(&out.join("front_profile.csv"));
    assert_eq!(header, ["z", "U_f", "U_f_prime"]);
    assert_eq!(rows.len(), 1001);
    // 17 significant digits in scientific notation.
    let mantissa = rows[1][1].split('e').next().unwrap();
    assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17);
    let mid: Vec<f64> = rows[500].iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(mid[0], 0.0);
    assert!((mid[1] - 0.25).abs() < 1e-10);
}

#[test]
fn hypothesis_violation_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"kernel": {"type": "exponential", "rho": 1.0}, "theta": 0.6, "gamma": 0.2}"#,
    );
    let o = run(&["front"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("hypothesis"), "{}", stderr(&o));
}

#[test]
fn malformed_config_and_numerical_failure_have_distinct_codes() {
    let tmp = TempDir::new().unwrap();
    let missing = write_config(tmp.path(), r#"{"theta": 0.25, "gamma": 0.2}"#);
    let o = run(&["front"], &missing, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kernel"), "{}", stderr(&o));

    // One Newton step cannot reach the residual tolerance.
    let starved = write_config(
        tmp.path(),
        r#"{"kernel": {"type": "exponential", "rho": 1.0}, "theta": 0.25, "gamma": 0.2,
            "epsilon": 0.04, "solver": {"max_iter": 1, "tol": 1e-12}}"#,
    );
    let o = run(&["pulse"], &starved, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = Command::new(env!("CARGO_BIN_EXE_neural-pulse")).arg("front").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_neural-pulse")).arg("bogus").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pulse_summary_and_profile() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["pulse"], &write_config(tmp.path(), EXP), &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&out.join("pulse.json"));
    assert_schema(&doc, "pulse");
    let c = doc["c"].as_f64().unwrap();
    let a = doc["a"].as_f64().unwrap();
    let tau = doc["tau"].as_f64().unwrap();
    assert!((c - 0.995).abs() < 5e-4);
    assert!((a * 0.005 - tau).abs() < 1e-12);
    assert!(doc["residual"].as_f64().unwrap() <= 1e-10);
    assert!(doc["det_J_estimate"].as_f64().unwrap() < 0.0);

    let (header, rows) = csv_rows(&out.join("pulse_profile.csv"));
    assert_eq!(header, ["z", "U", "Q", "U_prime", "Q_prime"]);
    assert_eq!(rows.len(), 1001);
    let first: Vec<f64> = rows[0].iter().map(|s| s.parse().unwrap()).collect();
    let last: Vec<f64> = rows[1000].iter().map(|s| s.parse().unwrap()).collect();
    assert!(first[1].abs() <= 1e-8 && last[1].abs() <= 1e-8 && last[2].abs() <= 1e-8);
}

#[test]
fn asymptotics_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        r#"{"kernel": {"type": "exponential", "rho": 1.0}, "theta": 0.25, "gamma": 0.2, "epsilon": [0.01, 0.005]}"#,
    );
    let o = run(&["asymptotics", "--format", "json"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&out.join("asymptotics.json"));
    assert_schema(&doc, "asymptotics");
    assert!((doc["c_prime0"].as_f64().unwrap() + 1.0).abs() <= 1e-9);
    assert!(doc["det_J"].as_f64().unwrap() < 0.0);
    let tau0 = -(0.4f64).ln() / 1.2;
    assert!((doc["tau0"].as_f64().unwrap() - tau0).abs() <= 1e-12);
    let preds = doc["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 2);
    assert!((preds[0]["c"].as_f64().unwrap() - 0.99).abs() < 1e-9);
    // --format json suppresses CSV output.
    assert!(!out.join("predictions.csv").exists());
}

#[test]
fn verify_oscillatory_kernel_finds_two_crossings() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["verify"], &repo_root().join("configs/oscillatory.json"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&out.join("verify.json"));
    assert_schema(&doc, "verify");
    assert_eq!(doc["crossings"], 2);
    assert_eq!(doc["passed"], Value::Bool(true));
    let pts = doc["crossing_points"].as_array().unwrap();
    assert_eq!(pts[0]["direction"], "up");
    assert_eq!(pts[1]["direction"], "down");

    let (header, rows) = csv_rows(&out.join("orbit.csv"));
    assert_eq!(header, ["z", "U", "Q"]);
    assert!(rows.len() > 100);
    let (header, rows) = csv_rows(&out.join("singular_orbit.csv"));
    assert_eq!(header, ["segment", "U", "Q"]);
    for seg in ["front", "right_manifold", "back", "left_manifold"] {
        assert!(rows.iter().any(|r| r[0] == seg));
    }
}

#[test]
fn failed_verification_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"kernel": {"type": "exponential", "rho": 1.0}, "theta": 0.25, "gamma": 0.2, "epsilon": 0.02,
            "verification": {"hausdorff_bound": 1e-6}}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["verify", "--format", "json"], &cfg, &out);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let doc = read_json(&out.join("verify.json"));
    assert_schema(&doc, "verify");
    assert_eq!(doc["passed"], Value::Bool(false));
    assert_eq!(doc["crossings"], 2);
}

#[test]
fn sweep_table_is_ordered_and_converges() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"kernel": {"type": "exponential", "rho": 1.0}, "theta": 0.25, "gamma": 0.2,
            "epsilon": [0.005, 0.04, 0.01, 0.02]}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["sweep", "--workers", "2"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&out.join("sweep.json"));
    assert_schema(&doc, "sweep");
    let rows = doc["rows"].as_array().unwrap();
    let eps: Vec<f64> = rows.iter().map(|r| r["epsilon"].as_f64().unwrap()).collect();
    assert_eq!(eps, [0.04, 0.02, 0.01, 0.005]);
    let dh: Vec<f64> = rows.iter().map(|r| r["d_H"].as_f64().unwrap()).collect();
    assert!(dh.windows(2).all(|w| w[1] < w[0]), "{dh:?}");
    assert_eq!(doc["hausdorff_decreasing"], Value::Bool(true));
    assert!(rows.iter().all(|r| r["crossings"] == 2 && r["error"].is_null()));

    let (header, table) = csv_rows(&out.join("sweep.csv"));
    assert_eq!(
        header,
        [
            "epsilon",
            "tau",
            "c",
            "a",
            "d_H",
            "crossings",
            "first_order_error_tau",
            "first_order_error_c",
            "passed",
            "error"
        ]
    );
    assert_eq!(table.len(), 4);
    let err_c: Vec<f64> = table.iter().map(|r| r[7].parse().unwrap()).collect();
    assert!(err_c.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn sweep_records_per_epsilon_failures() {
    let tmp = TempDir::new().unwrap();
    // 0.2 is outside the solver's epsilon range.
    let cfg = write_config(
        tmp.path(),
        r#"{"kernel": {"type": "exponential", "rho": 1.0}, "theta": 0.25, "gamma": 0.2, "epsilon": [0.2, 0.02]}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["sweep", "--format", "json", "--workers", "1"], &cfg, &out);
    assert_eq!(o.status.code(), Some(3));
    let doc = read_json(&out.join("sweep.json"));
    assert_schema(&doc, "sweep");
    let rows = doc["rows"].as_array().unwrap();
    assert!(rows[0]["error"].as_str().unwrap().contains("epsilon"));
    assert_eq!(rows[1]["passed"], Value::Bool(true));
    assert_eq!(doc["all_passed"], Value::Bool(false));
}

#[test]
fn simulate_front_matches_front_speed() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"kernel": {"type": "exponential", "rho": 1.0}, "theta": 0.25, "gamma": 0.2, "epsilon": 0.0,
        "simulation": {"half_length": 40.0, "n_points": 1601, "dt": 0.0125, "t_end": 40.0, "tracking_start": 15.0}}"#;
    let out = tmp.path().join("out");
    let o = run(&["simulate"], &write_config(tmp.path(), cfg), &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&out.join("simulate.json"));
    assert_schema(&doc, "simulate");
    assert!(doc["speed_error"].as_f64().unwrap() <= 0.02);
    assert!(doc["measured_width"].is_null());
    let (header, rows) = csv_rows(&out.join("track.csv"));
    assert_eq!(header, ["t", "front_position", "back_position"]);
    assert!(!rows.is_empty());
    let (header, rows) = csv_rows(&out.join("final_profile.csv"));
    assert_eq!(header, ["x", "u", "q"]);
    assert_eq!(rows.len(), 1601);

    // The same run against an impossible tolerance is a check failure.
    let strict = cfg.replace("\"tracking_start\": 15.0}", "\"tracking_start\": 15.0, \"speed_tol\": 1e-12}");
    let o = run(&["simulate", "--format", "json"], &write_config(tmp.path(), &strict), &out);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn simulate_needs_a_simulation_section() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["simulate"], &write_config(tmp.path(), EXP), &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("simulation"));
}

#[test]
fn table_kernel_path_is_relative_to_config() {
    let tmp = TempDir::new().unwrap();
    let mut table = String::from("x,K\n");
    for i in 0..=400 {
        let x = -20.0 + 0.1 * i as f64;
        table.push_str(&format!("{x},{}\n", 0.5 * (-x.abs()).exp()));
    }
    // The spline overshoots the cusp at 0, so the envelope gets some room.
    fs::create_dir(tmp.path().join("data")).unwrap();
    fs::write(tmp.path().join("data/k.csv"), table).unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"kernel": {"type": "table", "path": "data/k.csv", "tail_alpha": 0.6, "tail_rho": 1.0},
            "theta": 0.25, "gamma": 0.2}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["front", "--format", "json"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&out.join("front.json"));
    // Spline smoothing of the cusp shifts the speed by O(h).
    assert!((doc["c_f"].as_f64().unwrap() - 1.0).abs() < 5e-3);
}
