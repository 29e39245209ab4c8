use std::path::Path;
use std::process::{Command, Output};

fn sepcross(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepcross"))
        .args(args)
        .env("SEPCROSS_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn coeffs_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = sepcross(&["coeffs", "--model", "duffing_dissipative", "--z", "0", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("coeffs.json"));
    assert_eq!(v["command"], "coeffs");
    assert!(v["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    assert_eq!(v["config"]["model"]["model"]["name"], "duffing_dissipative");
    let r = &v["result"];
    assert!((r["a"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let b = r["b"].as_array().unwrap();
    let b: Vec<f64> = b.iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((b[0] + b[1] - b[2]).abs() < 1e-6);
    assert!((b[0] - 16f64.ln()).abs() < 1e-6);
}

#[test]
fn model_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.toml");
    std::fs::write(
        &model,
        "[model]\nname = \"custom\"\nmode = \"generic\"\nz = [\"tau\"]\n\
         H = \"p^2/2 - q^2/2 + q^4/4\"\nf_p = \"-p\"\nf_q = \"0\"\nf_z = [\"1\"]\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = sepcross(&["coeffs", "--model", model.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out.join("coeffs.json"));
    assert!((v["result"]["a"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn missing_model_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let o = sepcross(&["coeffs", "--model", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert_eq!(err["error"]["path"], missing.to_str().unwrap());
}

#[test]
fn malformed_model_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("bad.toml");
    std::fs::write(&model, "[model]\nname = \"x\"\nH = \"p^2/2 - (q\"\n").unwrap();
    let o = sepcross(&["coeffs", "--model", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["path"], model.to_str().unwrap());
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(sepcross(&["coeffs"]).status.code(), Some(2));
    assert_eq!(
        sepcross(&["coeffs", "--model", "duffing_dissipative", "--z", "1,2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        sepcross(&["sweep", "--model", "duffing_dissipative", "--eps", "-1"]).status.code(),
        Some(2)
    );
}

#[test]
fn sweep_rows_and_rerun_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = sepcross(&[
            "sweep", "--model", "duffing_dissipative", "--eps", "1e-2", "--eps", "5e-3",
            "--phases", "4", "--seed", "3", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a");
    let b = run("b");
    let csv_a = std::fs::read(a.join("sweep.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("sweep.csv")).unwrap());
    let mut reader = csv::Reader::from_reader(csv_a.as_slice());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    for col in ["run_id", "eps", "phi0", "xi3", "xi_i", "target", "measured_dtau", "predicted_dtau", "valid", "error"] {
        assert!(header.iter().any(|h| h == col), "missing column {col}");
    }
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 8);
    let ids: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(ids, (0..8).collect::<Vec<_>>());
    let side = json(&a.join("sweep.json"));
    assert_eq!(side["result"]["rows"], 8);
    assert_eq!(side["result"]["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_and_predict_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = sepcross(&["simulate", "--model", "duffing_dissipative", "--eps", "1e-2", "--phi", "0.4", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("trajectory.json"));
    assert_eq!(v["result"]["trajectory"]["termination"], "CaptureRounds");
    assert!(v["result"]["crossing"]["xi3"].as_f64().is_some());

    let o = sepcross(&[
        "predict", "--model", "duffing_breathing_asym", "--z", "0.3", "--eps", "1e-3", "--xi", "0.2,0.5,0.8", "--out", out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("predict.json"));
    let rows = v["result"]["predictions"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r["two_pi_j_shift"].as_f64().is_some()));
}
