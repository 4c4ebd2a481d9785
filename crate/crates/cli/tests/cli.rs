use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn quasispec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasispec"))
        .current_dir(dir)
        .env_remove("QUASISPEC_PRECISION")
        .args(args)
        .output()
        .expect("binary runs")
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn holder_ladder_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = quasispec(
        dir.path(),
        &[
            "holder", "--potential", "amo", "--lambda", "0.5", "--alpha", "golden", "--theta", "0", "--e", "0.0",
            "--eps-min", "1e-4", "--eps-max", "1e-1", "--points", "16", "--out", "h.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("h.csv"));
    assert_eq!(rows[0], ["E", "eps", "w", "ImM"]);
    assert_eq!(rows.len(), 17);
    let m = manifest(&dir.path().join("h.manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["rows"], 16);
    assert_eq!(m["command"], "holder");
    assert_eq!(m["precision"], "extended");
    assert_eq!(m["potential"]["variant"], "amo");
    assert_eq!(m["params"]["command"]["points"], 16);
    assert!(m["alpha"]["value_decimal_string"].as_str().unwrap().starts_with("0.6180339887498948"));
    assert!(m["version"].is_string());
}

#[test]
fn subordinacy_profile_within_bracket() {
    let dir = tempfile::tempdir().unwrap();
    let out = quasispec(dir.path(), &["subordinacy", "--e", "0.0", "--k-max", "1000", "--out", "s.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("s.csv"));
    assert_eq!(
        rows[0],
        ["k", "norm_P", "det_P", "eps_k", "psi_mplus", "ratio_jl", "ratio_blabl"]
    );
    let (lo, hi) = (0.101 * 0.95, 9.899 * 1.05);
    for r in &rows[1..] {
        let ratio: f64 = r[5].parse().unwrap();
        assert!(ratio > lo && ratio < hi, "{r:?}");
    }
    assert_eq!(manifest(&dir.path().join("s.manifest.json"))["summary"]["violations"], 0);
}

#[test]
fn tx_oracle_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let out = quasispec(
        dir.path(),
        &["tx-oracle", "--k", "200", "--r", "3", "--t-hat", "0.7", "--theta", "0.11", "--alpha", "golden"],
    );
    assert_eq!(out.status.code(), Some(0));
    let m = manifest(&dir.path().join("tx-oracle.manifest.json"));
    assert!(m["summary"]["rel_error"].as_f64().unwrap() < 1e-9);
    let rows = csv_rows(&dir.path().join("tx-oracle.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], "closed");
    assert_eq!(rows[2][0], "brute");
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["holder", "--points", "8"],
        &["gaps", "--size", "500", "--points", "801"],
        &["reduce"],
    ];
    for args in runs {
        for (stem, threads) in [("a", "1"), ("b", "2")] {
            let mut full: Vec<&str> = args.to_vec();
            let out = format!("{stem}.csv");
            full.extend(["--out", &out, "--threads", threads]);
            let o = quasispec(dir.path(), &full);
            assert_eq!(o.status.code(), Some(0), "{args:?}");
        }
        let a = std::fs::read(dir.path().join("a.csv")).unwrap();
        let b = std::fs::read(dir.path().join("b.csv")).unwrap();
        assert_eq!(a, b, "{args:?}");
        let strip = |p: &str| {
            let mut m = manifest(&dir.path().join(p));
            for key in ["timestamp", "threads", "data_file", "params"] {
                m.as_object_mut().unwrap().remove(key);
            }
            m
        };
        assert_eq!(strip("a.manifest.json"), strip("b.manifest.json"));
    }
}

#[test]
fn json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    quasispec(dir.path(), &["ids", "--size", "200", "--points", "41"]);
    quasispec(dir.path(), &["ids", "--size", "200", "--points", "41", "--format", "json"]);
    let rows = csv_rows(&dir.path().join("ids.csv"));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("ids.json")).unwrap()).unwrap();
    let arr = json.as_array().unwrap();
    assert_eq!(arr.len() + 1, rows.len());
    for (r, j) in rows[1..].iter().zip(arr) {
        assert_eq!(r[0].parse::<f64>().unwrap(), j["E"].as_f64().unwrap());
        assert_eq!(r[1].parse::<f64>().unwrap(), j["N"].as_f64().unwrap());
    }
}

#[test]
fn validation_errors_exit_2_with_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = quasispec(dir.path(), &["holder", "--alpha", "0.5", "--out", "r.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let m = manifest(&dir.path().join("r.manifest.json"));
    assert_eq!(m["status"], "failed");
    assert_eq!(m["error"]["code"], "rational_detected");

    let o = quasispec(dir.path(), &["mfunction", "--e", "0", "--eps", "1e-8", "--out", "t.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(manifest(&dir.path().join("t.manifest.json"))["error"]["code"], "invalid_argument");

    let o = quasispec(dir.path(), &["holder", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = quasispec(dir.path(), &["nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tiny_eps_override() {
    let dir = tempfile::tempdir().unwrap();
    let o = quasispec(
        dir.path(),
        &["mfunction", "--potential", "amo", "--lambda", "2", "--e", "10", "--eps", "1e-8", "--allow-tiny-eps"],
    );
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn non_convergence_exits_3_with_partial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = quasispec(dir.path(), &["reduce", "--max-iter", "1", "--out", "r.csv"]);
    assert_eq!(o.status.code(), Some(3));
    let rows = csv_rows(&dir.path().join("r.csv"));
    assert_eq!(rows[0], ["iteration", "w_norm", "ratio", "residual"]);
    assert!(rows.len() > 1);
    let m = manifest(&dir.path().join("r.manifest.json"));
    assert_eq!(m["status"], "failed");
    assert_eq!(m["error"]["code"], "no_convergence");
    assert!(dir.path().join("r.B.json").exists());
}

#[test]
fn reduce_round_trips_its_conjugacy_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = quasispec(dir.path(), &["reduce", "--out", "r.csv"]);
    assert_eq!(o.status.code(), Some(0));
    let b: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.B.json")).unwrap()).unwrap();
    assert_eq!(b["band"], 0.05);
    assert_eq!(b["entries"].as_array().unwrap().len(), 4);
    let m = manifest(&dir.path().join("r.manifest.json"));
    assert_eq!(m["summary"]["converged"], true);
    assert!(m["summary"]["residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn gnuplot_stub_and_precision_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_quasispec"))
        .current_dir(dir.path())
        .env("QUASISPEC_PRECISION", "double")
        .args(["lyapunov", "--e", "-1:1:5", "--gnuplot-stub"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let gp = std::fs::read_to_string(dir.path().join("lyapunov.gp")).unwrap();
    assert!(gp.contains("'lyapunov.csv'"));
    assert_eq!(manifest(&dir.path().join("lyapunov.manifest.json"))["precision"], "double");
}

#[test]
fn potential_from_json_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("v.json"), r#"{"variant":"trigpoly","coeffs":[[1,0.5,0.0],[2,0.1,0.05]]}"#).unwrap();
    let o = quasispec(dir.path(), &["lyapunov", "--potential-json", "v.json", "--e", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(&dir.path().join("lyapunov.manifest.json"));
    assert_eq!(m["potential"]["variant"], "trigpoly");
}
