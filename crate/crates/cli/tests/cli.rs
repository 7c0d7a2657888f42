use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tcsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcsim"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn local_maxima(x: &[f64], y: &[f64]) -> Vec<f64> {
    let top = y.iter().copied().fold(0.0, f64::max);
    (1..y.len() - 1)
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > 0.1 * top)
        .map(|i| x[i])
        .collect()
}

fn spectrum_peaks(dir: &Path) -> Vec<f64> {
    let rows = read_csv(&dir.join("spectrum.csv"));
    let x: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    local_maxima(&x, &y)
}

#[test]
fn default_spectrum_shows_vacuum_rabi_splitting() {
    let dir = tempfile::tempdir().unwrap();
    let out = tcsim(dir.path(), &["spectrum"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let peaks = spectrum_peaks(dir.path());
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    // 2g at N = 1, read off the sampled grid
    assert!((peaks[1] - peaks[0] - 105.4).abs() < 0.5, "{peaks:?}");

    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("spectrum.json")).unwrap())
            .unwrap();
    assert_eq!(meta["command"], "spectrum");
    assert_eq!(meta["config"]["system"]["n_qubits"], 1);
    assert!(meta["results"]["linearity_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn empty_cavity_has_one_peak_at_the_bare_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let out = tcsim(dir.path(), &["spectrum", "--set", "system.n_qubits=0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let peaks = spectrum_peaks(dir.path());
    assert_eq!(peaks.len(), 1);
    assert!((peaks[0] - 7023.5).abs() < 0.01, "{peaks:?}");
}

fn assert_config_error(args: &[&str], config: Option<&str>) {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    if let Some(text) = config {
        let p = dir.path().join("run.json");
        std::fs::write(&p, text).unwrap();
        full.push("--config".into());
        full.push(p.to_string_lossy().into_owned());
    }
    let refs: Vec<&str> = full.iter().map(String::as_str).collect();
    let out = tcsim(&out_dir, &refs);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.exists(), "no output may be written on a config error");
}

#[test]
fn malformed_config_exits_2_without_output() {
    assert_config_error(&["spectrum"], Some("{ not json"));
    assert_config_error(&["fig1"], Some(r#"{"system": {"colour": 1}}"#));
    assert_config_error(&["spectrum", "--set", "system.kappa_mhz=-1"], None);
    assert_config_error(&["spectrum", "--set", "bath.nonsense=1"], None);
    assert_config_error(&["spectrum", "--set", "system.n_qubits=7"], None);
    assert_config_error(&["spectrum", "--config", "/nonexistent/run.json"], None);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["spectrum", "--set", "system.n_qubits=2", "--seed", "7"];
    assert!(tcsim(a.path(), &args).status.success());
    assert!(tcsim(b.path(), &[&args[..], &["--threads", "2"]].concat()).status.success());
    for f in ["spectrum.csv", "spectrum.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn fig1_table_shape_and_trends() {
    let dir = tempfile::tempdir().unwrap();
    let out = tcsim(dir.path(), &["fig1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("fig1.csv"));
    assert_eq!(rows.len(), 6);
    let mean = |mode: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r[1] == mode)
            .map(|r| r[4].parse().unwrap())
            .collect()
    };
    let (c, i) = (mean("collective"), mean("individual"));
    assert_eq!(c.len(), 3);
    assert!(c[0] > c[1] && c[1] > c[2], "{c:?}");
    assert!(i[1] > c[1] && i[2] > c[2], "{i:?} vs {c:?}");
}

#[test]
fn fig2_reports_an_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = tcsim(dir.path(), &["fig2", "--set", "sweep.detuning_steps=13"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_csv(&dir.path().join("fig2.csv")).len(), 13);
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig2.json")).unwrap())
            .unwrap();
    let p = meta["results"]["bath_exponent"]["exponent"].as_f64().unwrap();
    assert!((p + 1.0).abs() < 0.05, "{p}");
}

#[test]
fn validate_passes_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = tcsim(dir.path(), &["validate"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert!(dir.path().join("validate.json").exists());
}

#[test]
fn impossible_tolerance_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = tcsim(dir.path(), &["validate", "--set", "validation.secular_sum=1e-30"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("validate.json")).unwrap())
            .unwrap();
    let checks = meta["results"]["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["pass"] == false));
}
