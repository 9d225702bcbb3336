use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn spinfade(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_spinfade"))
        .args(args)
        .env_remove("SPINFADE_THREADS")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn diagnostic(o: &Output) -> Value {
    serde_json::from_slice(o.stderr.trim_ascii()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_owned()
}

#[test]
fn homogeneous_overlap_is_kronecker_delta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "overlap", "n_atoms": 6, "two_m": 0, "two_m_prime": 2,
        "distribution": {"mean": [0.4, 0.2, 1.0]}, "grid": {"t_max": 5, "points": 9}}"#;
    let o = spinfade(&["overlap", "--out", &out_arg(dir.path())], cfg);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("overlap.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 10);
    for row in &lines[1..] {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[3] < 1e-24, "{row}");
    }

    let diag = r#"{"command": "overlap", "n_atoms": 6, "distribution": {"mean": [0.4, 0.2, 1.0]},
        "grid": {"t_max": 5, "points": 9}}"#;
    let o = spinfade(&["overlap", "--out", &out_arg(dir.path())], diag);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("overlap.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[3] - 1.0).abs() < 1e-12, "{row}");
    }
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("overlap.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["engine"], "general");
    assert_eq!(m["labels"]["two_j"], 6);
    assert_eq!(m["config"]["draws"], 16);
    assert_eq!(m["config"]["engine"], "auto");
}

#[test]
fn identical_configs_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "overlap", "n_atoms": 40, "two_m": 4,
        "distribution": {"mean": [0, 0, 1], "sigma": [0, 0, 0.05]}, "seed": 11}"#;
    for d in [&a, &b] {
        let o = spinfade(&["overlap", "--out", &out_arg(d.path()), "--threads", "3"], cfg);
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir, f: &str| fs::read_to_string(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "overlap.csv"), read(&b, "overlap.csv"));
    let strip = |s: String| -> Value {
        let mut v: Value = serde_json::from_str(&s).unwrap();
        v.as_object_mut().unwrap().remove("created_at");
        v
    };
    assert_eq!(strip(read(&a, "overlap.manifest.json")), strip(read(&b, "overlap.manifest.json")));
}

#[test]
fn seed_flag_overrides_config_and_changes_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "sample", "n_atoms": 5, "distribution": {"sigma": [0.1, 0.1, 0.1]}, "seed": 1}"#;
    let hash = |seed: &str| {
        let o = spinfade(&["sample", "--out", &out_arg(dir.path()), "--seed", seed], cfg);
        assert_eq!(o.status.code(), Some(0));
        let m: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("sample.manifest.json")).unwrap()).unwrap();
        assert_eq!(m["seed"].as_u64().unwrap(), seed.parse::<u64>().unwrap());
        m["hash"].as_str().unwrap().to_owned()
    };
    let h1 = hash("7");
    assert_eq!(h1, hash("7"));
    assert_ne!(h1, hash("8"));
}

#[test]
fn oracle_beyond_limit_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinfade(
        &["overlap", "--engine", "oracle", "--out", &out_arg(dir.path())],
        r#"{"command": "overlap", "n_atoms": 30}"#,
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(diagnostic(&o)["error"], "resource-limit");
    assert!(!dir.path().join("overlap.csv").exists());
}

#[test]
fn validation_errors_exit_2_with_json() {
    let o = spinfade(&["overlap"], "{\"command\": \"overlap\",\n \"n_atoms\": }");
    assert_eq!(o.status.code(), Some(2));
    let d = diagnostic(&o);
    assert_eq!(d["error"], "config-syntax");
    assert_eq!(d["line"], 2);

    let o = spinfade(
        &["overlap"],
        r#"{"command": "overlap", "n_atoms": 4, "engine": "dephasing", "distribution": {"sigma": [0.1, 0, 0]}}"#,
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(diagnostic(&o)["key"], "engine");

    let o = spinfade(&["overlap"], r#"{"command": "overlap", "n_atoms": 4, "colour": 1}"#);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(diagnostic(&o)["key"], "colour");

    let o = spinfade(&["sample"], r#"{"command": "overlap", "n_atoms": 4}"#);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(diagnostic(&o)["key"], "command");
}

#[test]
fn edge_label_half_life_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "halflife", "n_atoms": 20, "two_m": 20, "draws": 2,
        "distribution": {"sigma": [0, 0, 0.01]}, "grid": {"points": 64}}"#;
    let o = spinfade(&["halflife", "--out", &out_arg(dir.path())], cfg);
    assert_eq!(o.status.code(), Some(4));
    let d = diagnostic(&o);
    assert_eq!(d["error"], "not-found");
    assert!(d["searched_to"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_config_file_exits_1() {
    let o = spinfade(&["overlap", "--config", "/nonexistent/spinfade.json"], "");
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(diagnostic(&o)["error"], "io");
}

#[test]
fn config_file_and_thread_env() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    fs::write(
        &path,
        r#"{"command": "revival", "fields": [[0,0,1],[0,0,2],[0,0,3],[0,0,4],[0,0,5],[0,0,6],[0,0,7],[0,0,8],[0,0,9],[0,0,10]],
            "two_m": 8, "grid": {"t_max": 12.566370614359172, "points": 4001}}"#,
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_spinfade"))
        .args(["revival", "--config", path.to_str().unwrap(), "--out", &out_arg(dir.path())])
        .env("SPINFADE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("revival.json")).unwrap()).unwrap();
    let times: Vec<f64> = r["events"].as_array().unwrap().iter().map(|e| e["time"].as_f64().unwrap()).collect();
    assert_eq!(times.len(), 4);
    assert!((r["period"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-6);

    let o = Command::new(env!("CARGO_BIN_EXE_spinfade"))
        .args(["revival", "--config", path.to_str().unwrap(), "--out", &out_arg(dir.path())])
        .env("SPINFADE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fit_kappa_reports_kappa_and_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "fit-kappa", "draws": 4, "grid": {"points": 512},
        "kappa": {"j_values": [20, 40, 80], "m_fractions": [0.0], "sigma_values": [1e-3, 1e-2]}}"#;
    let o = spinfade(&["fit-kappa", "--out", &out_arg(dir.path())], cfg);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit-kappa.json")).unwrap()).unwrap();
    let kappa = r["kappa"].as_f64().unwrap();
    assert!(kappa > 0.9 && kappa < 1.5, "{kappa}");
    assert_eq!(r["cells"].as_array().unwrap().len(), 6);
    let csv = fs::read_to_string(dir.path().join("fit-kappa.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("j,m,sigma,x,t_half,f"));
}

#[test]
fn leakage_and_selftest_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "leakage", "n_atoms": 8,
        "superposition": [{"two_m": 0}, {"two_m": 2, "re": 0.0, "im": 1.0}],
        "distribution": {"mean": [1, 0, 1], "sigma": [0.1, 0.1, 0.1]}, "grid": {"t_max": 3, "points": 16}}"#;
    let o = spinfade(&["leakage", "--out", &out_arg(dir.path())], cfg);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("leakage.csv")).unwrap();
    let first: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!(first[3].abs() < 1e-12);

    let o = spinfade(&["selftest", "--out", &out_arg(dir.path())], r#"{"selftest": {"ensembles": 3}}"#);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s["summary"]["passed"], true);
}
