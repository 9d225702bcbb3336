//! CSV series and JSON manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::ensemble::{AtomicEnsemble, GENERATOR};
use crate::error::{Error, Result};
use crate::overlap::{LeakageSeries, OverlapSeries};

/// Manifest keys left out of the content hash.
const UNHASHED: [&str; 2] = ["created_at", "hash"];

/// `{:.16e}` prints 17 significant digits, enough to round-trip any `f64`.
fn num(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").expect("write to string");
}

pub fn series_csv(series: &OverlapSeries<f64>) -> String {
    let mut out = String::from("t,re,im,abs2\n");
    for (t, v) in series.grid.times().iter().zip(&series.values) {
        num(&mut out, *t);
        out.push(',');
        num(&mut out, v.re);
        out.push(',');
        num(&mut out, v.im);
        out.push(',');
        num(&mut out, v.re * v.re + v.im * v.im);
        out.push('\n');
    }
    out
}

pub fn leakage_csv(series: &LeakageSeries<f64>) -> String {
    let mut out = String::from("t,re,im,xi\n");
    for ((t, a), xi) in series.grid.times().iter().zip(&series.amplitude).zip(&series.xi) {
        for (i, x) in [*t, a.re, a.im, *xi].into_iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            num(&mut out, x);
        }
        out.push('\n');
    }
    out
}

pub fn ensemble_csv(ensemble: &AtomicEnsemble<f64>) -> String {
    let mut out = String::from("k,bx,by,bz\n");
    for (k, f) in ensemble.fields().iter().enumerate() {
        write!(out, "{k}").expect("write to string");
        for x in f.to_array() {
            out.push(',');
            num(&mut out, x);
        }
        out.push('\n');
    }
    out
}

/// Rows of `columns` numbers as CSV.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            num(&mut out, *x);
        }
        out.push('\n');
    }
    out
}

/// Labels recorded in a manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Labels {
    pub two_j: u32,
    pub two_m: i32,
    pub two_m_prime: i32,
}

/// Everything that determines a run's outputs, plus a creation timestamp.
#[derive(Clone, Debug)]
pub struct Manifest {
    pub command: String,
    pub engine: Option<String>,
    pub labels: Option<Labels>,
    pub seed: u64,
    pub distribution: Value,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

impl Manifest {
    /// Manifest body without the timestamp or hash. Keys are sorted, so the
    /// compact rendering is canonical.
    pub fn canonical(&self) -> Value {
        let mut config = serde_json::to_value(&self.config).expect("config serializes");
        // where outputs land does not change them
        if let Value::Object(m) = &mut config {
            m.remove("out");
        }
        json!({
            "software": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "engine": self.engine,
            "labels": self.labels,
            "seed": self.seed,
            "generator": GENERATOR,
            "distribution": self.distribution,
            "config": config,
            "outputs": self.outputs,
        })
    }

    pub fn hash(&self) -> String {
        hash_value(&self.canonical())
    }

    pub fn to_json(&self, created_at: &str) -> String {
        let mut v = self.canonical();
        let hash = hash_value(&v);
        let m = v.as_object_mut().expect("manifest is an object");
        m.insert("hash".into(), Value::String(hash));
        m.insert("created_at".into(), Value::String(created_at.to_owned()));
        let mut s = serde_json::to_string_pretty(&v).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// SHA-256 of the compact JSON of `v` with its unhashed keys removed.
pub fn hash_value(v: &Value) -> String {
    let stripped = match v {
        Value::Object(m) => Value::Object(
            m.iter()
                .filter(|(k, _)| !UNHASHED.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect::<Map<_, _>>(),
        ),
        other => other.clone(),
    };
    let digest = Sha256::digest(serde_json::to_string(&stripped).expect("value serializes").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Writes `contents` to `dir/name`, creating `dir`.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the series CSV to `path` and its manifest next to it
/// (`x.csv` gets `x.manifest.json`).
pub fn emit_series(series: &OverlapSeries<f64>, path: &Path, manifest: &Manifest) -> Result<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, series_csv(series)).map_err(|e| Error::io(path, e))?;
    let sidecar = sidecar_path(path);
    fs::write(&sidecar, manifest.to_json(&timestamp())).map_err(|e| Error::io(&sidecar, e))?;
    Ok(sidecar)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::parse_config;
    use crate::ensemble::DickeLabel;
    use crate::overlap::{overlap_series, CostBudget, EngineId, TimeGrid};

    fn three_point_series() -> OverlapSeries<f64> {
        let e = AtomicEnsemble::longitudinal([0.9, 1.3, 1.1]).unwrap();
        let l = DickeLabel::new(3, 1).unwrap();
        let g = TimeGrid::linspace(0.0, 2.0, 3).unwrap();
        overlap_series(EngineId::Dephasing, &e, l, l, &g, CostBudget::default()).unwrap()
    }

    fn manifest(seed: u64) -> Manifest {
        let config = parse_config(&format!(r#"{{"command": "overlap", "n_atoms": 3, "seed": {seed}}}"#)).unwrap();
        Manifest {
            command: "overlap".into(),
            engine: Some("dephasing".into()),
            labels: Some(Labels { two_j: 3, two_m: 1, two_m_prime: 1 }),
            seed,
            distribution: serde_json::to_value(&config.distribution).unwrap(),
            config,
            outputs: vec!["overlap.csv".into()],
        }
    }

    #[test]
    fn csv_shape_and_abs2() {
        let s = three_point_series();
        let csv = series_csv(&s);
        assert!(!csv.contains('\r'));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "t,re,im,abs2");
        for row in &lines[1..] {
            let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
            assert!((v[3] - (v[1] * v[1] + v[2] * v[2])).abs() < 1e-15);
            // 17 significant digits: 1 before the point, 16 after
            let mantissa = row.split(',').nth(1).unwrap().split('e').next().unwrap();
            assert_eq!(mantissa.trim_start_matches('-').len(), 18);
        }
        for (row, v) in lines[1..].iter().zip(&s.values) {
            let re: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(re.to_bits(), v.re.to_bits());
        }
    }

    #[test]
    fn hash_tracks_inputs_not_timestamp() {
        let a = manifest(1);
        assert_eq!(a.hash(), manifest(1).hash());
        assert_ne!(a.hash(), manifest(2).hash());
        let mut b = manifest(1);
        b.labels = Some(Labels { two_j: 3, two_m: 1, two_m_prime: -1 });
        assert_ne!(a.hash(), b.hash());
        let mut c = manifest(1);
        c.config.out = "elsewhere".into();
        assert_eq!(a.hash(), c.hash());

        let j1: Value = serde_json::from_str(&a.to_json("2000-01-01T00:00:00Z")).unwrap();
        let j2: Value = serde_json::from_str(&a.to_json("2100-01-01T00:00:00Z")).unwrap();
        assert_eq!(j1["hash"], j2["hash"]);
        assert_eq!(hash_value(&j1), j1["hash"].as_str().unwrap());
    }

    #[test]
    fn emit_writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/overlap.csv");
        let side = emit_series(&three_point_series(), &path, &manifest(1)).unwrap();
        assert_eq!(side, dir.path().join("sub/overlap.manifest.json"));
        let m: Value = serde_json::from_str(&fs::read_to_string(side).unwrap()).unwrap();
        assert_eq!(m["engine"], "dephasing");
        assert_eq!(m["labels"]["two_m_prime"], 1);
        assert_eq!(m["generator"], GENERATOR);
        assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let e = emit_series(&three_point_series(), &blocker.join("a.csv"), &manifest(1)).unwrap_err();
        assert!(matches!(e, Error::Io { ref path, .. } if path.starts_with(&blocker)));
    }
}
