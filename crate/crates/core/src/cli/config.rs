//! Run configuration: JSON text in, fully resolved [`RunConfig`] out.
//!
//! Every default is written back into the resolved value, so serializing a
//! resolved config records exactly what ran.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ensemble::{DickeLabel, FieldDistribution, FieldVector};
use crate::error::{Error, Result};
use crate::experiments::FieldCase;
use crate::overlap::{CostBudget, EngineChoice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Draw an ensemble and write its per-atom fields
    Sample,
    /// Overlap series O_{M'M}(t)
    Overlap,
    /// Leakage xi(t) of a superposition of Dicke states
    Leakage,
    /// Half-life of |O_MM| over several draws
    Halflife,
    /// Dephasing sweep and fit of kappa
    FitKappa,
    /// Rabi sweep and fit of kappa_1
    FitRabi,
    /// f(M) at fixed J
    MProfile,
    /// First maximum of off-diagonal overlaps near M = J
    Offdiag,
    /// Revival times of |O_MM| for a dephasing ensemble
    Revival,
    /// Engines against the statevector oracle
    Selftest,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Overlap => "overlap",
            Command::Leakage => "leakage",
            Command::Halflife => "halflife",
            Command::FitKappa => "fit-kappa",
            Command::FitRabi => "fit-rabi",
            Command::MProfile => "m-profile",
            Command::Offdiag => "offdiag",
            Command::Revival => "revival",
            Command::Selftest => "selftest",
        }
    }

    fn needs_ensemble(&self) -> bool {
        matches!(
            self,
            Command::Sample | Command::Overlap | Command::Leakage | Command::Halflife | Command::Revival
        )
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    #[serde(default = "default_mean")]
    pub mean: [f64; 3],
    #[serde(default)]
    pub sigma: [f64; 3],
}

fn default_mean() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl Default for DistributionSpec {
    fn default() -> Self {
        Self { mean: default_mean(), sigma: [0.0; 3] }
    }
}

impl DistributionSpec {
    pub fn to_distribution(&self, seed: u64) -> Result<FieldDistribution> {
        FieldDistribution::new(FieldVector::from_array(self.mean), self.sigma, seed)
    }

    fn has_transverse(&self) -> bool {
        self.mean[0] != 0.0 || self.mean[1] != 0.0 || self.sigma[0] != 0.0 || self.sigma[1] != 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub t_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    2048
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { t_min: 0.0, t_max: None, points: default_points() }
    }
}

impl GridSpec {
    /// `t_max` after resolution.
    pub fn t_max(&self) -> f64 {
        self.t_max.expect("grid resolved")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub two_m: i32,
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KappaSpec {
    pub j_values: Vec<u32>,
    /// `M / J` for each label
    pub m_fractions: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub b_z: f64,
}

impl Default for KappaSpec {
    fn default() -> Self {
        Self {
            j_values: vec![50, 100, 200],
            m_fractions: vec![0.0, 0.5],
            sigma_values: vec![1e-4, 1e-3, 1e-2],
            b_z: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RabiSpec {
    pub j_values: Vec<u32>,
    pub b_r: f64,
    pub sigma_r: f64,
}

impl Default for RabiSpec {
    fn default() -> Self {
        Self { j_values: vec![25, 50, 100], b_r: 10.0, sigma_r: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default = "default_profile_j")]
    pub j: u32,
    #[serde(default = "default_profile_case")]
    pub case: FieldCase,
    /// integer `M` values; defaults to 21 evenly spaced values in `[-J, J]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_values: Option<Vec<i32>>,
}

fn default_profile_j() -> u32 {
    50
}

fn default_profile_case() -> FieldCase {
    FieldCase::Dephasing { b_z: 1.0, sigma: 1e-3 }
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self { j: default_profile_j(), case: default_profile_case(), m_values: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OffDiagSpec {
    pub j_values: Vec<u32>,
    pub delta_m: u32,
    pub b_r: f64,
    pub sigma_r: f64,
    pub include_adjacent: bool,
}

impl Default for OffDiagSpec {
    fn default() -> Self {
        Self { j_values: vec![25, 50, 100, 200], delta_m: 2, b_r: 10.0, sigma_r: 1e-2, include_adjacent: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RevivalSpec {
    pub tolerance: f64,
}

impl Default for RevivalSpec {
    fn default() -> Self {
        Self { tolerance: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelftestSpec {
    pub ensembles: usize,
    pub max_atoms: usize,
    pub time_points: usize,
    pub tolerance: f64,
}

impl Default for SelftestSpec {
    fn default() -> Self {
        Self { ensembles: 10, max_atoms: 8, time_points: 8, tolerance: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<usize>,
    #[serde(default)]
    pub distribution: DistributionSpec,
    /// Explicit per-atom fields; when present the distribution is not sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_m: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_m_prime: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superposition: Option<Vec<TermSpec>>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub engine: EngineChoice,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_budget")]
    pub budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi: Option<RabiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offdiag: Option<OffDiagSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revival: Option<RevivalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selftest: Option<SelftestSpec>,
}

fn default_draws() -> usize {
    16
}

fn default_out() -> PathBuf {
    PathBuf::from("spinfade-out")
}

fn default_budget() -> f64 {
    CostBudget::DEFAULT.0
}

/// Fallback `t_max` when the field spread gives no natural time scale.
const FALLBACK_T_MAX: f64 = 10.0;

/// Parses and resolves `text`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    read_config(text, None)?.resolve()
}

/// Parses `text` without resolving defaults. `command` fills in a missing
/// `"command"` key and must agree with one that is present.
pub fn read_config(text: &str, command: Option<Command>) -> Result<RunConfig> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let mut value: Value = serde_json::from_str(text).map_err(|e| Error::ConfigSyntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(map) = &mut value else {
        return Err(Error::config("<root>", "config must be a JSON object"));
    };
    if let Some(cmd) = command {
        let name = Value::String(cmd.as_str().to_owned());
        match map.get("command") {
            None => {
                map.insert("command".into(), name);
            }
            Some(v) if *v == name => {}
            Some(v) => return Err(Error::config("command", format!("config says {v} but {cmd} was requested"))),
        }
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        Error::config(key_of(&path, &inner), inner)
    })
}

/// Dotted key for a serde error: the path, extended by the field named in
/// `unknown field` and `missing field` messages.
fn key_of(path: &str, message: &str) -> String {
    let named = ["unknown field `", "missing field `"]
        .iter()
        .find_map(|p| message.strip_prefix(p))
        .and_then(|rest| rest.split('`').next());
    match (path, named) {
        (".", Some(n)) => n.to_owned(),
        (".", None) => "<root>".to_owned(),
        (p, Some(n)) if p != n && !p.ends_with(&format!(".{n}")) => format!("{p}.{n}"),
        (p, _) => p.to_owned(),
    }
}

impl RunConfig {
    /// Fills every default the command uses and validates the result.
    /// Idempotent.
    pub fn resolve(mut self) -> Result<Self> {
        if self.draws == 0 {
            return Err(Error::config("draws", "must be >= 1"));
        }
        if !(self.budget > 0.0) {
            return Err(Error::config("budget", "must be positive"));
        }
        if self.grid.points < 2 {
            return Err(Error::config("grid.points", "must be >= 2"));
        }
        if !(self.grid.t_min >= 0.0 && self.grid.t_min.is_finite()) {
            return Err(Error::config("grid.t_min", "must be finite and >= 0"));
        }
        check_finite("distribution.mean", &self.distribution.mean)?;
        check_finite("distribution.sigma", &self.distribution.sigma)?;
        if self.distribution.sigma.iter().any(|s| *s < 0.0) {
            return Err(Error::config("distribution.sigma", "must be >= 0"));
        }

        if self.command.needs_ensemble() {
            self.resolve_ensemble()?;
        }
        match self.command {
            Command::FitKappa => {
                self.experiment_engine(EngineChoice::Dephasing)?;
                let k = self.kappa.get_or_insert_with(Default::default);
                if k.j_values.is_empty() || k.m_fractions.is_empty() || k.sigma_values.is_empty() {
                    return Err(Error::config("kappa", "j_values, m_fractions and sigma_values must be non-empty"));
                }
                if k.sigma_values.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::config("kappa.sigma_values", "must be positive"));
                }
            }
            Command::FitRabi => {
                self.experiment_engine(EngineChoice::General)?;
                let r = self.rabi.get_or_insert_with(Default::default);
                if r.j_values.len() < 3 {
                    return Err(Error::config("rabi.j_values", "a power-law fit needs at least three J values"));
                }
                if !(r.sigma_r > 0.0) {
                    return Err(Error::config("rabi.sigma_r", "must be positive"));
                }
            }
            Command::MProfile => {
                let p = self.profile.get_or_insert_with(Default::default);
                let case_engine = match p.case {
                    FieldCase::Dephasing { .. } => EngineChoice::Dephasing,
                    FieldCase::Rabi { .. } => EngineChoice::General,
                };
                if p.j == 0 {
                    return Err(Error::config("profile.j", "must be >= 1"));
                }
                if !(p.case.sigma() > 0.0) {
                    return Err(Error::config("profile.case.sigma", "must be positive"));
                }
                let j = p.j as i32;
                let m_values = p
                    .m_values
                    .get_or_insert_with(|| {
                        let mut v: Vec<i32> = (0..=20).map(|i| ((i - 10) as f64 * j as f64 / 10.0).round() as i32).collect();
                        v.dedup();
                        v
                    })
                    .clone();
                if m_values.is_empty() || m_values.iter().any(|m| m.abs() > j) {
                    return Err(Error::config("profile.m_values", "need at least one M with |M| <= J"));
                }
                self.experiment_engine(case_engine)?;
            }
            Command::Offdiag => {
                self.experiment_engine(EngineChoice::General)?;
                let o = self.offdiag.get_or_insert_with(Default::default);
                if o.j_values.len() < 3 {
                    return Err(Error::config("offdiag.j_values", "a power-law fit needs at least three J values"));
                }
                if o.delta_m == 0 {
                    return Err(Error::config("offdiag.delta_m", "must be >= 1"));
                }
                if let Some(j) = o.j_values.iter().find(|j| 2 * **j < 2 + 2 * o.delta_m) {
                    return Err(Error::config("offdiag.j_values", format!("J = {j} too small for M' = J - 1 - delta_m")));
                }
            }
            Command::Revival => {
                let r = self.revival.get_or_insert_with(Default::default);
                if !(r.tolerance > 0.0 && r.tolerance < 1.0) {
                    return Err(Error::config("revival.tolerance", "must lie in (0, 1)"));
                }
            }
            Command::Selftest => {
                let s = self.selftest.get_or_insert_with(Default::default);
                if s.ensembles == 0 || s.time_points == 0 {
                    return Err(Error::config("selftest", "ensembles and time_points must be >= 1"));
                }
                if !(2..=12).contains(&s.max_atoms) {
                    return Err(Error::config("selftest.max_atoms", "must lie in 2..=12"));
                }
            }
            _ => {}
        }
        if self.grid.t_max.is_none() {
            self.grid.t_max = Some(self.default_t_max());
        }
        let t_max = self.grid.t_max();
        if !(t_max.is_finite() && t_max > self.grid.t_min) {
            return Err(Error::config("grid.t_max", "must be finite and greater than t_min"));
        }
        Ok(self)
    }

    fn resolve_ensemble(&mut self) -> Result<()> {
        if let Some(fields) = &self.fields {
            if fields.is_empty() {
                return Err(Error::config("fields", "must list at least one atom"));
            }
            for f in fields {
                check_finite("fields", f)?;
            }
            match self.n_atoms {
                Some(n) if n != fields.len() => {
                    return Err(Error::config("n_atoms", format!("{n} does not match {} explicit fields", fields.len())));
                }
                _ => self.n_atoms = Some(fields.len()),
            }
        }
        let n = match self.n_atoms {
            Some(n) if n >= 1 => n,
            Some(_) => return Err(Error::config("n_atoms", "must be >= 1")),
            None => return Err(Error::config("n_atoms", format!("required by `{}`", self.command))),
        };
        let two_j = u32::try_from(n).map_err(|_| Error::config("n_atoms", "too large"))?;
        let two_m = *self.two_m.get_or_insert((n % 2) as i32);
        DickeLabel::new(two_j, two_m).map_err(|e| Error::config("two_m", e.to_string()))?;
        match self.command {
            Command::Overlap => {
                let mp = *self.two_m_prime.get_or_insert(two_m);
                DickeLabel::new(two_j, mp).map_err(|e| Error::config("two_m_prime", e.to_string()))?;
            }
            Command::Leakage => {
                let terms = self.superposition.get_or_insert_with(|| vec![TermSpec { two_m, re: 1.0, im: 0.0 }]);
                for t in terms.iter() {
                    DickeLabel::new(two_j, t.two_m).map_err(|e| Error::config("superposition", e.to_string()))?;
                }
                let norm: f64 = terms.iter().map(|t| t.re * t.re + t.im * t.im).sum();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(Error::config("superposition", "amplitudes must be finite and not all zero"));
                }
            }
            _ => {}
        }
        let transverse = match &self.fields {
            Some(f) => f.iter().any(|b| b[0] != 0.0 || b[1] != 0.0),
            None => self.distribution.has_transverse(),
        };
        let needs_dephasing = self.command == Command::Revival;
        if (self.engine == EngineChoice::Dephasing || needs_dephasing) && transverse {
            return Err(Error::config(
                "engine",
                "the dephasing engine needs zero transverse field means and sigmas",
            ));
        }
        if needs_dephasing && !matches!(self.engine, EngineChoice::Auto | EngineChoice::Dephasing) {
            return Err(Error::config("engine", "revival scans use the dephasing engine"));
        }
        Ok(())
    }

    fn experiment_engine(&self, required: EngineChoice) -> Result<()> {
        if self.engine != EngineChoice::Auto && self.engine != required {
            return Err(Error::config("engine", format!("`{}` always uses the {required} engine", self.command)));
        }
        Ok(())
    }

    /// `8 / (sigma sqrt(J))` with `sigma` the largest spread of the fields.
    fn default_t_max(&self) -> f64 {
        let n = self.n_atoms.unwrap_or(1) as f64;
        let sigma = match &self.fields {
            Some(f) => spread(f),
            None => self.distribution.sigma.iter().fold(0.0f64, |a, b| a.max(*b)),
        };
        if sigma > 0.0 {
            crate::experiments::DEFAULT_SPAN / (sigma * (n / 2.0).sqrt())
        } else {
            FALLBACK_T_MAX
        }
    }

    pub fn budget(&self) -> CostBudget {
        CostBudget(self.budget)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn check_finite(key: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::config(key, "values must be finite"))
    }
}

/// Largest per-component standard deviation of explicit fields.
fn spread(fields: &[[f64; 3]]) -> f64 {
    let n = fields.len() as f64;
    (0..3)
        .map(|c| {
            let mean = fields.iter().map(|f| f[c]).sum::<f64>() / n;
            (fields.iter().map(|f| (f[c] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_overlap_fills_defaults() {
        let c = parse_config(r#"{"command": "overlap", "n_atoms": 2}"#).unwrap();
        assert_eq!(c.draws, 16);
        assert_eq!(c.engine, EngineChoice::Auto);
        assert_eq!(c.two_m, Some(0));
        assert_eq!(c.two_m_prime, Some(0));
        assert_eq!(c.grid.t_max, Some(FALLBACK_T_MAX));
        let json = c.to_json();
        assert!(json.contains("\"draws\": 16") && json.contains("\"engine\": \"auto\""));
    }

    #[test]
    fn round_trip_is_exact() {
        let text = r#"{"command": "overlap", "n_atoms": 7, "two_m": 1, "two_m_prime": -3,
            "distribution": {"mean": [0.1, 0.30000000000000004, 1.0], "sigma": [1e-3, 2.5e-3, 0.1]},
            "seed": 18446744073709551615}"#;
        let a = parse_config(text).unwrap();
        let ser = a.to_json();
        let b = parse_config(&ser).unwrap();
        assert_eq!(a, b);
        assert_eq!(ser, b.to_json());
        assert_eq!(b.distribution.mean[1].to_bits(), 0.30000000000000004f64.to_bits());
    }

    #[test]
    fn dephasing_with_transverse_sigma_is_semantic_error() {
        let e = parse_config(
            r#"{"command": "overlap", "n_atoms": 4, "engine": "dephasing",
                "distribution": {"sigma": [0.01, 0, 0.01]}}"#,
        )
        .unwrap_err();
        match e {
            Error::ConfigSemantic { key, .. } => assert_eq!(key, "engine"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_config("{\n  \"command\": \"overlap\",\n  \"n_atoms\": ,\n}").unwrap_err();
        match e {
            Error::ConfigSyntax { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = parse_config(r#"{"command": "overlap", "n_atoms": 2, "grid": {"pionts": 4}}"#).unwrap_err();
        match e {
            Error::ConfigSemantic { key, .. } => assert_eq!(key, "grid.pionts"),
            other => panic!("{other:?}"),
        }
        let e = parse_config(r#"{"command": "overlap", "n_atom": 2}"#).unwrap_err();
        assert!(matches!(e, Error::ConfigSemantic { ref key, .. } if key == "n_atom"));
    }

    #[test]
    fn wrong_type_names_the_path() {
        let e = parse_config(r#"{"command": "fit-kappa", "kappa": {"j_values": ["x"]}}"#).unwrap_err();
        assert!(matches!(e, Error::ConfigSemantic { ref key, .. } if key.starts_with("kappa.j_values")), "{e:?}");
    }

    #[test]
    fn command_from_cli_must_agree() {
        let c = read_config(r#"{"n_atoms": 3}"#, Some(Command::Sample)).unwrap();
        assert_eq!(c.command, Command::Sample);
        assert!(read_config(r#"{"command": "overlap"}"#, Some(Command::Sample)).is_err());
        assert!(read_config("", Some(Command::Selftest)).unwrap().resolve().is_ok());
    }

    #[test]
    fn experiment_sections_are_filled() {
        let c = parse_config(r#"{"command": "m-profile", "profile": {"j": 20}}"#).unwrap();
        let p = c.profile.as_ref().unwrap();
        assert_eq!(p.m_values.as_ref().unwrap().first(), Some(&-20));
        assert_eq!(p.m_values.as_ref().unwrap().len(), 21);
        assert_eq!(parse_config(&c.to_json()).unwrap(), c);
        let e = parse_config(r#"{"command": "fit-rabi", "engine": "dephasing"}"#).unwrap_err();
        assert!(matches!(e, Error::ConfigSemantic { ref key, .. } if key == "engine"));
    }

    #[test]
    fn labels_are_checked() {
        let e = parse_config(r#"{"command": "overlap", "n_atoms": 4, "two_m": 1}"#).unwrap_err();
        assert!(matches!(e, Error::ConfigSemantic { ref key, .. } if key == "two_m"));
        let e = parse_config(r#"{"command": "overlap"}"#).unwrap_err();
        assert!(matches!(e, Error::ConfigSemantic { ref key, .. } if key == "n_atoms"));
    }
}
