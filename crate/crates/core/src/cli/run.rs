//! Command dispatch. Every output file is written only after its command has
//! finished computing.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Command, RunConfig};
use super::output::{self, Labels, Manifest};
use crate::ensemble::{sample_ensemble, AtomicEnsemble, DickeLabel, FieldDistribution, FieldVector, SuperpositionState};
use crate::error::{Error, Result};
use crate::experiments::{
    derive_seed, half_life_search, kappa_experiment, m_profile, offdiag_experiment, rabi_experiment, revival_period,
    revival_scan, HalfLifeSearch, KappaConfig, OffDiagConfig, ProfileConfig, RabiConfig,
};
use crate::overlap::oracle::oracle_overlap_matrix;
use crate::overlap::{leakage, prepare, EngineId, TimeGrid};

/// What a successful run produced.
#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub command: String,
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    match cfg.command {
        Command::Sample => sample(cfg),
        Command::Overlap => overlap(cfg),
        Command::Leakage => run_leakage(cfg),
        Command::Halflife => halflife(cfg),
        Command::FitKappa => fit_kappa(cfg),
        Command::FitRabi => fit_rabi(cfg),
        Command::MProfile => profile(cfg),
        Command::Offdiag => offdiag(cfg),
        Command::Revival => revival(cfg),
        Command::Selftest => selftest(cfg),
    }
}

fn n_atoms(cfg: &RunConfig) -> usize {
    cfg.n_atoms.expect("resolved config has n_atoms")
}

fn distribution(cfg: &RunConfig, seed: u64) -> Result<FieldDistribution> {
    cfg.distribution.to_distribution(seed)
}

fn ensemble(cfg: &RunConfig, seed: u64) -> Result<AtomicEnsemble<f64>> {
    match &cfg.fields {
        Some(f) => AtomicEnsemble::new(f.iter().map(|b| FieldVector::from_array(*b)).collect()),
        None => sample_ensemble(&distribution(cfg, seed)?, n_atoms(cfg)),
    }
}

fn distribution_value(cfg: &RunConfig) -> Value {
    match &cfg.fields {
        Some(f) => json!({ "explicit_fields": f }),
        None => serde_json::to_value(&cfg.distribution).expect("distribution serializes"),
    }
}

fn grid(cfg: &RunConfig) -> Result<TimeGrid<f64>> {
    TimeGrid::linspace(cfg.grid.t_min, cfg.grid.t_max(), cfg.grid.points)
}

fn two_m(cfg: &RunConfig) -> i32 {
    cfg.two_m.expect("resolved config has two_m")
}

fn label(cfg: &RunConfig, two_m: i32) -> Result<DickeLabel> {
    DickeLabel::new(n_atoms(cfg) as u32, two_m)
}

fn manifest(cfg: &RunConfig, engine: Option<EngineId>, labels: Option<Labels>, distribution: Value, outputs: &[&str]) -> Manifest {
    Manifest {
        command: cfg.command.to_string(),
        engine: engine.map(|e| e.to_string()),
        labels,
        seed: cfg.seed,
        distribution,
        config: cfg.clone(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    }
}

/// Writes `(name, contents)` files plus `<command>.manifest.json`.
fn finish(cfg: &RunConfig, m: Manifest, files: Vec<(String, String)>, summary: Value) -> Result<RunOutcome> {
    let mut outputs = Vec::with_capacity(files.len() + 1);
    for (name, contents) in &files {
        outputs.push(output::write_file(&cfg.out, name, contents)?);
    }
    let name = format!("{}.manifest.json", cfg.command);
    outputs.push(output::write_file(&cfg.out, &name, &m.to_json(&output::timestamp()))?);
    Ok(RunOutcome { command: cfg.command.to_string(), outputs, summary })
}

fn report_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn sample(cfg: &RunConfig) -> Result<RunOutcome> {
    let ens = ensemble(cfg, cfg.seed)?;
    let mean = ens.mean();
    let csv = output::ensemble_csv(&ens);
    let m = manifest(cfg, None, None, distribution_value(cfg), &["sample.csv"]);
    let summary = json!({ "n_atoms": ens.n_atoms(), "mean": mean, "fingerprint": ens.fingerprint() });
    finish(cfg, m, vec![("sample.csv".into(), csv)], summary)
}

fn overlap(cfg: &RunConfig) -> Result<RunOutcome> {
    let ens = ensemble(cfg, cfg.seed)?;
    let (m, mp) = (label(cfg, two_m(cfg))?, label(cfg, cfg.two_m_prime.expect("resolved"))?);
    let id = cfg.engine.resolve(&ens);
    let eng = prepare(id, &ens, mp, m, cfg.budget())?;
    let g = grid(cfg)?;
    cfg.budget().check(eng.cost_per_point() * g.len() as f64, "overlap series")?;
    let series = eng.series(&g);
    let labels = Labels { two_j: m.two_j(), two_m: m.two_m(), two_m_prime: mp.two_m() };
    let man = manifest(cfg, Some(id), Some(labels), distribution_value(cfg), &["overlap.csv"]);
    let max_abs = series.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let summary = json!({ "engine": id, "points": g.len(), "max_abs": max_abs });
    finish(cfg, man, vec![("overlap.csv".into(), output::series_csv(&series))], summary)
}

fn run_leakage(cfg: &RunConfig) -> Result<RunOutcome> {
    let ens = ensemble(cfg, cfg.seed)?;
    let terms = cfg
        .superposition
        .as_ref()
        .expect("resolved config has superposition")
        .iter()
        .map(|t| Ok((label(cfg, t.two_m)?, Complex64::new(t.re, t.im))))
        .collect::<Result<Vec<_>>>()?;
    let state = SuperpositionState::normalized(terms)?;
    let g = grid(cfg)?;
    let series = leakage(&state, &ens, &g, cfg.engine, cfg.budget())?;
    let man = manifest(cfg, Some(series.engine), None, distribution_value(cfg), &["leakage.csv"]);
    let max_xi = series.xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({ "engine": series.engine, "points": g.len(), "max_xi": max_xi });
    finish(cfg, man, vec![("leakage.csv".into(), output::leakage_csv(&series))], summary)
}

fn halflife(cfg: &RunConfig) -> Result<RunOutcome> {
    let l = label(cfg, two_m(cfg))?;
    let draws = if cfg.fields.is_some() { 1 } else { cfg.draws };
    let search = HalfLifeSearch { points: cfg.grid.points, ..HalfLifeSearch::new(cfg.grid.t_max()) };
    let mut results = Vec::with_capacity(draws);
    let mut id = None;
    for d in 0..draws {
        let ens = ensemble(cfg, derive_seed(cfg.seed, d as u64))?;
        let this = cfg.engine.resolve(&ens);
        id = Some(this);
        let eng = prepare(this, &ens, l, l, cfg.budget())?;
        results.push(half_life_search(eng.as_ref(), &search)?);
    }
    let per_draw: Vec<f64> = results.iter().map(|r| r.t_half).collect();
    let t_half = crate::experiments::stats::median(&per_draw);
    let sigma = cfg.distribution.sigma.iter().fold(0.0f64, |a, b| a.max(*b));
    let report = json!({
        "two_j": l.two_j(),
        "two_m": l.two_m(),
        "engine": id,
        "t_half": t_half,
        "spread": crate::experiments::stats::interquartile_range(&per_draw),
        "f": if cfg.fields.is_none() && sigma > 0.0 { Some(1.0 / (t_half * sigma)) } else { None },
        "draws": results,
    });
    let labels = Labels { two_j: l.two_j(), two_m: l.two_m(), two_m_prime: l.two_m() };
    let man = manifest(cfg, id, Some(labels), distribution_value(cfg), &["halflife.json"]);
    let summary = json!({ "t_half": t_half, "draws": draws });
    finish(cfg, man, vec![("halflife.json".into(), report_json(&report))], summary)
}

fn fit_kappa(cfg: &RunConfig) -> Result<RunOutcome> {
    let spec = cfg.kappa.clone().expect("resolved");
    let kc = KappaConfig {
        j_values: spec.j_values.clone(),
        m_fractions: spec.m_fractions.clone(),
        sigma_values: spec.sigma_values.clone(),
        b_z: spec.b_z,
        draws: cfg.draws,
        seed: cfg.seed,
        points: cfg.grid.points,
    };
    let report = kappa_experiment(&kc, cfg.budget())?;
    let rows: Vec<Vec<f64>> = report
        .cells
        .iter()
        .map(|c| vec![c.two_j as f64 / 2.0, c.two_m as f64 / 2.0, c.sigma, c.x, c.t_half, c.f])
        .collect();
    let csv = output::table_csv(&["j", "m", "sigma", "x", "t_half", "f"], &rows);
    let man = manifest(cfg, Some(EngineId::Dephasing), None, serde_json::to_value(&spec).expect("spec"), &["fit-kappa.json", "fit-kappa.csv"]);
    let summary = json!({
        "kappa": report.kappa,
        "kappa_rms": report.kappa_rms,
        "log_log_exponent": report.log_log.exponent,
        "max_sigma_variation": report.max_sigma_variation,
    });
    finish(cfg, man, vec![("fit-kappa.json".into(), report_json(&report)), ("fit-kappa.csv".into(), csv)], summary)
}

fn fit_rabi(cfg: &RunConfig) -> Result<RunOutcome> {
    let spec = cfg.rabi.clone().expect("resolved");
    let rc = RabiConfig {
        j_values: spec.j_values.clone(),
        b_r: spec.b_r,
        sigma_r: spec.sigma_r,
        draws: cfg.draws,
        seed: cfg.seed,
        points: cfg.grid.points,
    };
    let report = rabi_experiment(&rc, cfg.budget())?;
    let rows: Vec<Vec<f64>> = report.cells.iter().map(|c| vec![c.two_j as f64 / 2.0, c.t_half, c.f]).collect();
    let csv = output::table_csv(&["j", "t_half", "f"], &rows);
    let man = manifest(cfg, Some(EngineId::General), None, serde_json::to_value(&spec).expect("spec"), &["fit-rabi.json", "fit-rabi.csv"]);
    let summary = json!({ "kappa1": report.kappa1, "exponent": report.power_law.exponent });
    finish(cfg, man, vec![("fit-rabi.json".into(), report_json(&report)), ("fit-rabi.csv".into(), csv)], summary)
}

fn profile(cfg: &RunConfig) -> Result<RunOutcome> {
    let spec = cfg.profile.clone().expect("resolved");
    let pc = ProfileConfig {
        j: spec.j,
        case: spec.case,
        m_values: spec.m_values.clone().expect("resolved"),
        draws: cfg.draws,
        seed: cfg.seed,
        points: cfg.grid.points,
    };
    let report = m_profile(&pc, cfg.budget())?;
    let rows: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|r| vec![r.m as f64, r.f, r.comparison.unwrap_or(f64::NAN)])
        .collect();
    let csv = output::table_csv(&["m", "f", "comparison"], &rows);
    let man = manifest(cfg, Some(spec.case.engine()), None, serde_json::to_value(&spec).expect("spec"), &["m-profile.json", "m-profile.csv"]);
    let summary = json!({ "kappa": report.kappa, "cubic": report.cubic });
    finish(cfg, man, vec![("m-profile.json".into(), report_json(&report)), ("m-profile.csv".into(), csv)], summary)
}

fn offdiag(cfg: &RunConfig) -> Result<RunOutcome> {
    let spec = cfg.offdiag.clone().expect("resolved");
    let oc = OffDiagConfig {
        j_values: spec.j_values.clone(),
        delta_m: spec.delta_m,
        draws: cfg.draws,
        b_r: spec.b_r,
        sigma_r: spec.sigma_r,
        seed: cfg.seed,
        points: cfg.grid.points,
        include_adjacent: spec.include_adjacent,
    };
    let report = offdiag_experiment(&oc, cfg.budget())?;
    let rows: Vec<Vec<f64>> = report
        .stats
        .iter()
        .map(|s| vec![s.two_j as f64 / 2.0, s.t_max, s.o_max])
        .collect();
    let csv = output::table_csv(&["j", "t_max", "o_max"], &rows);
    let man = manifest(cfg, Some(EngineId::General), None, serde_json::to_value(&spec).expect("spec"), &["offdiag.json", "offdiag.csv"]);
    let summary = json!({ "o_max_exponent": report.o_max_fit.exponent, "f_exponent": report.f_fit.exponent });
    finish(cfg, man, vec![("offdiag.json".into(), report_json(&report)), ("offdiag.csv".into(), csv)], summary)
}

fn revival(cfg: &RunConfig) -> Result<RunOutcome> {
    let ens = ensemble(cfg, cfg.seed)?;
    let l = label(cfg, two_m(cfg))?;
    let tol = cfg.revival.as_ref().expect("resolved").tolerance;
    let events = revival_scan(&ens, l, (cfg.grid.t_min, cfg.grid.t_max()), cfg.grid.points, tol)?;
    let period = revival_period(&events);
    let report = json!({ "two_j": l.two_j(), "two_m": l.two_m(), "tolerance": tol, "events": events, "period": period });
    let labels = Labels { two_j: l.two_j(), two_m: l.two_m(), two_m_prime: l.two_m() };
    let man = manifest(cfg, Some(EngineId::Dephasing), Some(labels), distribution_value(cfg), &["revival.json"]);
    let summary = json!({ "events": events.len(), "period": period });
    finish(cfg, man, vec![("revival.json".into(), report_json(&report))], summary)
}

/// Largest deviation of the fast engines from the statevector oracle.
#[derive(Clone, Debug, Serialize)]
struct SelftestRow {
    n_atoms: usize,
    general: f64,
    dephasing: f64,
}

fn selftest(cfg: &RunConfig) -> Result<RunOutcome> {
    let spec = cfg.selftest.clone().expect("resolved");
    let rows = (0..spec.ensembles)
        .map(|s| {
            let n = 2 + s % (spec.max_atoms - 1);
            let dist = FieldDistribution::new(FieldVector::new(0.3, -0.2, 1.0), [0.4, 0.4, 0.4], derive_seed(cfg.seed, s as u64))?;
            let ens: AtomicEnsemble<f64> = sample_ensemble(&dist, n)?;
            let long = AtomicEnsemble::new(ens.fields().iter().map(|f| FieldVector::new(0.0, 0.0, f.bz)).collect())?;
            let general = max_oracle_error(&ens, EngineId::General, &spec, cfg)?;
            let dephasing = max_oracle_error(&long, EngineId::Dephasing, &spec, cfg)?;
            Ok(SelftestRow { n_atoms: n, general, dephasing })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = rows.iter().map(|r| r.general.max(r.dephasing)).fold(0.0, f64::max);
    let passed = worst <= spec.tolerance;
    let report = json!({ "tolerance": spec.tolerance, "worst": worst, "passed": passed, "ensembles": rows });
    let man = manifest(cfg, None, None, Value::Null, &["selftest.json"]);
    let outcome = finish(cfg, man, vec![("selftest.json".into(), report_json(&report))], json!({ "worst": worst, "passed": passed }))?;
    if passed {
        Ok(outcome)
    } else {
        Err(Error::SelfTest(format!("worst deviation {worst:.3e} exceeds {:.1e}", spec.tolerance)))
    }
}

fn max_oracle_error(
    ens: &AtomicEnsemble<f64>,
    id: EngineId,
    spec: &super::config::SelftestSpec,
    cfg: &RunConfig,
) -> Result<f64> {
    let n = ens.n_atoms() as u32;
    let labels: Vec<DickeLabel> = (0..=n).map(|k| DickeLabel::from_excitations(n, k)).collect::<Result<_>>()?;
    let times: Vec<f64> = (1..=spec.time_points).map(|k| 0.61 * k as f64).collect();
    let exact: Vec<_> = times.iter().map(|&t| oracle_overlap_matrix(ens, t)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for (i, mp) in labels.iter().enumerate() {
        for (j, m) in labels.iter().enumerate() {
            let eng = prepare(id, ens, *mp, *m, cfg.budget())?;
            for (t, mat) in times.iter().zip(&exact) {
                worst = worst.max((eng.at(*t) - mat[i][j]).norm());
            }
        }
    }
    Ok(worst)
}
