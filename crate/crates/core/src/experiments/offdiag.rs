//! First maximum of an off-diagonal `|O_{M'M}(t)|` near the top of the
//! ladder (`M = J - 1`, `M' = M - delta_m`).

use serde::{Deserialize, Serialize};

use super::halflife::{scan_blocks, HalfLifeSearch};
use super::stats::{fit_power_law, median, PowerLawFit};
use super::{clone_error, derive_seed, draw_ensemble, engine_for, label, run_indexed, FieldCase};
use crate::error::{Error, Result};
use crate::overlap::{CostBudget, OverlapEngine};

/// Values below this are treated as exact zeros when looking for a maximum.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffDiagConfig {
    pub j_values: Vec<u32>,
    pub delta_m: u32,
    pub draws: usize,
    pub b_r: f64,
    pub sigma_r: f64,
    pub seed: u64,
    pub points: usize,
    /// also record `delta_m = 1` (raw output only, never fitted)
    pub include_adjacent: bool,
}

impl Default for OffDiagConfig {
    fn default() -> Self {
        Self {
            j_values: vec![25, 50, 100, 200],
            delta_m: 2,
            draws: 8,
            b_r: 10.0,
            sigma_r: 1e-2,
            seed: 0,
            points: 2048,
            include_adjacent: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffDiagStats {
    pub two_j: u32,
    pub two_m: i32,
    pub two_m_prime: i32,
    /// median over draws
    pub t_max: f64,
    /// median over draws
    pub o_max: f64,
    pub per_draw: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffDiagReport {
    pub stats: Vec<OffDiagStats>,
    /// `O_max` against `J`
    pub o_max_fit: PowerLawFit,
    /// `1 / (T_max sigma_r)` against `J`
    pub f_fit: PowerLawFit,
    pub adjacent: Vec<OffDiagStats>,
}

/// Index of the first sample above the noise floor whose two neighbours are
/// both lower.
fn first_local_max(abs: &[f64]) -> Option<usize> {
    (1..abs.len().saturating_sub(1)).find(|&i| abs[i] > NOISE_FLOOR && abs[i] > abs[i - 1] && abs[i] > abs[i + 1])
}

/// Golden-section maximisation of `f` on `[a, b]`.
pub(crate) fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// `(T_max, O_max)` of one series, scanning lazily along the search grid.
pub fn first_maximum(engine: &dyn OverlapEngine<f64>, search: &HalfLifeSearch) -> Result<(f64, f64)> {
    let (times, abs) = scan_blocks(engine, search, |a| first_local_max(a).is_some());
    let Some(i) = first_local_max(&abs) else {
        return Err(Error::NotFound {
            what: "interior maximum of |O_{M'M}|".into(),
            searched_to: times.last().copied().unwrap_or(0.0),
        });
    };
    let probe = |t: f64| engine.at(t).norm();
    let (t, v) = golden_max(&probe, times[i - 1], times[i + 1], 1e-6 * times[i]);
    // the refined point can only improve on the grid sample
    Ok(if v >= abs[i] { (t, v) } else { (times[i], abs[i]) })
}

fn stats_for(cfg: &OffDiagConfig, delta_m: u32, budget: CostBudget, seed_offset: u64) -> Result<Vec<OffDiagStats>> {
    let case = FieldCase::Rabi { b_r: cfg.b_r, sigma: cfg.sigma_r };
    case.validate()?;
    for &j in &cfg.j_values {
        if 2 * j < 2 + 2 * delta_m {
            return Err(Error::invalid(format!("J = {j} too small for M' = J - 1 - {delta_m}")));
        }
    }
    let draws = cfg.draws.max(1);
    let results = run_indexed(cfg.j_values.len() * draws, |task| -> Result<(f64, f64)> {
        let j = cfg.j_values[task / draws];
        let two_j = 2 * j;
        let m = label(two_j, two_j as i32 - 2)?;
        let mp = label(two_j, two_j as i32 - 2 - 2 * delta_m as i32)?;
        let ens = draw_ensemble(&case, two_j, derive_seed(cfg.seed, seed_offset + task as u64))?;
        let eng = engine_for(&case, &ens, mp, m, budget)?;
        let search = HalfLifeSearch {
            points: cfg.points,
            ..HalfLifeSearch::new(case.default_t_max(j as f64))
        };
        first_maximum(eng.as_ref(), &search)
    });
    cfg.j_values
        .iter()
        .enumerate()
        .map(|(ji, &j)| {
            let mut per_draw = Vec::with_capacity(draws);
            for r in &results[ji * draws..(ji + 1) * draws] {
                per_draw.push(r.as_ref().map_err(clone_error)?.to_owned());
            }
            let ts: Vec<f64> = per_draw.iter().map(|p| p.0).collect();
            let os: Vec<f64> = per_draw.iter().map(|p| p.1).collect();
            Ok(OffDiagStats {
                two_j: 2 * j,
                two_m: 2 * j as i32 - 2,
                two_m_prime: 2 * j as i32 - 2 - 2 * delta_m as i32,
                t_max: median(&ts),
                o_max: median(&os),
                per_draw,
            })
        })
        .collect()
}

pub fn offdiag_experiment(cfg: &OffDiagConfig, budget: CostBudget) -> Result<OffDiagReport> {
    if cfg.delta_m == 0 {
        return Err(Error::invalid("delta_m must be >= 1"));
    }
    let stats = stats_for(cfg, cfg.delta_m, budget, 0)?;
    let o_pts: Vec<(f64, f64)> = stats.iter().map(|s| (s.two_j as f64 / 2.0, s.o_max)).collect();
    let f_pts: Vec<(f64, f64)> = stats
        .iter()
        .map(|s| (s.two_j as f64 / 2.0, 1.0 / (s.t_max * cfg.sigma_r)))
        .collect();
    let adjacent = if cfg.include_adjacent && cfg.delta_m != 1 {
        stats_for(cfg, 1, budget, 1 << 32)?
    } else {
        Vec::new()
    };
    Ok(OffDiagReport {
        o_max_fit: fit_power_law(&o_pts)?,
        f_fit: fit_power_law(&f_pts)?,
        stats,
        adjacent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{AtomicEnsemble, DickeLabel, FieldVector};
    use crate::overlap::GeneralEngine;

    #[test]
    fn homogeneous_has_no_maximum() {
        let e = AtomicEnsemble::homogeneous(FieldVector::new(10.0, 10.0, 0.0), 20).unwrap();
        let m = DickeLabel::new(20, 18).unwrap();
        let mp = DickeLabel::new(20, 14).unwrap();
        let eng = GeneralEngine::prepare(&e, mp, m, CostBudget::default()).unwrap();
        let search = HalfLifeSearch { t_max: 50.0, points: 128, extensions: 1 };
        assert!(matches!(first_maximum(&eng, &search), Err(Error::NotFound { .. })));
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let f = |t: f64| 1.0 - (t - 0.3).powi(2);
        let (t, v) = golden_max(&f, 0.0, 1.0, 1e-9);
        assert!((t - 0.3).abs() < 1e-8 && (v - 1.0).abs() < 1e-15);
    }
}
