//! `f(M)` at fixed `J`, for either field model.

use serde::{Deserialize, Serialize};

use super::kappa::x_coordinate;
use super::stats::{fit_polynomial, fit_through_origin};
use super::{half_life_cells, FieldCase};
use crate::error::{Error, Result};
use crate::overlap::CostBudget;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub j: u32,
    pub case: FieldCase,
    pub m_values: Vec<i32>,
    pub draws: usize,
    pub seed: u64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub m: i32,
    /// `0` where `|O_MM|` never decays
    pub f: f64,
    pub t_half: Option<f64>,
    pub spread: f64,
    /// dephasing only: `kappa sqrt(J) sqrt(1 - M^2/J^2)` with the fitted kappa
    pub comparison: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub j: u32,
    pub case: FieldCase,
    pub rows: Vec<ProfileRow>,
    /// dephasing only
    pub kappa: Option<f64>,
    /// Rabi only: cubic in `|M|`, constant term first
    pub cubic: Option<Vec<f64>>,
}

pub fn m_profile(cfg: &ProfileConfig, budget: CostBudget) -> Result<ProfileReport> {
    if cfg.j == 0 || cfg.m_values.is_empty() {
        return Err(Error::invalid("M profile needs J >= 1 and at least one M"));
    }
    if let Some(m) = cfg.m_values.iter().find(|m| m.unsigned_abs() > cfg.j) {
        return Err(Error::invalid(format!("|M| = {} exceeds J = {}", m.abs(), cfg.j)));
    }
    let dephasing = matches!(cfg.case, FieldCase::Dephasing { .. });
    let two_j = 2 * cfg.j;
    // edge labels never decay under pure dephasing
    let decaying: Vec<i32> = cfg
        .m_values
        .iter()
        .copied()
        .filter(|m| !(dephasing && m.unsigned_abs() == cfg.j))
        .collect();
    let cells: Vec<_> = decaying.iter().map(|&m| (two_j, 2 * m, cfg.case)).collect();
    let measured = half_life_cells(&cells, cfg.draws, cfg.seed, cfg.points, budget)?;

    let mut rows: Vec<ProfileRow> = cfg
        .m_values
        .iter()
        .map(|&m| match decaying.iter().position(|&d| d == m) {
            Some(i) => ProfileRow {
                m,
                f: measured[i].f,
                t_half: Some(measured[i].t_half.t_half),
                spread: measured[i].t_half.spread,
                comparison: None,
            },
            None => ProfileRow { m, f: 0.0, t_half: None, spread: 0.0, comparison: None },
        })
        .collect();

    let (kappa, cubic) = if dephasing {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (x_coordinate(two_j, 2 * r.m), r.f)).collect();
        let (k, _) = fit_through_origin(&pts)?;
        for r in rows.iter_mut() {
            r.comparison = Some(k * x_coordinate(two_j, 2 * r.m));
        }
        (Some(k), None)
    } else {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.m.abs() as f64, r.f)).collect();
        let mut distinct: Vec<i32> = rows.iter().map(|r| r.m.abs()).collect();
        distinct.sort();
        distinct.dedup();
        let cubic = if distinct.len() >= 4 { Some(fit_polynomial(&pts, 3)?) } else { None };
        (None, cubic)
    };

    Ok(ProfileReport { j: cfg.j, case: cfg.case, rows, kappa, cubic })
}
