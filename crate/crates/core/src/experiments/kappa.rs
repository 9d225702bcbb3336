//! Dephasing half-life scaling `T_1/2 = 1 / (kappa sigma sqrt(J) sqrt(1 - M^2/J^2))`.

use serde::{Deserialize, Serialize};

use super::stats::{self, fit_line, fit_power_law, fit_through_origin, PowerLawFit};
use super::{half_life_cells, FieldCase, HalfLifeCell};
use crate::error::{Error, Result};
use crate::overlap::CostBudget;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaConfig {
    pub j_values: Vec<u32>,
    /// `M = round(fraction * J)`
    pub m_fractions: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub b_z: f64,
    pub draws: usize,
    pub seed: u64,
    pub points: usize,
}

impl Default for KappaConfig {
    fn default() -> Self {
        Self {
            j_values: vec![50, 100, 200],
            m_fractions: vec![0.0, 0.5],
            sigma_values: vec![1e-4, 1e-3, 1e-2],
            b_z: 1.0,
            draws: 16,
            seed: 0,
            points: 2048,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaCell {
    pub two_j: u32,
    pub two_m: i32,
    pub sigma: f64,
    pub t_half: f64,
    pub spread: f64,
    pub f: f64,
    /// `sqrt(J) sqrt(1 - M^2/J^2)`
    pub x: f64,
    pub per_draw: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaVariation {
    pub two_j: u32,
    pub two_m: i32,
    pub f_min: f64,
    pub f_max: f64,
    /// `(f_max - f_min) / median f`
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub cells: Vec<KappaCell>,
    /// slope of `f` against `x` through the origin
    pub kappa: f64,
    pub kappa_rms: f64,
    /// diagnostic free-intercept fit `(intercept, slope)`
    pub free_fit: (f64, f64),
    /// `f` against `x` on log-log axes
    pub log_log: PowerLawFit,
    pub sigma_variation: Vec<SigmaVariation>,
    pub max_sigma_variation: f64,
    pub excluded: Vec<String>,
}

pub fn x_coordinate(two_j: u32, two_m: i32) -> f64 {
    let j = two_j as f64 / 2.0;
    let m = two_m as f64 / 2.0;
    j.sqrt() * (1.0 - (m * m) / (j * j)).max(0.0).sqrt()
}

/// Fits a table of measured cells.
pub fn kappa_from_cells(cells: Vec<KappaCell>, excluded: Vec<String>) -> Result<KappaReport> {
    let pts: Vec<(f64, f64)> = cells.iter().map(|c| (c.x, c.f)).collect();
    let (kappa, kappa_rms) = fit_through_origin(&pts)?;
    let free_fit = fit_line(&pts)?;
    let log_log = fit_power_law(&pts)?;

    let mut keys: Vec<(u32, i32)> = cells.iter().map(|c| (c.two_j, c.two_m)).collect();
    keys.sort();
    keys.dedup();
    let sigma_variation: Vec<SigmaVariation> = keys
        .into_iter()
        .map(|(two_j, two_m)| {
            let fs: Vec<f64> = cells
                .iter()
                .filter(|c| c.two_j == two_j && c.two_m == two_m)
                .map(|c| c.f)
                .collect();
            let f_min = fs.iter().copied().fold(f64::INFINITY, f64::min);
            let f_max = fs.iter().copied().fold(0.0, f64::max);
            SigmaVariation {
                two_j,
                two_m,
                f_min,
                f_max,
                relative: (f_max - f_min) / stats::median(&fs),
            }
        })
        .collect();
    let max_sigma_variation = sigma_variation.iter().map(|v| v.relative).fold(0.0, f64::max);
    Ok(KappaReport {
        cells,
        kappa,
        kappa_rms,
        free_fit,
        log_log,
        sigma_variation,
        max_sigma_variation,
        excluded,
    })
}

pub(crate) fn to_kappa_cell(c: HalfLifeCell) -> KappaCell {
    KappaCell {
        x: x_coordinate(c.two_j, c.two_m),
        two_j: c.two_j,
        two_m: c.two_m,
        sigma: c.sigma,
        t_half: c.t_half.t_half,
        spread: c.t_half.spread,
        f: c.f,
        per_draw: c.per_draw,
    }
}

pub fn kappa_experiment(cfg: &KappaConfig, budget: CostBudget) -> Result<KappaReport> {
    if cfg.j_values.is_empty() || cfg.m_fractions.is_empty() || cfg.sigma_values.is_empty() {
        return Err(Error::invalid("kappa sweep needs J, M and sigma values"));
    }
    let mut cells = Vec::new();
    let mut excluded = Vec::new();
    for &j in &cfg.j_values {
        if j == 0 {
            return Err(Error::invalid("J must be >= 1"));
        }
        for &frac in &cfg.m_fractions {
            if !(-1.0..=1.0).contains(&frac) {
                return Err(Error::invalid(format!("M fraction {frac} outside [-1, 1]")));
            }
            let m = (frac * j as f64).round() as i32;
            if m.unsigned_abs() == j {
                excluded.push(format!("J={j} M={m}: |M| = J does not decay"));
                continue;
            }
            for &sigma in &cfg.sigma_values {
                cells.push((2 * j, 2 * m, FieldCase::Dephasing { b_z: cfg.b_z, sigma }));
            }
        }
    }
    let measured = half_life_cells(&cells, cfg.draws, cfg.seed, cfg.points, budget)?;
    kappa_from_cells(measured.into_iter().map(to_kappa_cell).collect(), excluded)
}
