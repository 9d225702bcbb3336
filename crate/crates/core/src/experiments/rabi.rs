//! Inhomogeneous-Rabi half-life scaling `f_{M=0} = kappa_1 sqrt(J)`.

use serde::{Deserialize, Serialize};

use super::kappa::{to_kappa_cell, KappaCell};
use super::stats::{fit_power_law, fit_through_origin, PowerLawFit};
use super::{half_life_cells, FieldCase};
use crate::error::{Error, Result};
use crate::overlap::CostBudget;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiConfig {
    pub j_values: Vec<u32>,
    pub b_r: f64,
    pub sigma_r: f64,
    pub draws: usize,
    pub seed: u64,
    pub points: usize,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            j_values: vec![25, 50, 100],
            b_r: 10.0,
            sigma_r: 1e-2,
            draws: 8,
            seed: 0,
            points: 2048,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiReport {
    pub cells: Vec<KappaCell>,
    /// slope of `f` against `sqrt(J)` through the origin
    pub kappa1: f64,
    pub kappa1_rms: f64,
    /// `f` against `J`
    pub power_law: PowerLawFit,
}

pub fn rabi_from_cells(cells: Vec<KappaCell>) -> Result<RabiReport> {
    let sqrt_pts: Vec<(f64, f64)> = cells.iter().map(|c| ((c.two_j as f64 / 2.0).sqrt(), c.f)).collect();
    let (kappa1, kappa1_rms) = fit_through_origin(&sqrt_pts)?;
    let j_pts: Vec<(f64, f64)> = cells.iter().map(|c| (c.two_j as f64 / 2.0, c.f)).collect();
    Ok(RabiReport {
        cells,
        kappa1,
        kappa1_rms,
        power_law: fit_power_law(&j_pts)?,
    })
}

pub fn rabi_experiment(cfg: &RabiConfig, budget: CostBudget) -> Result<RabiReport> {
    if cfg.j_values.contains(&0) || cfg.j_values.is_empty() {
        return Err(Error::invalid("Rabi sweep needs J values >= 1"));
    }
    let case = FieldCase::Rabi { b_r: cfg.b_r, sigma: cfg.sigma_r };
    let cells: Vec<(u32, i32, FieldCase)> = cfg.j_values.iter().map(|&j| (2 * j, 0, case)).collect();
    let measured = half_life_cells(&cells, cfg.draws, cfg.seed, cfg.points, budget)?;
    rabi_from_cells(measured.into_iter().map(to_kappa_cell).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_law_gives_exact_kappa1() {
        let cells = [25u32, 50, 100]
            .iter()
            .map(|&j| {
                let f = 0.76 * (j as f64).sqrt();
                KappaCell {
                    two_j: 2 * j,
                    two_m: 0,
                    sigma: 0.01,
                    t_half: 1.0 / (f * 0.01),
                    spread: 0.0,
                    f,
                    x: (j as f64).sqrt(),
                    per_draw: vec![],
                }
            })
            .collect();
        let r = rabi_from_cells(cells).unwrap();
        assert!((r.kappa1 - 0.76).abs() < 1e-12);
        assert!((r.power_law.exponent - 0.5).abs() < 1e-12);
    }
}
