//! Monte Carlo sweeps over `(J, M, sigma, draw)` cells that measure
//! half-lives, off-diagonal peaks and revivals, and the scaling laws fitted
//! to them.
//!
//! Every draw gets its own seed derived from the master seed and its flat
//! cell index, and results are merged by index, so the output does not depend
//! on how the worker pool schedules tasks.

pub mod halflife;
pub mod kappa;
pub mod offdiag;
pub mod profile;
pub mod rabi;
pub mod revival;
pub mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{sample_ensemble, AtomicEnsemble, DickeLabel, FieldDistribution};
use crate::error::{Error, Result};
use crate::overlap::{prepare, CostBudget, EngineId, OverlapEngine};

pub use halflife::{half_life, half_life_search, HalfLifeResult, HalfLifeSearch};
pub use kappa::{kappa_experiment, KappaConfig, KappaReport};
pub use offdiag::{offdiag_experiment, OffDiagConfig, OffDiagReport, OffDiagStats};
pub use profile::{m_profile, ProfileConfig, ProfileReport};
pub use rabi::{rabi_experiment, RabiConfig, RabiReport};
pub use revival::{revival_period, revival_scan, RevivalEvent};
pub use stats::{fit_power_law, PowerLawFit};

/// Span of the default time grid in units of `1/(sigma sqrt(J))`.
pub const DEFAULT_SPAN: f64 = 8.0;

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of task `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master ^ mix(index))
}

/// The two stochastic field models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "lowercase")]
pub enum FieldCase {
    /// `B^(k) = (0, 0, b_z + sigma xi)`.
    Dephasing { b_z: f64, sigma: f64 },
    /// `B^(k) = (b_r + sigma xi, b_r + sigma xi', 0)`.
    Rabi { b_r: f64, sigma: f64 },
}

impl FieldCase {
    pub fn sigma(&self) -> f64 {
        match *self {
            FieldCase::Dephasing { sigma, .. } | FieldCase::Rabi { sigma, .. } => sigma,
        }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        match self {
            FieldCase::Dephasing { b_z, .. } => FieldCase::Dephasing { b_z, sigma },
            FieldCase::Rabi { b_r, .. } => FieldCase::Rabi { b_r, sigma },
        }
    }

    pub fn distribution(&self, seed: u64) -> Result<FieldDistribution> {
        match *self {
            FieldCase::Dephasing { b_z, sigma } => FieldDistribution::dephasing(b_z, sigma, seed),
            FieldCase::Rabi { b_r, sigma } => FieldDistribution::rabi(b_r, sigma, seed),
        }
    }

    pub fn engine(&self) -> EngineId {
        match self {
            FieldCase::Dephasing { .. } => EngineId::Dephasing,
            FieldCase::Rabi { .. } => EngineId::General,
        }
    }

    /// `DEFAULT_SPAN / (sigma sqrt(J))`.
    pub fn default_t_max(&self, j: f64) -> f64 {
        DEFAULT_SPAN / (self.sigma() * j.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.sigma();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::invalid("sigma must be positive and finite"));
        }
        Ok(())
    }
}

/// Label `|J, M>` for integer-or-half-integer `J = two_j / 2`.
pub(crate) fn label(two_j: u32, two_m: i32) -> Result<DickeLabel> {
    DickeLabel::new(two_j, two_m)
}

/// One sampled ensemble for `case`.
pub(crate) fn draw_ensemble(case: &FieldCase, two_j: u32, seed: u64) -> Result<AtomicEnsemble<f64>> {
    sample_ensemble(&case.distribution(seed)?, two_j as usize)
}

pub(crate) fn engine_for<'a>(
    case: &FieldCase,
    ensemble: &'a AtomicEnsemble<f64>,
    m_prime: DickeLabel,
    m: DickeLabel,
    budget: CostBudget,
) -> Result<Box<dyn OverlapEngine<f64> + 'a>> {
    prepare(case.engine(), ensemble, m_prime, m, budget)
}

/// Runs `task(i)` for `i in 0..count` on the worker pool, in index order.
pub(crate) fn run_indexed<R: Send>(count: usize, task: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    (0..count).into_par_iter().map(task).collect()
}

/// Median half-life of `|O_MM|` over draws, for one `(J, M, case)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfLifeCell {
    pub two_j: u32,
    pub two_m: i32,
    pub sigma: f64,
    pub per_draw: Vec<f64>,
    pub t_half: HalfLifeResult,
    /// `1 / (T_1/2 sigma)`
    pub f: f64,
}

/// `(J, M)` pairs times `draws`, each evaluated with the case's engine.
pub(crate) fn half_life_cells(
    cells: &[(u32, i32, FieldCase)],
    draws: usize,
    master_seed: u64,
    points: usize,
    budget: CostBudget,
) -> Result<Vec<HalfLifeCell>> {
    if draws == 0 {
        return Err(Error::invalid("draws must be >= 1"));
    }
    for (_, _, c) in cells {
        c.validate()?;
    }
    let results = run_indexed(cells.len() * draws, |task| -> Result<HalfLifeResult> {
        let (two_j, two_m, case) = cells[task / draws];
        let l = label(two_j, two_m)?;
        let ens = draw_ensemble(&case, two_j, derive_seed(master_seed, task as u64))?;
        let eng = engine_for(&case, &ens, l, l, budget)?;
        let search = HalfLifeSearch {
            points,
            ..HalfLifeSearch::new(case.default_t_max(two_j as f64 / 2.0))
        };
        half_life_search(eng.as_ref(), &search)
    });
    let mut out = Vec::with_capacity(cells.len());
    for (ci, &(two_j, two_m, case)) in cells.iter().enumerate() {
        let draws_here = &results[ci * draws..(ci + 1) * draws];
        let mut per_draw = Vec::with_capacity(draws);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for r in draws_here {
            let r = match r {
                Ok(r) => r,
                Err(e) => return Err(clone_error(e)),
            };
            per_draw.push(r.t_half);
            lo = lo.min(r.crossing_bracket.0);
            hi = hi.max(r.crossing_bracket.1);
        }
        let t_half = stats::median(&per_draw);
        let summary = HalfLifeResult {
            t_half,
            crossing_bracket: (lo.min(t_half), hi.max(t_half)),
            draws_used: draws,
            spread: stats::interquartile_range(&per_draw),
        };
        out.push(HalfLifeCell {
            two_j,
            two_m,
            sigma: case.sigma(),
            per_draw,
            f: 1.0 / (t_half * case.sigma()),
            t_half: summary,
        });
    }
    Ok(out)
}

/// Errors are not `Clone` (they may carry `io::Error`); rebuild the variants
/// that sweeps can produce.
pub(crate) fn clone_error(e: &Error) -> Error {
    match e {
        Error::InvalidParameter(s) => Error::InvalidParameter(s.clone()),
        Error::WrongEngine(s) => Error::WrongEngine(s.clone()),
        Error::ResourceLimit { what, estimate, limit } => Error::ResourceLimit {
            what: what.clone(),
            estimate: *estimate,
            limit: *limit,
        },
        Error::NotFound { what, searched_to } => Error::NotFound {
            what: what.clone(),
            searched_to: *searched_to,
        },
        other => Error::InvalidParameter(other.to_string()),
    }
}
