//! `O_{M'M}(t) = <J,M'| U_0^dagger(t) U(t) |J,M>` by three algorithms of
//! different scope and cost:
//!
//! * [`oracle`]: exponential-memory statevector, `N <= 22`.
//! * [`dephasing`]: elementary symmetric polynomials, pure-`z` fields only.
//! * [`general`]: truncated two-variable polynomial product, any fields.
//!
//! Every engine is stateless per time point, so grids need not be uniform and
//! time points are evaluated in parallel; results are assembled by grid index.

pub mod dephasing;
pub mod general;
pub mod leakage;
pub mod oracle;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{AtomicEnsemble, DickeLabel, FieldVector};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub use dephasing::{dephasing_overlap, DephasingEngine};
pub use general::{general_overlap, CostBudget, GeneralEngine};
pub use leakage::{leakage, LeakageSeries};
pub use oracle::{oracle_overlap, OracleEngine, ORACLE_MAX_ATOMS};

/// Strictly increasing, non-negative, finite sample times.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid<T> {
    times: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(times: Vec<T>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("time grid is empty"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("time grid contains a non-finite value"));
        }
        if times[0] < T::zero() {
            return Err(Error::invalid("time grid starts before t = 0"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time grid is not strictly increasing"));
        }
        Ok(Self { times })
    }

    /// `points` equally spaced samples on `[0, t_max]`.
    pub fn uniform(t_max: T, points: usize) -> Result<Self> {
        Self::linspace(T::zero(), t_max, points)
    }

    pub fn linspace(t_min: T, t_max: T, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::invalid("a uniform grid needs at least two points"));
        }
        if !(t_max > t_min) {
            return Err(Error::invalid("grid end must exceed its start"));
        }
        let step = (t_max - t_min) / T::cast(points - 1);
        let mut times: Vec<T> = (0..points).map(|i| t_min + step * T::cast(i)).collect();
        times[points - 1] = t_max;
        Self::new(times)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> T {
        *self.times.last().unwrap()
    }
}

/// Which algorithm produced a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineId {
    Oracle,
    Dephasing,
    General,
}

impl fmt::Display for EngineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineId::Oracle => "oracle",
            EngineId::Dephasing => "dephasing",
            EngineId::General => "general",
        })
    }
}

/// Engine requested by a caller; `Auto` resolves per ensemble.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    Oracle,
    Dephasing,
    General,
    #[default]
    Auto,
}

impl EngineChoice {
    /// `Auto` picks the dephasing engine whenever every transverse component
    /// vanishes, otherwise the general engine. The oracle is never chosen
    /// implicitly.
    pub fn resolve<T: Real>(self, ensemble: &AtomicEnsemble<T>) -> EngineId {
        match self {
            EngineChoice::Oracle => EngineId::Oracle,
            EngineChoice::Dephasing => EngineId::Dephasing,
            EngineChoice::General => EngineId::General,
            EngineChoice::Auto if ensemble.is_longitudinal() => EngineId::Dephasing,
            EngineChoice::Auto => EngineId::General,
        }
    }
}

impl FromStr for EngineChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "dephasing" => Ok(Self::Dephasing),
            "general" => Ok(Self::General),
            "auto" => Ok(Self::Auto),
            other => Err(Error::invalid(format!(
                "unknown engine `{other}` (expected oracle, dephasing, general or auto)"
            ))),
        }
    }
}

impl fmt::Display for EngineChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineChoice::Oracle => "oracle",
            EngineChoice::Dephasing => "dephasing",
            EngineChoice::General => "general",
            EngineChoice::Auto => "auto",
        })
    }
}

/// Provenance attached to every series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub engine: EngineId,
    pub two_j: u32,
    pub two_m_prime: i32,
    pub two_m: i32,
    pub seed: Option<u64>,
    pub ensemble_hash: String,
    pub mean_field: FieldVector<f64>,
    /// Estimated number of trustworthy decimal digits in each value.
    pub significant_digits: f64,
}

/// `O_{M'M}(t)` sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapSeries<T> {
    pub grid: TimeGrid<T>,
    pub values: Vec<Complex<T>>,
    pub meta: SeriesMeta,
}

impl<T: Real> OverlapSeries<T> {
    pub fn abs(&self) -> Vec<T> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// An overlap evaluator prepared for one ensemble and one label pair.
pub trait OverlapEngine<T: Real>: Sync {
    fn id(&self) -> EngineId;

    /// `O_{M'M}(t)` at a single time; `t` may be negative.
    fn at(&self, t: T) -> Complex<T>;

    fn meta(&self) -> SeriesMeta;

    /// Rough number of complex multiply-adds for one time point.
    fn cost_per_point(&self) -> f64;

    /// Parallel evaluation on `grid`; output order follows the grid.
    fn series(&self, grid: &TimeGrid<T>) -> OverlapSeries<T> {
        let values = grid.times().par_iter().map(|&t| self.at(t)).collect();
        OverlapSeries {
            grid: grid.clone(),
            values,
            meta: self.meta(),
        }
    }
}

/// `O_{M'M} = 0` for `M' != M` when excitation number is conserved.
struct ZeroEngine {
    meta: SeriesMeta,
}

impl<T: Real> OverlapEngine<T> for ZeroEngine {
    fn id(&self) -> EngineId {
        EngineId::Dephasing
    }

    fn at(&self, _t: T) -> Complex<T> {
        Complex::new(T::zero(), T::zero())
    }

    fn meta(&self) -> SeriesMeta {
        self.meta.clone()
    }

    fn cost_per_point(&self) -> f64 {
        0.0
    }
}

pub(crate) fn base_meta<T: Real>(
    engine: EngineId,
    ensemble: &AtomicEnsemble<T>,
    m_prime: DickeLabel,
    m: DickeLabel,
    significant_digits: f64,
) -> SeriesMeta {
    SeriesMeta {
        engine,
        two_j: m.two_j(),
        two_m_prime: m_prime.two_m(),
        two_m: m.two_m(),
        seed: ensemble.seed(),
        ensemble_hash: ensemble.fingerprint(),
        mean_field: ensemble.mean().cast(),
        significant_digits,
    }
}

/// Builds the evaluator for `engine`. The dephasing engine answers exact zero
/// for off-diagonal labels.
pub fn prepare<'a, T: Real>(
    engine: EngineId,
    ensemble: &'a AtomicEnsemble<T>,
    m_prime: DickeLabel,
    m: DickeLabel,
    budget: CostBudget,
) -> Result<Box<dyn OverlapEngine<T> + 'a>> {
    m.check_atoms(ensemble.n_atoms())?;
    m_prime.check_atoms(ensemble.n_atoms())?;
    Ok(match engine {
        EngineId::Oracle => Box::new(OracleEngine::prepare(ensemble, m_prime, m)?),
        EngineId::Dephasing if m_prime != m => {
            DephasingEngine::prepare(ensemble, m)?;
            Box::new(ZeroEngine {
                meta: base_meta(EngineId::Dephasing, ensemble, m_prime, m, f64::INFINITY),
            })
        }
        EngineId::Dephasing => Box::new(DephasingEngine::prepare(ensemble, m)?),
        EngineId::General => Box::new(GeneralEngine::prepare(ensemble, m_prime, m, budget)?),
    })
}

/// One-shot `O_{M'M}` series with the given engine, checking the cost budget
/// against the whole grid.
pub fn overlap_series<T: Real>(
    engine: EngineId,
    ensemble: &AtomicEnsemble<T>,
    m_prime: DickeLabel,
    m: DickeLabel,
    grid: &TimeGrid<T>,
    budget: CostBudget,
) -> Result<OverlapSeries<T>> {
    let e = prepare(engine, ensemble, m_prime, m, budget)?;
    budget.check(e.cost_per_point() * grid.len() as f64, "overlap series")?;
    Ok(e.series(grid))
}
