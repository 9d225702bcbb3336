//! Half-life `T_1/2`: the first downward crossing of `|O(t)| = 1/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::overlap::{OverlapEngine, OverlapSeries};

/// Bisection stops once the bracket is narrower than this fraction of the
/// current estimate.
pub const REFINE_RELATIVE_WIDTH: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfLifeResult {
    pub t_half: f64,
    pub crossing_bracket: (f64, f64),
    pub draws_used: usize,
    /// interquartile range over draws; zero for a single series
    pub spread: f64,
}

/// Index `i` of the first sample with `|O[i-1]| > 1/2 >= |O[i]|`.
fn first_crossing(abs: &[f64]) -> Option<usize> {
    abs.windows(2).position(|w| w[0] > 0.5 && w[1] <= 0.5).map(|i| i + 1)
}

fn interpolate(t0: f64, a0: f64, t1: f64, a1: f64) -> f64 {
    if a0 == a1 {
        return t1;
    }
    let s = ((a0 - 0.5) / (a0 - a1)).clamp(0.0, 1.0);
    // keep the invariant t_lo < t_half <= t_hi
    (t0 + s * (t1 - t0)).max(t0 + f64::EPSILON * t1.abs()).min(t1)
}

/// Narrows `[lo, hi]` (with `|O(lo)| > 1/2 >= |O(hi)|`) by bisection.
fn refine(
    mut lo: (f64, f64),
    mut hi: (f64, f64),
    probe: &dyn Fn(f64) -> f64,
) -> ((f64, f64), (f64, f64)) {
    for _ in 0..200 {
        let est = interpolate(lo.0, lo.1, hi.0, hi.1);
        if hi.0 - lo.0 < REFINE_RELATIVE_WIDTH * est {
            break;
        }
        let mid = 0.5 * (lo.0 + hi.0);
        let v = probe(mid);
        if v > 0.5 {
            lo = (mid, v);
        } else {
            hi = (mid, v);
        }
    }
    (lo, hi)
}

/// Half-life of a precomputed series. `probe`, when given, returns `|O(t)|`
/// at arbitrary `t` and is used to bisect the crossing bracket.
pub fn half_life(series: &OverlapSeries<f64>, probe: Option<&dyn Fn(f64) -> f64>) -> Result<HalfLifeResult> {
    half_life_samples(series.grid.times(), &series.abs(), probe)
}

pub fn half_life_samples(
    times: &[f64],
    abs: &[f64],
    probe: Option<&dyn Fn(f64) -> f64>,
) -> Result<HalfLifeResult> {
    let Some(i) = first_crossing(abs) else {
        return Err(Error::NotFound {
            what: "downward crossing of |O| = 1/2".into(),
            searched_to: times.last().copied().unwrap_or(0.0),
        });
    };
    let mut lo = (times[i - 1], abs[i - 1]);
    let mut hi = (times[i], abs[i]);
    if let Some(p) = probe {
        (lo, hi) = refine(lo, hi, p);
    }
    Ok(HalfLifeResult {
        t_half: interpolate(lo.0, lo.1, hi.0, hi.1),
        crossing_bracket: (lo.0, hi.0),
        draws_used: 1,
        spread: 0.0,
    })
}

/// Lazy search on a uniform grid: evaluates `engine` in parallel blocks from
/// `t = 0` and stops at the first crossing. The span `t_max` is doubled up to
/// `extensions` times (same spacing) before giving up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfLifeSearch {
    pub t_max: f64,
    pub points: usize,
    pub extensions: u32,
}

impl HalfLifeSearch {
    pub const DEFAULT_POINTS: usize = 2048;
    pub const DEFAULT_EXTENSIONS: u32 = 4;

    pub fn new(t_max: f64) -> Self {
        Self {
            t_max,
            points: Self::DEFAULT_POINTS,
            extensions: Self::DEFAULT_EXTENSIONS,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.t_max / (self.points - 1) as f64
    }

    /// Grid index limit including all extensions.
    pub fn last_index(&self) -> usize {
        (self.points - 1) << self.extensions
    }
}

const BLOCK: usize = 64;

/// Evaluates `|O|` block by block along the extended grid until `stop`
/// reports an index, returning sampled `(times, abs)` so far.
pub(crate) fn scan_blocks(
    engine: &dyn OverlapEngine<f64>,
    search: &HalfLifeSearch,
    stop: impl Fn(&[f64]) -> bool,
) -> (Vec<f64>, Vec<f64>) {
    use rayon::prelude::*;
    let h = search.spacing();
    let last = search.last_index();
    let mut times = Vec::new();
    let mut abs = Vec::new();
    let mut start = 0usize;
    while start <= last {
        let end = (start + BLOCK).min(last + 1);
        let block: Vec<(f64, f64)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let t = i as f64 * h;
                (t, engine.at(t).norm())
            })
            .collect();
        for (t, a) in block {
            times.push(t);
            abs.push(a);
        }
        if stop(&abs) {
            break;
        }
        start = end;
    }
    (times, abs)
}

pub fn half_life_search(engine: &dyn OverlapEngine<f64>, search: &HalfLifeSearch) -> Result<HalfLifeResult> {
    if !(search.t_max > 0.0) || search.points < 2 {
        return Err(Error::invalid("half-life search needs t_max > 0 and at least 2 points"));
    }
    let (times, abs) = scan_blocks(engine, search, |a| first_crossing(a).is_some());
    let probe = |t: f64| engine.at(t).norm();
    half_life_samples(&times, &abs, Some(&probe))
}
