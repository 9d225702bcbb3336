//! Revivals: times where `|O_MM(t)|` returns to within `tolerance` of one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::offdiag::golden_max;
use super::stats::fit_line;
use crate::ensemble::{AtomicEnsemble, DickeLabel};
use crate::error::{Error, Result};
use crate::overlap::{DephasingEngine, OverlapEngine, TimeGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevivalEvent {
    pub time: f64,
    pub value: f64,
}

/// Local maxima of `|O|` below this on the grid are not refined.
const CANDIDATE_FLOOR: f64 = 0.5;

pub fn revival_scan(
    ensemble: &AtomicEnsemble<f64>,
    m: DickeLabel,
    t_range: (f64, f64),
    points: usize,
    tolerance: f64,
) -> Result<Vec<RevivalEvent>> {
    let eng = DephasingEngine::prepare(ensemble, m)?;
    revival_scan_with(&eng, t_range, points, tolerance)
}

pub fn revival_scan_with(
    engine: &dyn OverlapEngine<f64>,
    t_range: (f64, f64),
    points: usize,
    tolerance: f64,
) -> Result<Vec<RevivalEvent>> {
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::invalid("revival tolerance must lie in (0, 1)"));
    }
    let grid = TimeGrid::linspace(t_range.0, t_range.1, points)?;
    let times = grid.times();
    let h = times[1] - times[0];
    let abs: Vec<f64> = times.par_iter().map(|&t| engine.at(t).norm()).collect();
    let threshold = 1.0 - tolerance;
    let n = abs.len();
    let probe = |t: f64| engine.at(t).norm();
    // the initial plateau around t = 0 is not a revival
    let start = if times[0] == 0.0 {
        abs.iter().position(|&a| a < threshold).unwrap_or(n)
    } else {
        0
    };

    let candidates: Vec<usize> = (start..n)
        .filter(|&i| {
            let left = i == 0 || abs[i] >= abs[i - 1];
            let right = i + 1 == n || abs[i] >= abs[i + 1];
            (left && right && abs[i] >= CANDIDATE_FLOOR) || abs[i] >= threshold
        })
        .collect();

    let mut events: Vec<RevivalEvent> = candidates
        .par_iter()
        .map(|&i| {
            let lo = if i == 0 { times[0] } else { times[i - 1] };
            let hi = if i + 1 == n { times[n - 1] } else { times[i + 1] };
            let lo = if start > 0 { lo.max(times[start]) } else { lo };
            let (t, v) = golden_max(&probe, lo, hi, 1e-10 * hi.abs().max(h));
            if v >= abs[i] {
                RevivalEvent { time: t, value: v }
            } else {
                RevivalEvent { time: times[i], value: abs[i] }
            }
        })
        .filter(|e| e.value >= threshold)
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut clustered: Vec<RevivalEvent> = Vec::new();
    for e in events {
        match clustered.last_mut() {
            Some(last) if e.time - last.time < 2.0 * h => {
                if e.value > last.value {
                    *last = e;
                }
            }
            _ => clustered.push(e),
        }
    }
    Ok(clustered)
}

/// Least-squares spacing of successive revival times.
pub fn revival_period(events: &[RevivalEvent]) -> Option<f64> {
    if events.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = events.iter().enumerate().map(|(i, e)| (i as f64, e.time)).collect();
    fit_line(&pts).ok().map(|(_, slope)| slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_ensemble, FieldDistribution};
    use std::f64::consts::PI;

    #[test]
    fn commensurate_ten_atoms() {
        let e = AtomicEnsemble::longitudinal((1..=10).map(|k| k as f64)).unwrap();
        let m = DickeLabel::new(10, 8).unwrap();
        let ev = revival_scan(&e, m, (0.0, 4.0 * PI), 4001, 1e-6).unwrap();
        let times: Vec<f64> = ev.iter().map(|e| e.time).collect();
        assert_eq!(times.len(), 4, "{times:?}");
        for (k, t) in times.iter().enumerate() {
            assert!((t - (k + 1) as f64 * PI).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn two_atoms_random_gap() {
        let e = AtomicEnsemble::longitudinal([0.731, 1.402]).unwrap();
        let d = (1.402 - 0.731) / 2.0;
        let m = DickeLabel::new(2, 0).unwrap();
        let ev = revival_scan(&e, m, (0.0, 40.0), 2001, 1e-6).unwrap();
        let p = revival_period(&ev).unwrap();
        assert!((p / (PI / (2.0 * d)) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn no_revival_for_large_gaussian_ensemble() {
        let dist = FieldDistribution::dephasing(1.0, 0.01, 9).unwrap();
        let e: AtomicEnsemble<f64> = sample_ensemble(&dist, 400).unwrap();
        let m = DickeLabel::new(400, 0).unwrap();
        // T_1/2 ~ 1 / (1.2 sigma sqrt(J)) ~ 6
        let ev = revival_scan(&e, m, (0.0, 600.0), 4000, 1e-3).unwrap();
        assert!(ev.is_empty(), "{ev:?}");
    }
}
