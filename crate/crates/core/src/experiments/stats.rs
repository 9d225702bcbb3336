//! Order statistics and least-squares fits used by the sweeps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-interpolated sample quantile (the "type 7" definition).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub fn interquartile_range(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}

/// `y = amplitude * x^exponent`, fitted by least squares on `(ln x, ln y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub exponent: f64,
    /// root mean square of the log residuals
    pub residual: f64,
    pub points: Vec<(f64, f64)>,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * x.powf(self.exponent)
    }
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::invalid("power-law fit needs positive finite points"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power-law fit needs at least two distinct x values"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = (logs
        .iter()
        .map(|p| (p.1 - intercept - exponent * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerLawFit {
        amplitude: intercept.exp(),
        exponent,
        residual,
        points: points.to_vec(),
    })
}

/// Least-squares slope of `y = slope * x` and the RMS of the residuals.
pub fn fit_through_origin(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    if points.is_empty() || sxx == 0.0 {
        return Err(Error::invalid("fit through the origin needs a nonzero x"));
    }
    let slope = points.iter().map(|p| p.0 * p.1).sum::<f64>() / sxx;
    let rms = (points.iter().map(|p| (p.1 - slope * p.0).powi(2)).sum::<f64>() / points.len() as f64).sqrt();
    Ok((slope, rms))
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let c = fit_polynomial(points, 1)?;
    Ok((c[0], c[1]))
}

/// Least-squares polynomial coefficients, constant term first.
pub fn fit_polynomial(points: &[(f64, f64)], degree: usize) -> Result<Vec<f64>> {
    if points.len() <= degree {
        return Err(Error::invalid(format!(
            "degree-{degree} fit needs more than {degree} points"
        )));
    }
    // scale x into [-1, 1] so the Vandermonde matrix stays well conditioned
    let scale = points.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(points.len(), degree + 1, |r, c| (points[r].0 / scale).powi(c as i32));
    let b = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::invalid(format!("polynomial fit failed: {e}")))?;
    Ok(sol.iter().enumerate().map(|(c, v)| v / scale.powi(c as i32)).collect())
}
