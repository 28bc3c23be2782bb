//! Least-squares fits of scaling exponents.

use serde::Serialize;

use crate::error::{Error, Result};

/// Straight line `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of the data from the line.
    pub residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::Length { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::param("points", "a fit needs at least two points"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::param("points", "non-finite value in fit data"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::param("points", "abscissae are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    Ok(LineFit { slope, intercept, residual: (ss / n).sqrt() })
}

/// Slope of `log v` against `log s`; the base cancels.
pub fn fit_power_law(scan: &[f64], values: &[f64]) -> Result<LineFit> {
    if scan.iter().chain(values).any(|v| *v <= 0.0) {
        return Err(Error::param("points", "power-law fit needs positive data"));
    }
    let lx: Vec<f64> = scan.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Slope of `log₂ v` against a linear scan variable, e.g. a block index.
pub fn fit_dyadic_exponent(scan: &[f64], values: &[f64]) -> Result<LineFit> {
    if values.iter().any(|v| *v <= 0.0) {
        return Err(Error::param("points", "exponent fit needs positive data"));
    }
    let ly: Vec<f64> = values.iter().map(|v| v.log2()).collect();
    fit_line(scan, &ly)
}
