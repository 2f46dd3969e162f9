//! Empirical convergence rates from log-log least squares.

use crate::error::{Error, Result};

pub const DEFAULT_BURN_IN: f64 = 0.2;

/// Least-squares slope of `ln(value)` against `ln(t)` after dropping the
/// leading `burn_in` fraction of the points.
pub fn fit_loglog_slope(series: &[(f64, f64)], burn_in: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(Error::contract(format!(
            "burn-in fraction must lie in [0, 1), got {burn_in}"
        )));
    }
    let skip = (burn_in * series.len() as f64).floor() as usize;
    let kept = &series[skip..];
    if kept.len() < 10 {
        return Err(Error::RateUndefined(format!(
            "{} points remain after burn-in, at least 10 are needed",
            kept.len()
        )));
    }
    let mut logs = Vec::with_capacity(kept.len());
    for &(t, v) in kept {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::RateUndefined(format!("nonpositive abscissa {t}")));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::RateUndefined(format!("value {v} at t = {t} has no logarithm")));
        }
        logs.push((t.ln(), v.ln()));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::RateUndefined("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}
