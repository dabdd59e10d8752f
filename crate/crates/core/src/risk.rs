//! Risk measures on a latent factor path: trailing trend, volatility and
//! percentile position.

use std::fmt;

use crate::error::{DfmError, Result};
use crate::timeseries::TimeIndex;

/// Default trend threshold, per period in factor standard deviations.
pub const DEFAULT_TREND_THRESHOLD: f64 = 0.01;
pub const DEFAULT_TREND_WINDOW: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendDirection {
    Rising,
    Falling,
    Flat,
}

impl fmt::Display for TrendDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrendDirection::Rising => "rising",
            TrendDirection::Falling => "falling",
            TrendDirection::Flat => "flat",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trend {
    pub direction: TrendDirection,
    /// Least-squares slope per period, in the path's own units.
    pub slope: f64,
    /// Slope divided by the volatility of the whole path (0 for a constant path).
    pub standardized_slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendOptions {
    pub window: usize,
    pub threshold: f64,
}

impl Default for TrendOptions {
    fn default() -> Self {
        TrendOptions { window: DEFAULT_TREND_WINDOW, threshold: DEFAULT_TREND_THRESHOLD }
    }
}

/// Least-squares slope over the trailing `window` values against the ramp
/// `0..window`, classified against `threshold` in standard-deviation units.
pub fn latent_trend(path: &[f64], options: &TrendOptions) -> Result<Trend> {
    let window = options.window;
    if path.is_empty() {
        return Err(DfmError::EmptySeries);
    }
    if window < 2 {
        return Err(DfmError::InvalidArgument(format!("trend window must be at least 2, got {window}")));
    }
    if window > path.len() {
        return Err(DfmError::WindowTooLong { window, len: path.len() });
    }
    let tail = &path[path.len() - window..];
    let n = window as f64;
    let t_mean = (n - 1.0) / 2.0;
    let y_mean = tail.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in tail.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (y - y_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let sd = volatility(path)?;
    let standardized_slope = if sd > 0.0 { slope / sd } else { 0.0 };
    let direction = if standardized_slope > options.threshold {
        TrendDirection::Rising
    } else if standardized_slope < -options.threshold {
        TrendDirection::Falling
    } else {
        TrendDirection::Flat
    };
    Ok(Trend { direction, slope, standardized_slope })
}

/// Population standard deviation, `sqrt((1/N) Σ (x_t − μ)²)`.
pub fn volatility(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(DfmError::EmptySeries);
    }
    let n = series.len() as f64;
    let mut sum = 0.0;
    for x in series {
        sum += x;
    }
    let mu = sum / n;
    let mut ss = 0.0;
    for x in series {
        ss += (x - mu) * (x - mu);
    }
    Ok(((1.0 / n) * ss).sqrt())
}

/// 1-based order-statistic index `ceil(p·(N+1))` clamped into `[1, N]`.
///
/// Products within rounding error of an integer are treated as that
/// integer, so `p = 0.07, N = 99` selects index 7 rather than 8.
pub fn percentile_index(n: usize, p: f64) -> Result<usize> {
    if n == 0 {
        return Err(DfmError::EmptySeries);
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(DfmError::InvalidP(p));
    }
    let x = p * (n as f64 + 1.0);
    let nearest = x.round();
    let raw = if (x - nearest).abs() <= 1e-9 * x.max(1.0) { nearest } else { x.ceil() };
    Ok((raw as usize).clamp(1, n))
}

/// Order statistic at [`percentile_index`], without interpolation.
pub fn percentile_value(series: &[f64], p: f64) -> Result<f64> {
    let idx = percentile_index(series.len(), p)?;
    if series.iter().any(|v| v.is_nan()) {
        return Err(DfmError::NonFiniteValue("percentile of a series with missing values".into()));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[idx - 1])
}

/// Fraction of observations strictly below `x`.
pub fn percentile_rank(series: &[f64], x: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(DfmError::EmptySeries);
    }
    let below = series.iter().filter(|&&v| v < x).count();
    Ok(below as f64 / series.len() as f64)
}

/// Risk summary for a factor path. With `invert` set, the path is negated
/// first so that rising values always mean rising risk.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSeries {
    pub index: TimeIndex,
    pub factor: Vec<f64>,
    pub trend: Trend,
    pub volatility: f64,
    pub percentile_of_latest: f64,
    pub inverted: bool,
}

impl RiskSeries {
    pub fn new(index: TimeIndex, path: &[f64], options: &TrendOptions, invert: bool) -> Result<RiskSeries> {
        if path.len() != index.len() {
            return Err(DfmError::DimensionMismatch(format!(
                "factor path has {} values for {} periods",
                path.len(),
                index.len()
            )));
        }
        let factor: Vec<f64> = if invert { path.iter().map(|v| -v).collect() } else { path.to_vec() };
        let trend = latent_trend(&factor, options)?;
        let volatility = volatility(&factor)?;
        let latest = *factor.last().ok_or(DfmError::EmptySeries)?;
        let percentile_of_latest = percentile_rank(&factor, latest)?;
        Ok(RiskSeries { index, factor, trend, volatility, percentile_of_latest, inverted: invert })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trend(path: &[f64], window: usize) -> Trend {
        latent_trend(path, &TrendOptions { window, threshold: DEFAULT_TREND_THRESHOLD }).unwrap()
    }

    #[test]
    fn trend_examples() {
        let up = trend(&[0.0, 1.0, 2.0, 3.0], 4);
        assert_eq!(up.direction, TrendDirection::Rising);
        assert!((up.slope - 1.0).abs() < 1e-15);
        let flat = trend(&[2.0; 5], 4);
        assert_eq!(flat.direction, TrendDirection::Flat);
        assert_eq!(flat.slope, 0.0);
        let down = trend(&[3.0, 2.0, 1.0, 0.0], 4);
        assert_eq!(down.direction, TrendDirection::Falling);
        assert!((down.slope + 1.0).abs() < 1e-15);
        let opts = TrendOptions { window: 5, threshold: 0.01 };
        assert_eq!(latent_trend(&[1.0; 4], &opts), Err(DfmError::WindowTooLong { window: 5, len: 4 }));
    }

    #[test]
    fn volatility_examples() {
        assert_eq!(volatility(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(volatility(&[0.0, 2.0]).unwrap(), 1.0);
        assert!((volatility(&[1.0, 2.0, 3.0, 4.0]).unwrap() - 1.1180339887).abs() < 1e-10);
        assert_eq!(volatility(&[]), Err(DfmError::EmptySeries));
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile_value(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 3.0);
        assert_eq!(percentile_value(&[10.0], 0.9).unwrap(), 10.0);
        assert_eq!(percentile_value(&[5.0, 1.0, 3.0], 0.25).unwrap(), 1.0);
        assert_eq!(percentile_value(&[1.0, 2.0, 3.0, 4.0], 0.9).unwrap(), 4.0);
        assert_eq!(percentile_value(&[1.0], 1.0), Err(DfmError::InvalidP(1.0)));
        assert_eq!(percentile_value(&[], 0.5), Err(DfmError::EmptySeries));
        assert_eq!(percentile_index(99, 0.07).unwrap(), 7);
    }

    #[test]
    fn rank_examples() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile_rank(&s, 5.0).unwrap(), 0.8);
        assert_eq!(percentile_rank(&s, 0.0).unwrap(), 0.0);
        assert_eq!(percentile_rank(&[2.0, 2.0], 2.0).unwrap(), 0.0);
    }

    #[test]
    fn risk_series_orientation() {
        let idx = TimeIndex::new(crate::timeseries::Period::annual(2000), 4).unwrap();
        let r =
            RiskSeries::new(idx, &[0.0, 1.0, 2.0, 3.0], &TrendOptions { window: 4, threshold: 0.01 }, true).unwrap();
        assert_eq!(r.trend.direction, TrendDirection::Falling);
        assert_eq!(r.percentile_of_latest, 0.0);
        assert!(RiskSeries::new(idx, &[0.0], &TrendOptions::default(), false).is_err());
    }

    fn series() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0..100.0f64, 1..40)
    }

    proptest! {
        #[test]
        fn volatility_translation_and_scale(s in series(), c in -50.0..50.0f64, a in -5.0..5.0f64) {
            let v = volatility(&s).unwrap();
            let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
            let scaled: Vec<f64> = s.iter().map(|x| a * x).collect();
            let tol = 1e-12 * (1.0 + s.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c.abs());
            prop_assert!((volatility(&shifted).unwrap() - v).abs() <= tol * 10.0);
            prop_assert!((volatility(&scaled).unwrap() - a.abs() * v).abs() <= tol * 10.0);
        }

        #[test]
        fn percentile_monotone_and_member(s in series(), p1 in 0.001..0.999f64, p2 in 0.001..0.999f64) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let a = percentile_value(&s, lo).unwrap();
            let b = percentile_value(&s, hi).unwrap();
            prop_assert!(a <= b);
            prop_assert!(s.contains(&a));
        }

        #[test]
        fn trend_shift_and_negation(s in prop::collection::vec(-10.0..10.0f64, 8..30), c in -5.0..5.0f64) {
            let base = trend(&s, 8);
            let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
            let neg: Vec<f64> = s.iter().map(|x| -x).collect();
            prop_assert!((trend(&shifted, 8).slope - base.slope).abs() < 1e-10);
            prop_assert!((trend(&neg, 8).slope + base.slope).abs() < 1e-12);
        }

        #[test]
        fn rank_of_percentile_is_bounded(s in series(), p in 0.01..0.99f64) {
            let n = s.len() as f64;
            let v = percentile_value(&s, p).unwrap();
            let r = percentile_rank(&s, v).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!(r < p + 1.0 / n + 1.0 / (n + 1.0));
        }
    }
}
