//! General-to-specific reduction: drop series whose loadings are not
//! significant and refit until every retained series is.

use super::{fit_with_exog, EstimationReport, FitOptions};
use crate::error::{DfmError, Result};
use crate::timeseries::Panel;

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceFilter {
    pub alpha: f64,
    pub kept: Vec<String>,
    /// Dropped series in the order they were removed.
    pub dropped: Vec<String>,
}

/// A series is significant when at least one of its loadings has a p-value
/// at or below `alpha`.
fn insignificant(report: &EstimationReport, alpha: f64) -> Result<Vec<String>> {
    let pv = report.loading_p_values();
    let mut out = Vec::new();
    for (i, row) in pv.iter().enumerate() {
        let mut best = f64::INFINITY;
        for p in row {
            let p = p.ok_or_else(|| {
                DfmError::InvalidArgument("loading standard errors are unavailable; cannot reduce".into())
            })?;
            best = best.min(p);
        }
        if best > alpha {
            out.push(report.series[i].clone());
        }
    }
    Ok(out)
}

/// `panel` is the standardized panel the report was fitted on (it may hold
/// extra columns; only the report's series are used).
pub fn reduce(
    report: &EstimationReport,
    alpha: f64,
    panel: &Panel,
    options: &FitOptions,
) -> Result<(SignificanceFilter, EstimationReport)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DfmError::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !report.converged {
        return Err(DfmError::NotConverged);
    }
    if report.spec.n_f == 0 {
        return Err(DfmError::WrongShape("reduction needs factor loadings".into()));
    }
    let mut current = report.clone();
    let mut dropped = Vec::new();
    loop {
        let drop = insignificant(&current, alpha)?;
        if drop.is_empty() {
            break;
        }
        let kept: Vec<String> = current.series.iter().filter(|s| !drop.contains(s)).cloned().collect();
        if kept.is_empty() {
            return Err(DfmError::AllSeriesDropped);
        }
        dropped.extend(drop);
        let sub = panel.select(&kept)?;
        let mut spec = current.spec;
        spec.k = kept.len();
        if spec.n_f > spec.k {
            return Err(DfmError::AllSeriesDropped);
        }
        let exog = current.exogenous.clone();
        current = fit_with_exog(&spec, &sub, &exog, options)?;
        if kept.len() == 1 {
            break;
        }
        if !current.converged {
            return Err(DfmError::NotConverged);
        }
    }
    let filter = SignificanceFilter { alpha, kept: current.series.clone(), dropped };
    Ok((filter, current))
}
