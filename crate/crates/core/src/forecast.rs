//! Forecasts of the latent factor and observables, scenario conditioning and
//! percentile alerts.
//!
//! Forecasts start from the filtered state at the last sample period and
//! iterate the transition equation. Exogenous intercepts are zero beyond the
//! sample. A scenario treats hypothesized future values of selected series as
//! observations and runs the filter through the forecast horizon.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{DfmError, Result};
use crate::estimation::EstimationReport;
use crate::kalman::{filter_values, predict};
use crate::risk::percentile_value;
use crate::state_space::{stationary_initialization, Initialization, StateSpaceForm};
use crate::timeseries::{Panel, Period, TimeIndex};

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// Forecast periods, starting one period after the sample end.
    pub index: TimeIndex,
    pub level: f64,
    /// Band half-width multiplier, the two-sided normal quantile for `level`.
    pub z: f64,
    pub series: Vec<String>,
    /// h×n_f.
    pub factor_mean: DMatrix<f64>,
    pub factor_var: DMatrix<f64>,
    /// h×k.
    pub observable_mean: DMatrix<f64>,
    pub observable_var: DMatrix<f64>,
    pub state_means: Vec<DVector<f64>>,
    pub state_covs: Vec<DMatrix<f64>>,
}

impl Forecast {
    pub fn horizon(&self) -> usize {
        self.index.len()
    }

    pub fn factor_lower(&self, j: usize) -> Vec<f64> {
        self.band(&self.factor_mean, &self.factor_var, j, -1.0)
    }

    pub fn factor_upper(&self, j: usize) -> Vec<f64> {
        self.band(&self.factor_mean, &self.factor_var, j, 1.0)
    }

    pub fn observable_lower(&self, i: usize) -> Vec<f64> {
        self.band(&self.observable_mean, &self.observable_var, i, -1.0)
    }

    pub fn observable_upper(&self, i: usize) -> Vec<f64> {
        self.band(&self.observable_mean, &self.observable_var, i, 1.0)
    }

    fn band(&self, mean: &DMatrix<f64>, var: &DMatrix<f64>, col: usize, sign: f64) -> Vec<f64> {
        (0..mean.nrows()).map(|t| mean[(t, col)] + sign * self.z * var[(t, col)].max(0.0).sqrt()).collect()
    }
}

/// Two-sided standard normal quantile: `Φ⁻¹((1 + level) / 2)`.
pub fn band_multiplier(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(DfmError::InvalidArgument(format!("band level must lie in (0, 1), got {level}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 * (1.0 + level)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Override values are levels of the standardized series.
    PathOverride,
    /// Override values are added to the baseline forecast of the series.
    ShockOnce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub series: String,
    /// Period label in the panel's frequency, e.g. `2031` or `2031-Q2`.
    pub period: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub overrides: Vec<Override>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub name: String,
    pub baseline: Forecast,
    pub scenario: Forecast,
    /// Scenario minus baseline factor means, h×n_f.
    pub delta: DMatrix<f64>,
}

/// A fitted model positioned at the end of its sample.
#[derive(Debug, Clone)]
pub struct Forecaster {
    form: StateSpaceForm,
    init: Initialization,
    values: DMatrix<f64>,
    index: TimeIndex,
    series: Vec<String>,
    terminal_mean: DVector<f64>,
    terminal_cov: DMatrix<f64>,
}

impl Forecaster {
    /// `panel` columns must match the observation equation of `form`.
    pub fn new(form: StateSpaceForm, init: Initialization, panel: &Panel) -> Result<Forecaster> {
        let fr = filter_values(&form, panel.values(), &init)?;
        let last = fr.len() - 1;
        Ok(Forecaster {
            terminal_mean: fr.filtered_means[last].clone(),
            terminal_cov: fr.filtered_covs[last].clone(),
            form,
            init,
            values: panel.values().clone(),
            index: *panel.index(),
            series: panel.names().to_vec(),
        })
    }

    /// `panel` is the standardized panel the report was fitted on; it may
    /// carry extra columns.
    pub fn from_report(report: &EstimationReport, panel: &Panel) -> Result<Forecaster> {
        if !report.converged {
            return Err(DfmError::NotConverged);
        }
        for name in &report.series {
            if panel.column_index(name).is_none() {
                return Err(DfmError::UnknownSeries(name.clone()));
            }
        }
        let panel = panel.select(&report.series)?;
        if *panel.index() != report.index {
            return Err(DfmError::DimensionMismatch("panel periods differ from the fitted sample".into()));
        }
        let form = report.form()?;
        let init = stationary_initialization(&form);
        Forecaster::new(form, init, &panel)
    }

    pub fn form(&self) -> &StateSpaceForm {
        &self.form
    }

    fn future_index(&self, h: usize) -> Result<TimeIndex> {
        if h == 0 {
            return Err(DfmError::InvalidHorizon);
        }
        TimeIndex::new(self.index.end().offset(1), h)
    }

    pub fn forecast(&self, h: usize, level: f64) -> Result<Forecast> {
        let index = self.future_index(h)?;
        let z = band_multiplier(level)?;
        let t0 = self.values.nrows();
        let mut mean = self.terminal_mean.clone();
        let mut cov = self.terminal_cov.clone();
        let mut means = Vec::with_capacity(h);
        let mut covs = Vec::with_capacity(h);
        for j in 0..h {
            let (a, p) = predict(&self.form, t0 + j, &mean, &cov);
            means.push(a.clone());
            covs.push(p.clone());
            mean = a;
            cov = p;
        }
        Ok(self.assemble(index, level, z, means, covs))
    }

    pub fn run_scenario(&self, scenario: &Scenario, h: usize, level: f64) -> Result<ScenarioOutcome> {
        let baseline = self.forecast(h, level)?;
        let t0 = self.values.nrows();
        let k = self.values.ncols();
        let end = self.index.end();
        let mut extended = DMatrix::from_element(t0 + h, k, f64::NAN);
        extended.rows_mut(0, t0).copy_from(&self.values);
        for ov in &scenario.overrides {
            let col = self
                .series
                .iter()
                .position(|s| *s == ov.series)
                .ok_or_else(|| DfmError::UnknownSeries(ov.series.clone()))?;
            let period = Period::parse(&ov.period, self.index.freq())?;
            if period.ordinal() <= end.ordinal() {
                return Err(DfmError::OverrideInSample { series: ov.series.clone(), period: ov.period.clone() });
            }
            let step = (period.ordinal() - end.ordinal() - 1) as usize;
            if step >= h {
                return Err(DfmError::OverrideBeyondHorizon { series: ov.series.clone(), period: ov.period.clone() });
            }
            if !ov.value.is_finite() {
                return Err(DfmError::NonFiniteValue(format!("override for {} at {}", ov.series, ov.period)));
            }
            extended[(t0 + step, col)] = match scenario.kind {
                ScenarioKind::PathOverride => ov.value,
                ScenarioKind::ShockOnce => baseline.observable_mean[(step, col)] + ov.value,
            };
        }
        let fr = filter_values(&self.form, &extended, &self.init)?;
        let means = fr.filtered_means[t0..].to_vec();
        let covs = fr.filtered_covs[t0..].to_vec();
        let scen = self.assemble(baseline.index, level, baseline.z, means, covs);
        let delta = &scen.factor_mean - &baseline.factor_mean;
        Ok(ScenarioOutcome { name: scenario.name.clone(), baseline, scenario: scen, delta })
    }

    fn assemble(
        &self,
        index: TimeIndex,
        level: f64,
        z: f64,
        means: Vec<DVector<f64>>,
        covs: Vec<DMatrix<f64>>,
    ) -> Forecast {
        let h = means.len();
        let lay = self.form.layout;
        let (zmat, hcov) = (&self.form.observation, &self.form.obs_cov);
        let k = zmat.nrows();
        let mut factor_mean = DMatrix::zeros(h, lay.n_factors);
        let mut factor_var = DMatrix::zeros(h, lay.n_factors);
        let mut observable_mean = DMatrix::zeros(h, k);
        let mut observable_var = DMatrix::zeros(h, k);
        for t in 0..h {
            for j in 0..lay.n_factors {
                let s = lay.factor(0, j);
                factor_mean[(t, j)] = means[t][s];
                factor_var[(t, j)] = covs[t][(s, s)];
            }
            let ym = zmat * &means[t];
            let yv = zmat * &covs[t] * zmat.transpose() + hcov;
            for i in 0..k {
                observable_mean[(t, i)] = ym[i];
                observable_var[(t, i)] = yv[(i, i)];
            }
        }
        Forecast {
            index,
            level,
            z,
            series: self.series.clone(),
            factor_mean,
            factor_var,
            observable_mean,
            observable_var,
            state_means: means,
            state_covs: covs,
        }
    }
}

pub fn forecast(report: &EstimationReport, panel: &Panel, h: usize, level: f64) -> Result<Forecast> {
    Forecaster::from_report(report, panel)?.forecast(h, level)
}

pub fn run_scenario(
    report: &EstimationReport,
    panel: &Panel,
    scenario: &Scenario,
    h: usize,
    level: f64,
) -> Result<ScenarioOutcome> {
    Forecaster::from_report(report, panel)?.run_scenario(scenario, h, level)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlertRule {
    /// Historical percentile the forecast must exceed, in (0, 1).
    pub percentile: f64,
    /// Required number of consecutive periods above the threshold.
    pub consecutive: usize,
}

impl AlertRule {
    pub fn new(percentile: f64, consecutive: usize) -> Result<AlertRule> {
        if !(percentile > 0.0 && percentile < 1.0) {
            return Err(DfmError::InvalidP(percentile));
        }
        if consecutive == 0 {
            return Err(DfmError::InvalidArgument("alert needs at least one period".into()));
        }
        Ok(AlertRule { percentile, consecutive })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertReport {
    pub threshold: f64,
    pub fired: bool,
    /// 1-based forecast step opening the first qualifying run.
    pub first_breach: Option<usize>,
    pub first_breach_period: Option<String>,
}

/// Fires when `path` stays strictly above the `rule.percentile` value of
/// `history` for at least `rule.consecutive` periods.
pub fn alert_path(path: &[f64], history: &[f64], rule: &AlertRule) -> Result<AlertReport> {
    let threshold = percentile_value(history, rule.percentile)?;
    let mut run = 0;
    let mut first_breach = None;
    for (t, v) in path.iter().enumerate() {
        if *v > threshold {
            run += 1;
            if run >= rule.consecutive {
                first_breach = Some(t + 2 - run);
                break;
            }
        } else {
            run = 0;
        }
    }
    Ok(AlertReport { threshold, fired: first_breach.is_some(), first_breach, first_breach_period: None })
}

/// Alert on the forecast mean of factor `j` against its historical path.
pub fn alert(forecast: &Forecast, j: usize, history: &[f64], rule: &AlertRule) -> Result<AlertReport> {
    if j >= forecast.factor_mean.ncols() {
        return Err(DfmError::InvalidArgument(format!("factor {j} is not in the forecast")));
    }
    let path: Vec<f64> = forecast.factor_mean.column(j).iter().copied().collect();
    let mut report = alert_path(&path, history, rule)?;
    report.first_breach_period = report.first_breach.map(|s| forecast.index.label(s - 1));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::discrete_lyapunov;
    use crate::model::{DfmSpec, ParamSet};
    use crate::state_space::{build, simulate, InitialState};

    fn model(loadings: &[f64], ar: f64) -> (DfmSpec, ParamSet, StateSpaceForm) {
        let spec = DfmSpec::new(loadings.len(), 1, 1, 0).unwrap();
        let mut ps = ParamSet::zeros(&spec);
        ps.loadings = DMatrix::from_column_slice(loadings.len(), 1, loadings);
        ps.factor_ar[0][(0, 0)] = ar;
        ps.set_idio_var(&DVector::from_element(loadings.len(), 0.5)).unwrap();
        let form = build(&spec, &ps, None, None).unwrap();
        (spec, ps, form)
    }

    fn panel_from(values: DMatrix<f64>) -> Panel {
        let names = (1..=values.ncols()).map(|i| format!("y{i}")).collect();
        let idx = TimeIndex::new(Period::annual(2000), values.nrows()).unwrap();
        Panel::new(idx, names, values).unwrap()
    }

    fn forecaster(loadings: &[f64], ar: f64, n: usize, seed: u64) -> Forecaster {
        let (_, _, form) = model(loadings, ar);
        let sim = simulate(&form, n, seed, &InitialState::Stationary).unwrap();
        let init = stationary_initialization(&form);
        Forecaster::new(form, init, &panel_from(sim.observations)).unwrap()
    }

    #[test]
    fn hand_recursion() {
        let (_, _, form) = model(&[1.0], 0.5);
        let fc = Forecaster {
            init: stationary_initialization(&form),
            values: DMatrix::from_element(1, 1, 0.0),
            index: TimeIndex::new(Period::annual(2000), 1).unwrap(),
            series: vec!["y1".into()],
            terminal_mean: DVector::from_element(1, 1.0),
            terminal_cov: DMatrix::from_element(1, 1, 0.3),
            form,
        };
        let f = fc.forecast(3, 0.9).unwrap();
        assert_eq!(f.factor_mean.column(0).as_slice(), &[0.5, 0.25, 0.125]);
        assert_eq!(f.factor_var[(0, 0)], 0.5 * 0.3 * 0.5 + 1.0);
        assert_eq!(f.index.label(0), "2001");
        let (lo, hi) = (f.factor_lower(0), f.factor_upper(0));
        for t in 0..3 {
            assert!(((hi[t] - f.factor_mean[(t, 0)]) - (f.factor_mean[(t, 0)] - lo[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_plateaus_at_stationary_value() {
        let fc = forecaster(&[0.9, 0.6, 0.3], 0.8, 60, 4);
        let f = fc.forecast(200, 0.9).unwrap();
        let stat = discrete_lyapunov(&fc.form.transition, &fc.form.state_cov).unwrap();
        assert!((f.factor_var[(199, 0)] - stat[(0, 0)]).abs() < 1e-6);
        for t in 1..200 {
            assert!(f.factor_var[(t, 0)] >= f.factor_var[(t - 1, 0)] - 1e-8);
        }
    }

    #[test]
    fn scenarios_condition_on_future_values() {
        let fc = forecaster(&[0.9, 0.6, 0.0], 0.7, 40, 9);
        let empty = Scenario { name: "none".into(), kind: ScenarioKind::PathOverride, overrides: vec![] };
        let out = fc.run_scenario(&empty, 4, 0.9).unwrap();
        assert!(out.delta.amax() < 1e-12);

        let base = fc.forecast(4, 0.9).unwrap();
        let same = Scenario {
            name: "baseline".into(),
            kind: ScenarioKind::PathOverride,
            overrides: vec![
                Override { series: "y1".into(), period: "2040".into(), value: base.observable_mean[(0, 0)] },
                Override { series: "y2".into(), period: "2041".into(), value: base.observable_mean[(1, 1)] },
            ],
        };
        let d = fc.run_scenario(&same, 4, 0.9).unwrap().delta;
        assert!(d.amax() < 1e-8, "{d}");

        let up = Scenario {
            name: "up".into(),
            kind: ScenarioKind::ShockOnce,
            overrides: vec![Override { series: "y1".into(), period: "2041".into(), value: 1.5 }],
        };
        let out = fc.run_scenario(&up, 4, 0.9).unwrap();
        assert_eq!(out.delta[(0, 0)], 0.0);
        assert!(out.delta[(1, 0)] > 0.0);

        let noise = Scenario {
            name: "noise".into(),
            kind: ScenarioKind::ShockOnce,
            overrides: vec![Override { series: "y3".into(), period: "2041".into(), value: 3.0 }],
        };
        assert!(fc.run_scenario(&noise, 4, 0.9).unwrap().delta.amax() < 1e-10);
    }

    #[test]
    fn scenario_errors() {
        let fc = forecaster(&[0.9, 0.6], 0.7, 20, 1);
        let mk = |series: &str, period: &str| Scenario {
            name: "bad".into(),
            kind: ScenarioKind::PathOverride,
            overrides: vec![Override { series: series.into(), period: period.into(), value: 1.0 }],
        };
        assert!(matches!(fc.run_scenario(&mk("zz", "2021"), 2, 0.9), Err(DfmError::UnknownSeries(_))));
        assert!(matches!(fc.run_scenario(&mk("y1", "2019"), 2, 0.9), Err(DfmError::OverrideInSample { .. })));
        assert!(matches!(fc.run_scenario(&mk("y1", "2023"), 2, 0.9), Err(DfmError::OverrideBeyondHorizon { .. })));
        assert_eq!(fc.forecast(0, 0.9), Err(DfmError::InvalidHorizon));
        assert!(fc.forecast(1, 1.0).is_err());
    }

    #[test]
    fn alerts() {
        let history: Vec<f64> = (0..20).map(|v| v as f64).collect();
        let rule = AlertRule::new(0.9, 2).unwrap();
        let below = alert_path(&[1.0, 2.0, 3.0], &history, &rule).unwrap();
        assert!(!below.fired);
        // threshold is the 19th order statistic, 18
        let rising = alert_path(&[10.0, 15.0, 18.5, 19.0, 20.0], &history, &rule).unwrap();
        assert_eq!(rising.threshold, 18.0);
        assert_eq!(rising.first_breach, Some(3));
        let long = AlertRule::new(0.9, 6).unwrap();
        assert!(!alert_path(&[30.0; 5], &history, &long).unwrap().fired);
        assert!(AlertRule::new(0.9, 0).is_err());
    }

    #[test]
    fn one_step_band_coverage() {
        let (_, _, form) = model(&[0.9, 0.7, 0.5], 0.8);
        let init = stationary_initialization(&form);
        let mut hits = 0;
        for rep in 0..500 {
            let sim = simulate(&form, 41, 1000 + rep, &InitialState::Stationary).unwrap();
            let sample = panel_from(sim.observations.rows(0, 40).into_owned());
            let fc = Forecaster::new(form.clone(), init.clone(), &sample).unwrap();
            let f = fc.forecast(1, 0.9).unwrap();
            let truth = sim.factors[(40, 0)];
            if truth >= f.factor_lower(0)[0] && truth <= f.factor_upper(0)[0] {
                hits += 1;
            }
        }
        let rate = hits as f64 / 500.0;
        assert!((rate - 0.9).abs() <= 0.05, "{rate}");
    }
}
