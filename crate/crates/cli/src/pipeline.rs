//! The run pipeline: read, standardize, fit, reduce, risk, forecast and
//! scenarios, writing one artifact per stage.

use std::path::{Path, PathBuf};

use dfm_core::estimation::{fit_with_exog, reduce, EstimationReport, Exogenous};
use dfm_core::forecast::{alert_path, band_multiplier, AlertRule, Forecaster};
use dfm_core::risk::RiskSeries;
use dfm_core::timeseries::standardize;
use dfm_core::{Panel, SignificanceFilter};
use log::info;
use serde::Serialize;

use crate::config::{check_alpha, load_scenario, LoadedConfig, RunConfig, CONFIG_VERSION};
use crate::csvio::parse_panel;
use crate::error::{CliError, Result};
use crate::format::{sha256_hex, write_atomic};
use crate::report;

/// Significance level used by the `reduce` command when the config sets none.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Estimate,
    Reduce,
    Risk,
    Forecast,
    Scenario,
    All,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Estimate => "estimate",
            Stage::Reduce => "reduce",
            Stage::Risk => "risk",
            Stage::Forecast => "forecast",
            Stage::Scenario => "scenario",
            Stage::All => "run",
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOverrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    /// File names inside `dir`, in the order they were written.
    pub files: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), contents.as_bytes())?;
        info!("wrote {}", self.dir.join(name).display());
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Standardized model inputs.
pub struct Inputs {
    pub observed: Panel,
    pub exogenous: Exogenous,
    pub data_sha256: String,
}

fn exog_matrix(panel: &Panel, names: &[String]) -> Result<Option<nalgebra::DMatrix<f64>>> {
    if names.is_empty() {
        return Ok(None);
    }
    let sub = panel.select(names).map_err(CliError::model("ingest"))?;
    if let Some(j) = (0..sub.n_series()).find(|&j| sub.observed(j).len() != sub.n_periods()) {
        return Err(CliError::Data(format!("exogenous series `{}` has missing values", sub.names()[j])));
    }
    Ok(Some(sub.values().clone()))
}

/// Reads the data file, applies the rename map and selection, and
/// standardizes the modelled and exogenous series over the full sample.
pub fn prepare(cfg: &RunConfig, data_path: &Path) -> Result<Inputs> {
    let bytes = std::fs::read(data_path).map_err(|source| CliError::Io { path: data_path.to_path_buf(), source })?;
    let raw = parse_panel(bytes.as_slice(), cfg.frequency()?, None)?;
    for from in cfg.data.rename.keys() {
        if raw.column_index(from).is_none() {
            return Err(CliError::UnknownSeries(from.clone()));
        }
    }
    let names: Vec<String> =
        raw.names().iter().map(|n| cfg.data.rename.get(n).cloned().unwrap_or_else(|| n.clone())).collect();
    let panel = raw.rename(names).map_err(CliError::model("ingest"))?;

    let m = &cfg.model;
    let exog: Vec<String> = m.obs_exog.iter().chain(&m.factor_exog).cloned().collect();
    let modelled: Vec<String> = match &cfg.data.series {
        Some(s) => s.clone(),
        None => panel.names().iter().filter(|n| !exog.contains(n)).cloned().collect(),
    };
    if let Some(clash) = modelled.iter().find(|s| exog.contains(s)) {
        return Err(CliError::Config(format!("series `{clash}` is both modelled and exogenous")));
    }
    let mut wanted = modelled.clone();
    for e in &exog {
        if !wanted.contains(e) {
            wanted.push(e.clone());
        }
    }
    for name in &wanted {
        if panel.column_index(name).is_none() {
            return Err(CliError::UnknownSeries(name.clone()));
        }
    }
    let selected = panel.select(&wanted).map_err(CliError::model("ingest"))?;
    let (standardized, _) = standardize(&selected).map_err(CliError::model("standardize"))?;
    let observed = standardized.select(&modelled).map_err(CliError::model("ingest"))?;
    let exogenous = Exogenous {
        obs_names: m.obs_exog.clone(),
        obs: exog_matrix(&standardized, &m.obs_exog)?,
        factor_names: m.factor_exog.clone(),
        factor: exog_matrix(&standardized, &m.factor_exog)?,
    };
    Ok(Inputs { observed, exogenous, data_sha256: sha256_hex(&bytes) })
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'a str,
    version: &'a str,
    config_version: u32,
    stage: &'a str,
    seed: u64,
    data_sha256: String,
    config_sha256: String,
    files: Vec<String>,
    model: ModelMeta,
    estimation: FitMeta,
    reduction: Option<ReductionMeta>,
    config: &'a str,
}

#[derive(Serialize)]
struct ModelMeta {
    kind: String,
    series: Vec<String>,
    k: usize,
    factors: usize,
    factor_lags: usize,
    error_lags: usize,
    obs_exog: Vec<String>,
    factor_exog: Vec<String>,
}

#[derive(Serialize)]
struct FitMeta {
    converged: bool,
    stop: String,
    iterations: usize,
    gradient_norm: f64,
    log_likelihood: f64,
    initial_log_likelihood: f64,
    sign_convention_applied: bool,
    diagnostics: Vec<String>,
}

#[derive(Serialize)]
struct ReductionMeta {
    alpha: f64,
    kept: Vec<String>,
    dropped: Vec<String>,
    converged: bool,
    log_likelihood: f64,
}

fn fit_meta(r: &EstimationReport) -> FitMeta {
    FitMeta {
        converged: r.converged,
        stop: format!("{:?}", r.stop),
        iterations: r.iterations,
        gradient_norm: r.gradient_norm,
        log_likelihood: r.log_likelihood,
        initial_log_likelihood: r.initial_log_likelihood,
        sign_convention_applied: r.sign_convention_applied,
        diagnostics: r.diagnostics.clone(),
    }
}

fn scenario_file_name(name: &str) -> String {
    let slug: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c.to_ascii_lowercase() } else { '_' })
        .collect();
    format!("scenario_{slug}.csv")
}

pub fn run(loaded: &LoadedConfig, stage: Stage, overrides: &RunOverrides) -> Result<RunArtifacts> {
    let mut cfg = loaded.config.clone();
    if let Some(alpha) = overrides.alpha {
        check_alpha(alpha)?;
        cfg.fit.alpha = Some(alpha);
    }
    if let Some(h) = overrides.horizon {
        cfg.forecast.horizon = h;
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    let dir = overrides.output.clone().unwrap_or_else(|| loaded.resolve(&cfg.output));
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
    let mut out = Writer { dir, files: Vec::new() };

    let inputs = prepare(&cfg, &loaded.resolve(&cfg.data.path))?;
    let observed = &inputs.observed;
    let spec = cfg.spec(observed.n_series())?;
    let options = cfg.fit.options();
    let general = fit_with_exog(&spec, observed, &inputs.exogenous, &options).map_err(CliError::model("estimation"))?;
    info!("fitted {} parameters, log-likelihood {:.6}", general.rows.len(), general.log_likelihood);
    out.write("estimation.csv", &report::estimation_csv(&general))?;
    out.write("estimation.txt", &report::estimation_text(&general))?;

    let alpha = match (stage, cfg.fit.alpha) {
        (Stage::Reduce, a) => Some(a.unwrap_or(DEFAULT_ALPHA)),
        (s, a) if s > Stage::Reduce => a,
        _ => None,
    };
    let mut reduction: Option<(SignificanceFilter, EstimationReport)> = None;
    if let Some(alpha) = alpha {
        let (filter, reduced) = reduce(&general, alpha, observed, &options).map_err(CliError::model("reduction"))?;
        info!("reduction kept {:?}, dropped {:?}", filter.kept, filter.dropped);
        out.write("reduction.csv", &report::reduction_csv(&filter))?;
        out.write("reduced_estimation.csv", &report::estimation_csv(&reduced))?;
        out.write("reduced_estimation.txt", &report::estimation_text(&reduced))?;
        reduction = Some((filter, reduced));
    }
    let active = reduction.as_ref().map_or(&general, |(_, r)| r);
    let z = band_multiplier(cfg.forecast.level).map_err(CliError::model("forecast"))?;
    out.write("factor.csv", &report::factor_csv(active, z))?;

    let n_f = active.spec.n_f;
    let sign = if cfg.risk.invert { -1.0 } else { 1.0 };
    if stage >= Stage::Risk {
        if n_f == 0 {
            return Err(CliError::Config("risk measures need at least one factor".into()));
        }
        let risks = (0..n_f)
            .map(|j| {
                let path: Vec<f64> = active.smoothed_factor.column(j).iter().copied().collect();
                RiskSeries::new(active.index, &path, &cfg.risk.trend_options(), cfg.risk.invert)
            })
            .collect::<dfm_core::Result<Vec<_>>>()
            .map_err(CliError::model("risk"))?;
        out.write("risk.csv", &report::risk_csv(&risks))?;
    }

    if stage >= Stage::Forecast {
        let forecaster = Forecaster::from_report(active, observed).map_err(CliError::model("forecast"))?;
        let fc = forecaster.forecast(cfg.forecast.horizon, cfg.forecast.level).map_err(CliError::model("forecast"))?;
        out.write("forecast.csv", &report::forecast_csv(&fc))?;
        if let Some(a) = &cfg.alert {
            let rule = AlertRule::new(a.percentile, a.consecutive).map_err(CliError::model("alert"))?;
            let alerts = (0..n_f)
                .map(|j| {
                    let history: Vec<f64> = active.smoothed_factor.column(j).iter().map(|v| sign * v).collect();
                    let path: Vec<f64> = fc.factor_mean.column(j).iter().map(|v| sign * v).collect();
                    let mut rep = alert_path(&path, &history, &rule)?;
                    rep.first_breach_period = rep.first_breach.map(|s| fc.index.label(s - 1));
                    Ok(rep)
                })
                .collect::<dfm_core::Result<Vec<_>>>()
                .map_err(CliError::model("alert"))?;
            out.write("alert.csv", &report::alert_csv(&rule, &alerts))?;
        }
        if stage >= Stage::Scenario {
            let mut names = Vec::new();
            for path in &cfg.scenarios {
                let scenario = load_scenario(&loaded.resolve(path))?;
                let file = scenario_file_name(&scenario.name);
                if names.contains(&file) {
                    return Err(CliError::Config(format!("two scenarios map to the file name {file}")));
                }
                let outcome = forecaster
                    .run_scenario(&scenario, cfg.forecast.horizon, cfg.forecast.level)
                    .map_err(CliError::model("scenario"))?;
                out.write(&file, &report::scenario_csv(&outcome))?;
                names.push(file);
            }
        }
    }

    let mut files = out.files.clone();
    files.push("metadata.toml".into());
    let meta = Metadata {
        tool: "dfm",
        version: env!("CARGO_PKG_VERSION"),
        config_version: CONFIG_VERSION,
        stage: stage.name(),
        seed: cfg.seed,
        data_sha256: inputs.data_sha256.clone(),
        config_sha256: sha256_hex(loaded.text.as_bytes()),
        files,
        model: ModelMeta {
            kind: active.spec.classify().to_string(),
            series: active.series.clone(),
            k: active.spec.k,
            factors: active.spec.n_f,
            factor_lags: active.spec.p,
            error_lags: active.spec.q,
            obs_exog: cfg.model.obs_exog.clone(),
            factor_exog: cfg.model.factor_exog.clone(),
        },
        estimation: fit_meta(&general),
        reduction: reduction.as_ref().map(|(f, r)| ReductionMeta {
            alpha: f.alpha,
            kept: f.kept.clone(),
            dropped: f.dropped.clone(),
            converged: r.converged,
            log_likelihood: r.log_likelihood,
        }),
        config: &loaded.text,
    };
    let text = toml::to_string(&meta).map_err(|e| CliError::Config(format!("metadata: {e}")))?;
    out.write("metadata.toml", &text)?;
    Ok(RunArtifacts { dir: out.dir, files: out.files })
}
