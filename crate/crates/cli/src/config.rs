//! Run configuration and scenario files, both TOML.
//!
//! Relative paths inside a config file are resolved against the directory
//! holding that file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dfm_core::estimation::FitOptions;
use dfm_core::forecast::{Override, Scenario, ScenarioKind};
use dfm_core::risk::TrendOptions;
use dfm_core::{DfmSpec, Frequency};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Version of the config schema, echoed into run metadata.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub risk: RiskConfig,
    #[serde(default)]
    pub forecast: ForecastConfig,
    pub alert: Option<AlertConfig>,
    #[serde(default)]
    pub scenarios: Vec<PathBuf>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    /// `annual`, `quarterly` or `monthly`; inferred from the labels when absent.
    pub frequency: Option<String>,
    /// Modelled series after renaming. Defaults to every column that is not
    /// an exogenous regressor.
    pub series: Option<Vec<String>>,
    /// Column renames, original name to new name.
    #[serde(default)]
    pub rename: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub factors: usize,
    pub factor_lags: usize,
    pub error_lags: usize,
    /// Columns entering the observation equation as regressors.
    pub obs_exog: Vec<String>,
    /// Columns entering the factor equation as regressors.
    pub factor_exog: Vec<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { factors: 1, factor_lags: 1, error_lags: 0, obs_exog: Vec::new(), factor_exog: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub max_iter: usize,
    pub tolerance: f64,
    pub gradient_tolerance: f64,
    pub em_warm_start: bool,
    pub em_sweeps: usize,
    /// Significance level for the reduced model; no reduction when absent.
    pub alpha: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        let d = FitOptions::default();
        FitConfig {
            max_iter: d.max_iter,
            tolerance: d.tolerance,
            gradient_tolerance: d.gradient_tolerance,
            em_warm_start: d.em_warm_start,
            em_sweeps: d.em_sweeps,
            alpha: None,
        }
    }
}

impl FitConfig {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            max_iter: self.max_iter,
            tolerance: self.tolerance,
            gradient_tolerance: self.gradient_tolerance,
            em_warm_start: self.em_warm_start,
            em_sweeps: self.em_sweeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskConfig {
    pub window: usize,
    pub threshold: f64,
    /// Negate the factor so that rising values mean rising risk.
    pub invert: bool,
}

impl Default for RiskConfig {
    fn default() -> Self {
        let d = TrendOptions::default();
        RiskConfig { window: d.window, threshold: d.threshold, invert: false }
    }
}

impl RiskConfig {
    pub fn trend_options(&self) -> TrendOptions {
        TrendOptions { window: self.window, threshold: self.threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastConfig {
    pub horizon: usize,
    pub level: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig { horizon: 8, level: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertConfig {
    pub percentile: f64,
    pub consecutive: usize,
}

/// A parsed config with the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub text: String,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if config.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                config.version
            )));
        }
        config.spec_shape()?;
        if let Some(alpha) = config.fit.alpha {
            check_alpha(alpha)?;
        }
        if !(config.forecast.level > 0.0 && config.forecast.level < 1.0) {
            return Err(CliError::Config(format!("forecast.level must lie in (0, 1), got {}", config.forecast.level)));
        }
        Ok(config)
    }

    pub fn frequency(&self) -> Result<Option<Frequency>> {
        self.data
            .frequency
            .as_deref()
            .map(|f| f.parse().map_err(|_| CliError::Config(format!("unknown frequency `{f}`"))))
            .transpose()
    }

    /// Spec for `k` observed series.
    pub fn spec(&self, k: usize) -> Result<DfmSpec> {
        let m = &self.model;
        DfmSpec::new(k, m.factors, m.factor_lags, m.error_lags)
            .and_then(|s| s.with_exogenous(m.obs_exog.len(), m.factor_exog.len()))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    fn spec_shape(&self) -> Result<()> {
        self.spec(1.max(self.data.series.as_ref().map_or(1, Vec::len))).map(|_| ())
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = RunConfig::parse(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, text, base_dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    kind: KindName,
    #[serde(default)]
    overrides: Vec<OverrideEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindName {
    PathOverride,
    ShockOnce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideEntry {
    series: String,
    period: String,
    value: f64,
}

/// Parses a scenario document:
///
/// ```toml
/// name = "current account shock"
/// kind = "shock_once"          # or "path_override"
///
/// [[overrides]]
/// series = "current_account"
/// period = "2024-Q1"
/// value = -2.0                 # standardized units
/// ```
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
    Ok(Scenario {
        name: file.name,
        kind: match file.kind {
            KindName::PathOverride => ScenarioKind::PathOverride,
            KindName::ShockOnce => ScenarioKind::ShockOnce,
        },
        overrides: file
            .overrides
            .into_iter()
            .map(|o| Override { series: o.series, period: o.period, value: o.value })
            .collect(),
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}
