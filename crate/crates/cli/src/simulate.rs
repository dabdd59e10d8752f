//! Synthetic panels from a parameter file.
//!
//! ```toml
//! frequency = "quarterly"
//! start = "1990-Q1"
//! series = ["a", "b", "c"]
//! factors = 1
//! loadings = [[0.9], [0.7], [0.0]]   # k rows of n_f loadings
//! factor_ar = [[[0.8]]]              # p matrices, n_f×n_f, row-major
//! error_ar = []                      # q matrices, k×k, row-major
//! idio_var = [1.0, 1.0, 1.0]
//! ```

use std::path::{Path, PathBuf};

use dfm_core::state_space::{build, simulate, InitialState};
use dfm_core::{DfmError, DfmSpec, Frequency, Panel, ParamSet, Period, TimeIndex};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::csvio::format_panel;
use crate::error::{CliError, Result};
use crate::format::write_atomic;
use crate::report::factor_name;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub frequency: String,
    pub start: String,
    pub series: Vec<String>,
    pub factors: usize,
    pub loadings: Vec<Vec<f64>>,
    #[serde(default)]
    pub factor_ar: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub error_ar: Vec<Vec<Vec<f64>>>,
    pub idio_var: Vec<f64>,
}

fn matrix(name: &str, rows: &[Vec<f64>], r: usize, c: usize) -> Result<DMatrix<f64>> {
    let mismatch = || CliError::Model {
        stage: "simulate",
        source: DfmError::DimensionMismatch(format!("{name} must be {r}x{c}")),
    };
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(mismatch());
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl SimParams {
    pub fn parse(text: &str) -> Result<SimParams> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("parameter file: {e}")))
    }

    pub fn start_period(&self) -> Result<Period> {
        let freq: Frequency =
            self.frequency.parse().map_err(|_| CliError::Config(format!("unknown frequency `{}`", self.frequency)))?;
        Period::parse(&self.start, freq).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<(DfmSpec, ParamSet)> {
        let k = self.series.len();
        let n_f = self.factors;
        let spec = DfmSpec::new(k, n_f, self.factor_ar.len(), self.error_ar.len())
            .map_err(|e| CliError::Config(e.to_string()))?;
        let mut ps = ParamSet::zeros(&spec);
        ps.loadings = matrix("loadings", &self.loadings, k, n_f)?;
        ps.factor_ar = self.factor_ar.iter().map(|a| matrix("factor_ar", a, n_f, n_f)).collect::<Result<_>>()?;
        ps.error_ar = self.error_ar.iter().map(|c| matrix("error_ar", c, k, k)).collect::<Result<_>>()?;
        if self.idio_var.len() != k {
            return Err(CliError::Model {
                stage: "simulate",
                source: DfmError::DimensionMismatch(format!("idio_var needs {k} entries")),
            });
        }
        ps.set_idio_var(&DVector::from_column_slice(&self.idio_var)).map_err(CliError::model("simulate"))?;
        Ok((spec, ps))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub panel: Panel,
    pub factors: Panel,
}

pub fn simulate_params(params: &SimParams, periods: usize, seed: u64) -> Result<Simulated> {
    let (spec, ps) = params.model()?;
    let form = build(&spec, &ps, None, None).map_err(CliError::model("simulate"))?;
    let sim = simulate(&form, periods, seed, &InitialState::Stationary).map_err(CliError::model("simulate"))?;
    let index = TimeIndex::new(params.start_period()?, periods).map_err(CliError::model("simulate"))?;
    let panel = Panel::new(index, params.series.clone(), sim.observations).map_err(CliError::model("simulate"))?;
    let names = (0..spec.n_f).map(factor_name).collect();
    let factors = Panel::new(index, names, sim.factors).map_err(CliError::model("simulate"))?;
    Ok(Simulated { panel, factors })
}

/// Writes `panel.csv` and `factors.csv` into `out_dir`.
pub fn simulate_cmd(params_path: &Path, periods: usize, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(params_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", params_path.display())))?;
    let sim = simulate_params(&SimParams::parse(&text)?, periods, seed)?;
    let panel_path = out_dir.join("panel.csv");
    let factor_path = out_dir.join("factors.csv");
    write_atomic(&panel_path, format_panel(&sim.panel).as_bytes())?;
    if sim.factors.n_series() > 0 {
        write_atomic(&factor_path, format_panel(&sim.factors).as_bytes())?;
        Ok(vec![panel_path, factor_path])
    } else {
        Ok(vec![panel_path])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: &str = r#"
frequency = "annual"
start = "1990"
series = ["a", "b"]
factors = 1
loadings = [[0.9], [0.5]]
factor_ar = [[[0.7]]]
idio_var = [0.5, 0.5]
"#;

    #[test]
    fn seeded_output_is_reproducible() {
        let p = SimParams::parse(PARAMS).unwrap();
        let a = simulate_params(&p, 30, 7).unwrap();
        let b = simulate_params(&p, 30, 7).unwrap();
        assert_eq!(format_panel(&a.panel), format_panel(&b.panel));
        assert_eq!(a.panel.index().label(29), "2019");
        assert_ne!(format_panel(&a.panel), format_panel(&simulate_params(&p, 30, 8).unwrap().panel));
    }

    #[test]
    fn zero_horizon_is_rejected() {
        let p = SimParams::parse(PARAMS).unwrap();
        assert!(matches!(simulate_params(&p, 0, 1), Err(CliError::Model { source: DfmError::InvalidHorizon, .. })));
    }

    #[test]
    fn noiseless_parameters_give_zero_panel() {
        let text = PARAMS.replace("[[0.9], [0.5]]", "[[0.0], [0.0]]").replace("[0.5, 0.5]", "[0.0, 0.0]");
        let sim = simulate_params(&SimParams::parse(&text).unwrap(), 5, 3).unwrap();
        assert!(sim.panel.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mismatched_dimensions() {
        let text = PARAMS.replace("[[0.9], [0.5]]", "[[0.9]]");
        assert!(matches!(
            SimParams::parse(&text).unwrap().model(),
            Err(CliError::Model { source: DfmError::DimensionMismatch(_), .. })
        ));
    }
}
