//! Simulated panels for estimation tests.

#![allow(dead_code)]

use dfm_core::model::{DfmSpec, ParamSet};
use dfm_core::state_space::{build, simulate, InitialState};
use dfm_core::timeseries::{standardize, Panel, Period, SeriesStats, TimeIndex};
use nalgebra::{DMatrix, DVector};

pub fn one_factor(loadings: &[f64], ar: f64, idio_var: f64) -> (DfmSpec, ParamSet) {
    let spec = DfmSpec::new(loadings.len(), 1, 1, 0).unwrap();
    let mut ps = ParamSet::zeros(&spec);
    ps.loadings = DMatrix::from_column_slice(loadings.len(), 1, loadings);
    ps.factor_ar[0] = DMatrix::from_element(1, 1, ar);
    ps.set_idio_var(&DVector::from_element(loadings.len(), idio_var)).unwrap();
    (spec, ps)
}

pub struct SimPanel {
    pub raw: Panel,
    pub standardized: Panel,
    pub stats: Vec<SeriesStats>,
    pub factor: DMatrix<f64>,
}

pub fn simulate_panel(spec: &DfmSpec, ps: &ParamSet, n: usize, seed: u64) -> SimPanel {
    let form = build(spec, ps, None, None).unwrap();
    let sim = simulate(&form, n, seed, &InitialState::Stationary).unwrap();
    let names = (1..=spec.k).map(|i| format!("y{i}")).collect();
    let idx = TimeIndex::new(Period::quarterly(1900, 1).unwrap(), n).unwrap();
    let raw = Panel::new(idx, names, sim.observations).unwrap();
    let (standardized, stats) = standardize(&raw).unwrap();
    SimPanel { raw, standardized, stats, factor: sim.factors }
}
