//! Shared inputs for the benchmarks.

use dfm_core::model::{DfmSpec, ParamSet};
use dfm_core::state_space::{build, simulate, InitialState};
use dfm_core::timeseries::{standardize, Panel, Period, TimeIndex};
use nalgebra::{DMatrix, DVector};

/// One AR(1) factor with loadings spread over `[0.4, 0.9]` and unit noise.
pub fn one_factor(k: usize) -> (DfmSpec, ParamSet) {
    let spec = DfmSpec::new(k, 1, 1, 0).expect("valid spec");
    let mut ps = ParamSet::zeros(&spec);
    let step = if k > 1 { 0.5 / (k - 1) as f64 } else { 0.0 };
    ps.loadings = DMatrix::from_fn(k, 1, |i, _| 0.9 - step * i as f64);
    ps.factor_ar[0] = DMatrix::from_element(1, 1, 0.8);
    ps.set_idio_var(&DVector::from_element(k, 1.0)).expect("positive variances");
    (spec, ps)
}

/// A standardized simulated panel of `n` quarters.
pub fn panel(spec: &DfmSpec, ps: &ParamSet, n: usize, seed: u64) -> Panel {
    let form = build(spec, ps, None, None).expect("valid parameters");
    let sim = simulate(&form, n, seed, &InitialState::Stationary).expect("positive horizon");
    let names = (1..=spec.k).map(|i| format!("y{i}")).collect();
    let index = TimeIndex::new(Period::quarterly(1980, 1).expect("valid quarter"), n).expect("positive length");
    let raw = Panel::new(index, names, sim.observations).expect("consistent shape");
    standardize(&raw).expect("non-constant series").0
}
