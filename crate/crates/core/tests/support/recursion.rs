//! Direct simulation of the three model equations with zero pre-sample
//! values, independent of the companion form.

#![allow(dead_code)]

use dfm_core::model::{DfmSpec, ModelKind, ParamSet};
use dfm_core::state_space::{build, simulate_with_shocks, split_innovations};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shocks and exogenous paths, one row per period.
pub struct Drivers {
    pub nu: DMatrix<f64>,
    pub eps: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub w: DMatrix<f64>,
}

/// T×k observations from
/// `y_t = P f_t + Q x_t + u_t`, `f_t = R w_t + Σ A_i f_{t-i} + ν_t`,
/// `u_t = Σ C_i u_{t-i} + ε_t`.
pub fn direct(spec: &DfmSpec, ps: &ParamSet, d: &Drivers) -> DMatrix<f64> {
    let n = d.nu.nrows();
    let mut f: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut u: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut y = DMatrix::zeros(n, spec.k);
    for t in 0..n {
        let mut ft = &ps.factor_exog * d.w.row(t).transpose();
        for (i, a) in ps.factor_ar.iter().enumerate() {
            if t > i {
                ft += a * &f[t - i - 1];
            }
        }
        ft += d.nu.row(t).transpose();
        let mut ut = DVector::zeros(spec.k);
        for (i, c) in ps.error_ar.iter().enumerate() {
            if t > i {
                ut += c * &u[t - i - 1];
            }
        }
        ut += d.eps.row(t).transpose();
        let yt = &ps.loadings * &ft + &ps.obs_exog * d.x.row(t).transpose() + &ut;
        y.set_row(t, &yt.transpose());
        f.push(ft);
        u.push(ut);
    }
    y
}

pub struct Draw {
    pub spec: DfmSpec,
    pub params: ParamSet,
    pub drivers: Drivers,
}

fn small(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

/// A random model of the requested kind with random shocks and exogenous
/// paths. Coefficients need not be stable since the horizon is short.
pub fn random_draw(kind: ModelKind, seed: u64) -> Draw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=4usize);
    let nf = rng.random_range(1..=2usize);
    let lags = rng.random_range(1..=3usize);
    let (n_f, p, q) = match kind {
        ModelKind::DynamicFactorsVarErrors => (nf, lags, rng.random_range(1..=2usize)),
        ModelKind::DynamicFactors => (nf, lags, 0),
        ModelKind::FactorsVarErrors => (nf, 0, rng.random_range(1..=2usize)),
        ModelKind::FactorsOnly => (nf, 0, 0),
        ModelKind::VarErrorsOnly => (0, 0, rng.random_range(1..=2usize)),
        ModelKind::SeeminglyUnrelatedRegression => (0, 0, 0),
    };
    let n_x = rng.random_range(0..=2usize);
    let n_w = if n_f > 0 { rng.random_range(0..=2usize) } else { 0 };
    let spec = DfmSpec::new(k, n_f, p, q).unwrap().with_exogenous(n_x, n_w).unwrap();
    assert_eq!(spec.classify(), kind);

    let mut ps = ParamSet::zeros(&spec);
    ps.loadings = small(&mut rng, k, n_f, 1.5);
    ps.obs_exog = small(&mut rng, k, n_x, 1.0);
    ps.factor_exog = small(&mut rng, n_f, n_w, 1.0);
    ps.factor_ar = (0..p).map(|_| small(&mut rng, n_f, n_f, 0.6)).collect();
    ps.error_ar = (0..q).map(|_| small(&mut rng, k, k, 0.5)).collect();
    ps.log_idio_var = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));

    let n = rng.random_range(1..=30usize);
    let drivers = Drivers {
        nu: small(&mut rng, n, n_f, 2.0),
        eps: small(&mut rng, n, k, 2.0),
        x: small(&mut rng, n, n_x, 3.0),
        w: small(&mut rng, n, n_w, 3.0),
    };
    Draw { spec, params: ps, drivers }
}

/// The same draw pushed through the companion form from a zero state.
pub fn via_state_space(draw: &Draw) -> DMatrix<f64> {
    let d = &draw.drivers;
    let form = build(&draw.spec, &draw.params, Some(&d.x), Some(&d.w)).unwrap();
    let n = d.nu.nrows();
    let mut state_shocks = DMatrix::zeros(n, form.state_dim());
    let mut obs_shocks = DMatrix::zeros(n, form.obs_dim());
    for t in 0..n {
        let (s, o) = split_innovations(&form.layout, &d.nu.row(t).transpose(), &d.eps.row(t).transpose());
        state_shocks.set_row(t, &s.transpose());
        obs_shocks.set_row(t, &o.transpose());
    }
    let x0 = DVector::zeros(form.state_dim());
    simulate_with_shocks(&form, &x0, &state_shocks, &obs_shocks).unwrap().observations
}
