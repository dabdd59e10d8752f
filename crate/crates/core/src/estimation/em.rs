//! EM sweeps used as an optional warm start before the quasi-Newton ascent.
//!
//! Supported for factor models with white-noise idiosyncratic errors and no
//! exogenous blocks (`n_f > 0`, `q = 0`, `n_x = n_w = 0`). The factor
//! innovation covariance stays fixed at the identity, so the M-step updates
//! loadings, factor lags and idiosyncratic variances only.

use nalgebra::{DMatrix, DVector};

use super::init::shrink_to_stable;
use crate::error::Result;
use crate::kalman::{filter, smooth};
use crate::model::{DfmSpec, ParamSet};
use crate::state_space::{build, stationary_initialization};
use crate::timeseries::Panel;

const MIN_VARIANCE: f64 = 1e-4;

pub fn supports(spec: &DfmSpec) -> bool {
    spec.n_f > 0 && spec.q == 0 && spec.n_x == 0 && spec.n_w == 0
}

/// One EM sweep. Returns the updated parameters and the log-likelihood of
/// the parameters the E-step was run at.
pub fn em_step(spec: &DfmSpec, panel: &Panel, params: &ParamSet) -> Result<(ParamSet, f64)> {
    let form = build(spec, params, None, None)?;
    let fr = filter(&form, panel, &stationary_initialization(&form))?;
    let sm = smooth(&form, &fr);
    let lay = form.layout;
    let (n, k, r) = (panel.n_periods(), spec.k, spec.n_f);
    let f0 = lay.factor(0, 0);

    let mut next = params.clone();

    // loadings and variances, series by series over observed periods
    let mut var = DVector::zeros(k);
    for i in 0..k {
        let mut syf = DVector::<f64>::zeros(r);
        let mut sff = DMatrix::<f64>::zeros(r, r);
        let mut obs = Vec::new();
        for t in 0..n {
            if let Some(y) = panel.get(t, i) {
                let f = sm.means[t].rows(f0, r);
                let v = sm.covs[t].view((f0, f0), (r, r));
                syf += f * y;
                sff += f * f.transpose() + v;
                obs.push(t);
            }
        }
        let lam = match sff.clone().lu().solve(&syf) {
            Some(l) => l,
            None => params.loadings.row(i).transpose(),
        };
        let mut acc = 0.0;
        for &t in &obs {
            let y = panel.get(t, i).expect("observed");
            let f = sm.means[t].rows(f0, r);
            let v = sm.covs[t].view((f0, f0), (r, r));
            let resid = y - lam.dot(&f);
            acc += resid * resid + (lam.transpose() * v * &lam)[0];
        }
        var[i] = (acc / obs.len() as f64).max(MIN_VARIANCE);
        next.loadings.set_row(i, &lam.transpose());
    }
    next.set_idio_var(&var)?;

    // factor lags from smoothed cross moments
    if spec.p > 0 && n > 1 {
        let m = lay.factor_block_len();
        let mut s10 = DMatrix::<f64>::zeros(r, m);
        let mut s00 = DMatrix::<f64>::zeros(m, m);
        for t in 1..n {
            let x_prev = sm.means[t - 1].rows(0, m);
            let f_cur = sm.means[t].rows(f0, r);
            let cross = sm.lag_one_covs[t - 1].view((f0, 0), (r, m));
            s10 += cross + f_cur * x_prev.transpose();
            s00 += sm.covs[t - 1].view((0, 0), (m, m)) + x_prev * x_prev.transpose();
        }
        if let Some(s00_inv) = s00.try_inverse() {
            let a = s10 * s00_inv;
            let mut ar: Vec<DMatrix<f64>> = (0..spec.p).map(|l| a.columns(l * r, r).into_owned()).collect();
            shrink_to_stable(&mut ar);
            next.factor_ar = ar;
        }
    }
    Ok((next, fr.log_likelihood))
}

/// Runs up to `sweeps` EM iterations, keeping the best parameters seen.
pub fn warm_start(spec: &DfmSpec, panel: &Panel, start: &ParamSet, sweeps: usize) -> Result<ParamSet> {
    let mut current = start.clone();
    let mut best = start.clone();
    let mut best_ll = f64::NEG_INFINITY;
    for _ in 0..sweeps {
        let Ok((next, ll)) = em_step(spec, panel, &current) else {
            break;
        };
        if ll > best_ll {
            best_ll = ll;
            best = current.clone();
        }
        current = next;
    }
    if let Ok(form) = build(spec, &current, None, None) {
        if let Ok(ll) = crate::kalman::loglik(&form, panel) {
            if ll > best_ll {
                best = current;
            }
        }
    }
    Ok(best)
}
