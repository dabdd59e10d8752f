//! Kalman filter, fixed-interval smoother and prediction-error
//! log-likelihood.
//!
//! The prior `(mean, cov)` describes the state at t = 0, before the first
//! observation; the first step is a prediction. Missing cells are handled by
//! deleting the corresponding rows of the observation equation for that
//! period; a fully missing period skips the update.

use nalgebra::{DMatrix, DVector};

use crate::error::{DfmError, Result};
use crate::linalg::{guarded_cholesky, pinv_sym, symmetrize};
use crate::state_space::{stationary_initialization, Initialization, StateSpaceForm};
use crate::timeseries::Panel;

const LN_2PI: f64 = 1.8378770664093453;
const PINV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covs: Vec<DMatrix<f64>>,
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    /// Series indices used in each period's update.
    pub observed: Vec<Vec<usize>>,
    pub innovations: Vec<DVector<f64>>,
    pub innovation_covs: Vec<DMatrix<f64>>,
    pub log_likelihood: f64,
    pub init: Initialization,
}

impl FilterResult {
    pub fn len(&self) -> usize {
        self.filtered_means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered_means.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherResult {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    /// `Cov(x_t, x_{t-1} | all data)` for t = 1..T-1 (index t-1).
    pub lag_one_covs: Vec<DMatrix<f64>>,
    /// Smoothed `Cov(x_1, x_0 | all data)`, relating the first state to the prior.
    pub first_lag_cov: DMatrix<f64>,
    /// Smoothed state at t = 0.
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
}

impl SmootherResult {
    /// T×n_f current-factor means.
    pub fn factor_means(&self, form: &StateSpaceForm) -> DMatrix<f64> {
        extract_factors(&self.means, form)
    }

    /// T×n_f current-factor variances.
    pub fn factor_variances(&self, form: &StateSpaceForm) -> DMatrix<f64> {
        extract_factor_vars(&self.covs, form)
    }
}

pub(crate) fn extract_factors(means: &[DVector<f64>], form: &StateSpaceForm) -> DMatrix<f64> {
    let lay = form.layout;
    DMatrix::from_fn(means.len(), lay.n_factors, |t, j| means[t][lay.factor(0, j)])
}

pub(crate) fn extract_factor_vars(covs: &[DMatrix<f64>], form: &StateSpaceForm) -> DMatrix<f64> {
    let lay = form.layout;
    DMatrix::from_fn(covs.len(), lay.n_factors, |t, j| {
        let i = lay.factor(0, j);
        covs[t][(i, i)]
    })
}

/// Outcome of one measurement update.
struct Update {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    observed: Vec<usize>,
    innovation: DVector<f64>,
    innovation_cov: DMatrix<f64>,
    loglik: f64,
}

fn update(
    form: &StateSpaceForm,
    t: usize,
    y: &[f64],
    pred_mean: &DVector<f64>,
    pred_cov: &DMatrix<f64>,
) -> Result<Update> {
    let mut idx: Vec<usize> = (0..y.len()).filter(|&i| !y[i].is_nan()).collect();
    let intercept = form.obs_intercept_at(t);
    let predict_obs = |i: usize| {
        let mut v = (form.observation.row(i) * pred_mean)[0];
        if let Some(d) = &intercept {
            v += d[i];
        }
        v
    };

    // Observations predicted with zero variance carry no information; they
    // are consistent only if they match the prediction.
    let mut keep = Vec::with_capacity(idx.len());
    for &i in &idx {
        let zi = form.observation.row(i);
        let var = (zi * pred_cov * zi.transpose())[0] + form.obs_cov[(i, i)];
        if var == 0.0 {
            let resid = y[i] - predict_obs(i);
            if resid.abs() > 1e-12 * y[i].abs().max(1.0) {
                return Err(DfmError::SingularInnovationCovariance(t));
            }
        } else {
            keep.push(i);
        }
    }
    idx = keep;

    let n = idx.len();
    if n == 0 {
        return Ok(Update {
            mean: pred_mean.clone(),
            cov: pred_cov.clone(),
            observed: idx,
            innovation: DVector::zeros(0),
            innovation_cov: DMatrix::zeros(0, 0),
            loglik: 0.0,
        });
    }
    let m = form.state_dim();
    let z_o = DMatrix::from_fn(n, m, |r, c| form.observation[(idx[r], c)]);
    let h_o = DMatrix::from_fn(n, n, |r, c| form.obs_cov[(idx[r], idx[c])]);
    let v = DVector::from_fn(n, |r, _| y[idx[r]] - predict_obs(idx[r]));

    let pzt = pred_cov * z_o.transpose();
    let mut f = &z_o * &pzt + h_o;
    symmetrize(&mut f);
    let chol = guarded_cholesky(&f).ok_or(DfmError::SingularInnovationCovariance(t))?;

    // K = P Zᵀ F⁻¹
    let gain = chol.solve(&pzt.transpose()).transpose();
    let mean = pred_mean + &gain * &v;
    let mut cov = (DMatrix::identity(m, m) - &gain * &z_o) * pred_cov;
    symmetrize(&mut cov);

    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let quad = v.dot(&chol.solve(&v));
    let loglik = -0.5 * (n as f64 * LN_2PI + log_det + quad);
    Ok(Update { mean, cov, observed: idx, innovation: v, innovation_cov: f, loglik })
}

pub(crate) fn predict(
    form: &StateSpaceForm,
    t: usize,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let mut a = &form.transition * mean;
    if let Some(c) = form.state_intercept_at(t) {
        a += c;
    }
    let mut p = &form.transition * cov * form.transition.transpose() + &form.state_cov;
    symmetrize(&mut p);
    (a, p)
}

fn check_dims(form: &StateSpaceForm, values: &DMatrix<f64>, init: &Initialization) -> Result<()> {
    if values.ncols() != form.obs_dim() {
        return Err(DfmError::DimensionMismatch(format!(
            "panel has {} series, model has {}",
            values.ncols(),
            form.obs_dim()
        )));
    }
    let m = form.state_dim();
    if init.mean.len() != m || init.cov.shape() != (m, m) {
        return Err(DfmError::DimensionMismatch("initial state does not match the form".into()));
    }
    Ok(())
}

/// Runs the filter over a T×k value matrix (`NaN` = missing).
pub fn filter_values(form: &StateSpaceForm, values: &DMatrix<f64>, init: &Initialization) -> Result<FilterResult> {
    check_dims(form, values, init)?;
    let t_len = values.nrows();
    let mut out = FilterResult {
        predicted_means: Vec::with_capacity(t_len),
        predicted_covs: Vec::with_capacity(t_len),
        filtered_means: Vec::with_capacity(t_len),
        filtered_covs: Vec::with_capacity(t_len),
        observed: Vec::with_capacity(t_len),
        innovations: Vec::with_capacity(t_len),
        innovation_covs: Vec::with_capacity(t_len),
        log_likelihood: 0.0,
        init: init.clone(),
    };
    let mut mean = init.mean.clone();
    let mut cov = init.cov.clone();
    let mut y = vec![0.0; values.ncols()];
    for t in 0..t_len {
        let (a, p) = predict(form, t, &mean, &cov);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = values[(t, i)];
        }
        let up = update(form, t, &y, &a, &p)?;
        out.log_likelihood += up.loglik;
        mean = up.mean.clone();
        cov = up.cov.clone();
        out.predicted_means.push(a);
        out.predicted_covs.push(p);
        out.filtered_means.push(up.mean);
        out.filtered_covs.push(up.cov);
        out.observed.push(up.observed);
        out.innovations.push(up.innovation);
        out.innovation_covs.push(up.innovation_cov);
    }
    if !out.log_likelihood.is_finite() {
        return Err(DfmError::NonFiniteValue("log-likelihood".into()));
    }
    Ok(out)
}

pub fn filter(form: &StateSpaceForm, panel: &Panel, init: &Initialization) -> Result<FilterResult> {
    filter_values(form, panel.values(), init)
}

/// Log-likelihood only, without storing the filter path.
pub fn loglik_values(form: &StateSpaceForm, values: &DMatrix<f64>, init: &Initialization) -> Result<f64> {
    check_dims(form, values, init)?;
    let mut mean = init.mean.clone();
    let mut cov = init.cov.clone();
    let mut total = 0.0;
    let mut y = vec![0.0; values.ncols()];
    for t in 0..values.nrows() {
        let (a, p) = predict(form, t, &mean, &cov);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = values[(t, i)];
        }
        let up = update(form, t, &y, &a, &p)?;
        total += up.loglik;
        mean = up.mean;
        cov = up.cov;
    }
    if !total.is_finite() {
        return Err(DfmError::NonFiniteValue("log-likelihood".into()));
    }
    Ok(total)
}

/// Gaussian log-likelihood under the stationary (or diffuse) prior.
pub fn loglik(form: &StateSpaceForm, panel: &Panel) -> Result<f64> {
    loglik_values(form, panel.values(), &stationary_initialization(form))
}

fn smoother_gain(fr_cov: &DMatrix<f64>, transition: &DMatrix<f64>, next_pred_cov: &DMatrix<f64>) -> DMatrix<f64> {
    let pt = fr_cov * transition.transpose();
    match guarded_cholesky(next_pred_cov) {
        Some(chol) => chol.solve(&pt.transpose()).transpose(),
        None => pt * pinv_sym(next_pred_cov, PINV_TOL),
    }
}

/// Rauch-Tung-Striebel backward pass.
pub fn smooth(form: &StateSpaceForm, fr: &FilterResult) -> SmootherResult {
    let n = fr.len();
    let m = form.state_dim();
    let tr = &form.transition;
    let mut means = fr.filtered_means.clone();
    let mut covs = fr.filtered_covs.clone();
    let mut lag_one = vec![DMatrix::zeros(m, m); n.saturating_sub(1)];
    for t in (0..n.saturating_sub(1)).rev() {
        let j = smoother_gain(&fr.filtered_covs[t], tr, &fr.predicted_covs[t + 1]);
        let mean = &fr.filtered_means[t] + &j * (&means[t + 1] - &fr.predicted_means[t + 1]);
        let mut cov = &fr.filtered_covs[t] + &j * (&covs[t + 1] - &fr.predicted_covs[t + 1]) * j.transpose();
        symmetrize(&mut cov);
        lag_one[t] = &covs[t + 1] * j.transpose();
        means[t] = mean;
        covs[t] = cov;
    }
    let (initial_mean, initial_cov, first_lag_cov) = if n > 0 {
        let j0 = smoother_gain(&fr.init.cov, tr, &fr.predicted_covs[0]);
        let mean = &fr.init.mean + &j0 * (&means[0] - &fr.predicted_means[0]);
        let mut cov = &fr.init.cov + &j0 * (&covs[0] - &fr.predicted_covs[0]) * j0.transpose();
        symmetrize(&mut cov);
        let lag = &covs[0] * j0.transpose();
        (mean, cov, lag)
    } else {
        (fr.init.mean.clone(), fr.init.cov.clone(), DMatrix::zeros(m, m))
    };
    SmootherResult { means, covs, lag_one_covs: lag_one, first_lag_cov, initial_mean, initial_cov }
}
