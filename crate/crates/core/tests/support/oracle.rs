//! Dense joint-Gaussian reference for small state-space models.
//!
//! Builds the covariance of every state and observation over the whole
//! sample directly from the model definition and conditions on the observed
//! cells. No recursion is shared with the Kalman filter.

#![allow(dead_code, clippy::needless_range_loop)]

use dfm_core::state_space::{Initialization, StateSpaceForm};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct DenseResult {
    pub log_density: f64,
    /// Conditional means of x_1..x_T given every observed cell.
    pub state_means: Vec<DVector<f64>>,
}

pub fn dense_gaussian(form: &StateSpaceForm, y: &DMatrix<f64>, init: &Initialization) -> DenseResult {
    let m = form.state_dim();
    let k = form.obs_dim();
    let n = y.nrows();

    let mut mu = Vec::with_capacity(n);
    let mut var = Vec::with_capacity(n);
    let mut prev_mu = init.mean.clone();
    let mut prev_var = init.cov.clone();
    for t in 0..n {
        let mut next = &form.transition * &prev_mu;
        if let Some(c) = form.state_intercept_at(t) {
            next += c;
        }
        let v = &form.transition * &prev_var * form.transition.transpose() + &form.state_cov;
        mu.push(next.clone());
        var.push(v.clone());
        prev_mu = next;
        prev_var = v;
    }

    // Cov(x_t, x_s) = T^{t-s} Var(x_s) for t >= s
    let mut sxx = DMatrix::zeros(n * m, n * m);
    for s in 0..n {
        let mut block = var[s].clone();
        for t in s..n {
            sxx.view_mut((t * m, s * m), (m, m)).copy_from(&block);
            sxx.view_mut((s * m, t * m), (m, m)).copy_from(&block.transpose());
            block = &form.transition * block;
        }
    }

    let mut obs = Vec::new();
    for t in 0..n {
        for i in 0..k {
            if !y[(t, i)].is_nan() {
                obs.push((t, i));
            }
        }
    }
    let no = obs.len();
    let mut syy = DMatrix::zeros(no, no);
    let mut sxy = DMatrix::zeros(n * m, no);
    let mut resid = DVector::zeros(no);
    for (a, &(t, i)) in obs.iter().enumerate() {
        let zi = form.observation.row(i);
        let mut mean = (zi * &mu[t])[0];
        if let Some(d) = form.obs_intercept_at(t) {
            mean += d[i];
        }
        resid[a] = y[(t, i)] - mean;
        for (b, &(s, j)) in obs.iter().enumerate() {
            let zj = form.observation.row(j);
            let cxx = sxx.view((t * m, s * m), (m, m));
            let mut c = (zi * cxx * zj.transpose())[0];
            if t == s {
                c += form.obs_cov[(i, j)];
            }
            syy[(a, b)] = c;
        }
        for r in 0..n * m {
            let row = sxx.view((r, t * m), (1, m));
            sxy[(r, a)] = (row * zi.transpose())[0];
        }
    }

    let (log_density, gain) = if no == 0 {
        (0.0, DVector::zeros(0))
    } else {
        let chol = Cholesky::new(syy.clone()).expect("observation covariance must be positive definite");
        let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let alpha = chol.solve(&resid);
        let quad = resid.dot(&alpha);
        (-0.5 * (no as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad), alpha)
    };
    let cond = if no == 0 { DVector::zeros(n * m) } else { &sxy * gain };
    let state_means = (0..n).map(|t| &mu[t] + cond.rows(t * m, m)).collect();
    DenseResult { log_density, state_means }
}

pub struct RandomCase {
    pub form: StateSpaceForm,
    pub y: DMatrix<f64>,
    pub init: Initialization,
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &l * l.transpose() + DMatrix::identity(n, n) * floor
}

/// A random model with m ≤ 2, k ≤ 3, T ≤ 6 and occasional missing cells.
pub fn random_case(seed: u64) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=2usize);
    let k = rng.random_range(1..=3usize);
    let n = rng.random_range(1..=6usize);
    let transition = DMatrix::from_fn(m, m, |_, _| rng.random_range(-0.9..0.9));
    let observation = DMatrix::from_fn(k, m, |_, _| rng.random_range(-1.5..1.5));
    let state_cov = random_psd(&mut rng, m, 0.05);
    let obs_cov = DMatrix::from_fn(k, k, |i, j| if i == j { rng.random_range(0.1..1.0) } else { 0.0 });
    let init = Initialization {
        mean: DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)),
        cov: random_psd(&mut rng, m, 0.1),
        diffuse: false,
    };
    let y = DMatrix::from_fn(n, k, |_, _| if rng.random_bool(0.15) { f64::NAN } else { rng.random_range(-2.0..2.0) });
    let form = StateSpaceForm::new(transition, observation, state_cov, obs_cov).unwrap();
    RandomCase { form, y, init }
}
