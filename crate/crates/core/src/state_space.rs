//! Companion-form state-space representation of the factor model.
//!
//! State vector: `(f_t, …, f_{t-p+1}, u_t, …, u_{t-q+1})`. The error block is
//! present only when `q > 0`; otherwise the idiosyncratic noise enters
//! through the observation covariance.
//!
//! Timing: `x_t = T x_{t-1} + c_t + η_t`, `y_t = Z x_t + d_t + e_t`, with
//! `η_t ~ N(0, Qcov)` and `e_t ~ N(0, Hcov)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DfmError, Result};
use crate::linalg::{discrete_lyapunov, psd_sqrt, spectral_radius};
use crate::model::{DfmSpec, ParamSet};

/// Diffuse prior scale used when the transition is not stable.
pub const DIFFUSE_KAPPA: f64 = 1e6;
/// Transitions with spectral radius at or above `1 - STABILITY_MARGIN` get the diffuse prior.
pub const STABILITY_MARGIN: f64 = 1e-8;

/// Where each component lives inside the state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n_factors: usize,
    /// Number of stacked factor lags (`max(p, 1)` when factors exist).
    pub factor_lags: usize,
    pub n_series: usize,
    /// Number of stacked error lags (`q`).
    pub error_lags: usize,
}

impl StateLayout {
    pub fn for_spec(spec: &DfmSpec) -> Self {
        StateLayout {
            n_factors: spec.n_f,
            factor_lags: if spec.n_f > 0 { spec.p.max(1) } else { 0 },
            n_series: spec.k,
            error_lags: spec.q,
        }
    }

    pub fn factor_offset(&self) -> usize {
        0
    }

    pub fn factor_block_len(&self) -> usize {
        self.n_factors * self.factor_lags
    }

    pub fn error_offset(&self) -> usize {
        self.factor_block_len()
    }

    pub fn error_block_len(&self) -> usize {
        self.n_series * self.error_lags
    }

    pub fn dim(&self) -> usize {
        self.factor_block_len() + self.error_block_len()
    }

    /// State index of factor `j` at lag `lag`.
    pub fn factor(&self, lag: usize, j: usize) -> usize {
        self.factor_offset() + lag * self.n_factors + j
    }

    /// State index of the error of series `i` at lag `lag`.
    pub fn error(&self, lag: usize, i: usize) -> usize {
        self.error_offset() + lag * self.n_series + i
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceForm {
    pub transition: DMatrix<f64>,
    pub observation: DMatrix<f64>,
    pub state_cov: DMatrix<f64>,
    pub obs_cov: DMatrix<f64>,
    /// m×T state intercepts (column t is `c_t`), if any.
    pub state_intercept: Option<DMatrix<f64>>,
    /// k×T observation intercepts (column t is `d_t`), if any.
    pub obs_intercept: Option<DMatrix<f64>>,
    pub layout: StateLayout,
}

impl StateSpaceForm {
    /// A time-invariant form without intercepts. `layout` describes a single
    /// block of `m` factor states.
    pub fn new(
        transition: DMatrix<f64>,
        observation: DMatrix<f64>,
        state_cov: DMatrix<f64>,
        obs_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let m = transition.nrows();
        let k = observation.nrows();
        if transition.ncols() != m
            || observation.ncols() != m
            || state_cov.shape() != (m, m)
            || obs_cov.shape() != (k, k)
        {
            return Err(DfmError::DimensionMismatch("inconsistent state-space matrices".into()));
        }
        let layout = StateLayout { n_factors: m, factor_lags: usize::from(m > 0), n_series: k, error_lags: 0 };
        Ok(StateSpaceForm {
            transition,
            observation,
            state_cov,
            obs_cov,
            state_intercept: None,
            obs_intercept: None,
            layout,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.transition.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.observation.nrows()
    }

    /// `c_t` for 0-based time `t`; zero outside the stored path.
    pub fn state_intercept_at(&self, t: usize) -> Option<DVector<f64>> {
        self.state_intercept.as_ref().filter(|c| t < c.ncols()).map(|c| c.column(t).into_owned())
    }

    pub fn obs_intercept_at(&self, t: usize) -> Option<DVector<f64>> {
        self.obs_intercept.as_ref().filter(|d| t < d.ncols()).map(|d| d.column(t).into_owned())
    }

    pub fn is_stable(&self) -> bool {
        spectral_radius(&self.transition) < 1.0 - STABILITY_MARGIN
    }
}

/// Builds the companion form. Exogenous paths are T×n_x and T×n_w and are
/// required exactly when the spec declares those blocks.
pub fn build(
    spec: &DfmSpec,
    params: &ParamSet,
    exog_obs: Option<&DMatrix<f64>>,
    exog_state: Option<&DMatrix<f64>>,
) -> Result<StateSpaceForm> {
    spec.validate()?;
    params.check(spec)?;
    let lay = StateLayout::for_spec(spec);
    let (k, n_f) = (spec.k, spec.n_f);
    let m = lay.dim();
    let sigma2 = params.idio_var();
    if sigma2.iter().any(|v| !v.is_finite()) {
        return Err(DfmError::NonFiniteValue("idiosyncratic variances".into()));
    }

    let mut tr = DMatrix::zeros(m, m);
    let mut z = DMatrix::zeros(k, m);
    let mut qcov = DMatrix::zeros(m, m);
    let mut hcov = DMatrix::zeros(k, k);

    if n_f > 0 {
        for (lag, a) in params.factor_ar.iter().enumerate() {
            tr.view_mut((lay.factor(0, 0), lay.factor(lag, 0)), (n_f, n_f)).copy_from(a);
        }
        for lag in 1..lay.factor_lags {
            for j in 0..n_f {
                tr[(lay.factor(lag, j), lay.factor(lag - 1, j))] = 1.0;
            }
        }
        for j in 0..n_f {
            qcov[(lay.factor(0, j), lay.factor(0, j))] = 1.0;
        }
        z.view_mut((0, lay.factor(0, 0)), (k, n_f)).copy_from(&params.loadings);
    }
    if spec.q > 0 {
        for (lag, c) in params.error_ar.iter().enumerate() {
            tr.view_mut((lay.error(0, 0), lay.error(lag, 0)), (k, k)).copy_from(c);
        }
        for lag in 1..spec.q {
            for i in 0..k {
                tr[(lay.error(lag, i), lay.error(lag - 1, i))] = 1.0;
            }
        }
        for i in 0..k {
            qcov[(lay.error(0, i), lay.error(0, i))] = sigma2[i];
            z[(i, lay.error(0, i))] = 1.0;
        }
    } else {
        for i in 0..k {
            hcov[(i, i)] = sigma2[i];
        }
    }

    let obs_intercept = exogenous_path("observation", spec.n_x, exog_obs, |x| {
        let mut d = DMatrix::zeros(k, x.nrows());
        for t in 0..x.nrows() {
            d.set_column(t, &(&params.obs_exog * x.row(t).transpose()));
        }
        d
    })?;
    let state_intercept = exogenous_path("factor", spec.n_w, exog_state, |w| {
        let mut c = DMatrix::zeros(m, w.nrows());
        for t in 0..w.nrows() {
            let rw = &params.factor_exog * w.row(t).transpose();
            c.view_mut((lay.factor(0, 0), t), (n_f, 1)).copy_from(&rw);
        }
        c
    })?;

    Ok(StateSpaceForm {
        transition: tr,
        observation: z,
        state_cov: qcov,
        obs_cov: hcov,
        state_intercept,
        obs_intercept,
        layout: lay,
    })
}

fn exogenous_path(
    which: &str,
    n: usize,
    path: Option<&DMatrix<f64>>,
    f: impl FnOnce(&DMatrix<f64>) -> DMatrix<f64>,
) -> Result<Option<DMatrix<f64>>> {
    match (n, path) {
        (0, None) => Ok(None),
        (0, Some(p)) if p.ncols() == 0 => Ok(None),
        (0, Some(_)) => {
            Err(DfmError::DimensionMismatch(format!("{which} exogenous path supplied but the spec declares none")))
        }
        (_, None) => Err(DfmError::DimensionMismatch(format!("{which} exogenous path is required"))),
        (n, Some(p)) => {
            if p.ncols() != n {
                return Err(DfmError::DimensionMismatch(format!(
                    "{which} exogenous path has {} columns, expected {n}",
                    p.ncols()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(DfmError::NonFiniteValue(format!("{which} exogenous path")));
            }
            Ok(Some(f(p)))
        }
    }
}

/// Prior for the state before the first observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub diffuse: bool,
}

/// Stationary mean and covariance when the transition is stable, otherwise a
/// zero mean with covariance `DIFFUSE_KAPPA · I`.
///
/// With exogenous state intercepts the stationary mean uses the first
/// period's intercept.
pub fn stationary_initialization(form: &StateSpaceForm) -> Initialization {
    let m = form.state_dim();
    let diffuse =
        || Initialization { mean: DVector::zeros(m), cov: DMatrix::identity(m, m) * DIFFUSE_KAPPA, diffuse: true };
    if !form.is_stable() {
        return diffuse();
    }
    let Some(cov) = discrete_lyapunov(&form.transition, &form.state_cov) else {
        return diffuse();
    };
    let mean = match form.state_intercept_at(0) {
        Some(c) => {
            let lhs = DMatrix::identity(m, m) - &form.transition;
            match lhs.lu().solve(&c) {
                Some(mu) => mu,
                None => return diffuse(),
            }
        }
        None => DVector::zeros(m),
    };
    Initialization { mean, cov, diffuse: false }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Zero,
    Given(DVector<f64>),
    /// A draw from the stationary distribution (zero if the form is unstable).
    Stationary,
}

/// Simulated paths, one row per period.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// T×k observations.
    pub observations: DMatrix<f64>,
    /// T×m states.
    pub states: DMatrix<f64>,
    /// T×n_f current factors.
    pub factors: DMatrix<f64>,
}

/// Runs the recursion with caller-supplied shocks (T×m state shocks and T×k
/// observation shocks).
pub fn simulate_with_shocks(
    form: &StateSpaceForm,
    x0: &DVector<f64>,
    state_shocks: &DMatrix<f64>,
    obs_shocks: &DMatrix<f64>,
) -> Result<Simulation> {
    let (m, k) = (form.state_dim(), form.obs_dim());
    let horizon = state_shocks.nrows();
    if x0.len() != m || state_shocks.ncols() != m || obs_shocks.shape() != (horizon, k) {
        return Err(DfmError::DimensionMismatch("shock matrices do not match the form".into()));
    }
    let mut states = DMatrix::zeros(horizon, m);
    let mut obs = DMatrix::zeros(horizon, k);
    let mut x = x0.clone();
    for t in 0..horizon {
        let mut next = &form.transition * &x + state_shocks.row(t).transpose();
        if let Some(c) = form.state_intercept_at(t) {
            next += c;
        }
        x = next;
        let mut y = &form.observation * &x + obs_shocks.row(t).transpose();
        if let Some(d) = form.obs_intercept_at(t) {
            y += d;
        }
        states.set_row(t, &x.transpose());
        obs.set_row(t, &y.transpose());
    }
    let lay = form.layout;
    let factors = states.columns(lay.factor(0, 0), lay.n_factors).into_owned();
    Ok(Simulation { observations: obs, states, factors })
}

/// Gaussian simulation, deterministic in `seed`.
pub fn simulate(form: &StateSpaceForm, horizon: usize, seed: u64, start: &InitialState) -> Result<Simulation> {
    if horizon == 0 {
        return Err(DfmError::InvalidHorizon);
    }
    let (m, k) = (form.state_dim(), form.obs_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |n: usize| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));

    let x0 = match start {
        InitialState::Zero => DVector::zeros(m),
        InitialState::Given(v) => {
            if v.len() != m {
                return Err(DfmError::DimensionMismatch("initial state length".into()));
            }
            v.clone()
        }
        InitialState::Stationary => {
            let init = stationary_initialization(form);
            if init.diffuse {
                DVector::zeros(m)
            } else {
                init.mean + psd_sqrt(&init.cov) * normal(m)
            }
        }
    };
    let lq = psd_sqrt(&form.state_cov);
    let lh = psd_sqrt(&form.obs_cov);
    let mut state_shocks = DMatrix::zeros(horizon, m);
    let mut obs_shocks = DMatrix::zeros(horizon, k);
    for t in 0..horizon {
        state_shocks.set_row(t, &(&lq * normal(m)).transpose());
        obs_shocks.set_row(t, &(&lh * normal(k)).transpose());
    }
    simulate_with_shocks(form, &x0, &state_shocks, &obs_shocks)
}

/// Maps a factor innovation `ν_t` and an idiosyncratic innovation `ε_t` onto
/// the form's (state shock, observation shock) pair.
pub fn split_innovations(layout: &StateLayout, nu: &DVector<f64>, eps: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let mut state = DVector::zeros(layout.dim());
    for j in 0..layout.n_factors {
        state[layout.factor(0, j)] = nu[j];
    }
    if layout.error_lags > 0 {
        for i in 0..layout.n_series {
            state[layout.error(0, i)] = eps[i];
        }
        (state, DVector::zeros(layout.n_series))
    } else {
        (state, eps.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn smallest_dynamic_factor_case() {
        let spec = DfmSpec::new(2, 1, 1, 0).unwrap();
        let mut ps = ParamSet::zeros(&spec);
        ps.loadings = DMatrix::from_column_slice(2, 1, &[0.9, -0.4]);
        ps.factor_ar[0] = scalar(0.7);
        ps.set_idio_var(&DVector::from_column_slice(&[0.3, 0.5])).unwrap();
        let f = build(&spec, &ps, None, None).unwrap();
        assert_eq!(f.state_dim(), 1);
        assert_eq!(f.transition, scalar(0.7));
        assert_eq!(f.observation, ps.loadings);
        assert_eq!(f.state_cov, scalar(1.0));
        assert!((f.obs_cov[(0, 0)] - 0.3).abs() < 1e-15 && (f.obs_cov[(1, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(f.obs_cov[(0, 1)], 0.0);
    }

    #[test]
    fn ar2_companion() {
        let spec = DfmSpec::new(2, 1, 2, 0).unwrap();
        let mut ps = ParamSet::zeros(&spec);
        ps.loadings = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        ps.factor_ar = vec![scalar(0.5), scalar(-0.2)];
        let f = build(&spec, &ps, None, None).unwrap();
        assert_eq!(f.transition, DMatrix::from_row_slice(2, 2, &[0.5, -0.2, 1.0, 0.0]));
        assert_eq!(f.observation, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]));
        assert_eq!(f.state_cov, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn var_error_block() {
        let spec = DfmSpec::new(2, 1, 1, 1).unwrap();
        let mut ps = ParamSet::zeros(&spec);
        ps.loadings = DMatrix::from_column_slice(2, 1, &[0.8, 0.6]);
        ps.factor_ar[0] = scalar(0.9);
        ps.error_ar[0] = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.0, -0.2]);
        ps.set_idio_var(&DVector::from_column_slice(&[0.25, 0.5])).unwrap();
        let f = build(&spec, &ps, None, None).unwrap();
        assert_eq!(f.state_dim(), 3);
        assert_eq!(f.transition, DMatrix::from_row_slice(3, 3, &[0.9, 0.0, 0.0, 0.0, 0.3, 0.1, 0.0, 0.0, -0.2]));
        assert_eq!(f.observation, DMatrix::from_row_slice(2, 3, &[0.8, 1.0, 0.0, 0.6, 0.0, 1.0]));
        assert_eq!(f.obs_cov, DMatrix::zeros(2, 2));
        let d = f.state_cov.diagonal();
        assert_eq!(d[0], 1.0);
        assert!((d[1] - 0.25).abs() < 1e-15 && (d[2] - 0.5).abs() < 1e-15);
        // companion shift rows have exactly one unit entry
        let spec = DfmSpec::new(2, 1, 3, 2).unwrap();
        let f = build(&spec, &ParamSet::zeros(&spec), None, None).unwrap();
        let lay = f.layout;
        for lag in 1..3 {
            let row = f.transition.row(lay.factor(lag, 0));
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
        }
        for i in 0..2 {
            let row = f.transition.row(lay.error(1, i));
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v != 0.0).count(), 1);
        }
    }

    #[test]
    fn exogenous_intercepts() {
        let spec = DfmSpec::new(2, 1, 1, 0).unwrap().with_exogenous(1, 1).unwrap();
        let mut ps = ParamSet::zeros(&spec);
        ps.obs_exog = DMatrix::from_column_slice(2, 1, &[2.0, -1.0]);
        ps.factor_exog = scalar(0.5);
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let w = DMatrix::from_column_slice(3, 1, &[4.0, 0.0, -2.0]);
        let f = build(&spec, &ps, Some(&x), Some(&w)).unwrap();
        assert_eq!(f.obs_intercept_at(1).unwrap().as_slice(), &[4.0, -2.0]);
        assert_eq!(f.state_intercept_at(2).unwrap().as_slice(), &[-1.0]);
        assert!(f.state_intercept_at(3).is_none());
        assert!(matches!(build(&spec, &ps, None, Some(&w)), Err(DfmError::DimensionMismatch(_))));
    }

    #[test]
    fn stationary_init_cases() {
        let f = StateSpaceForm::new(scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let init = stationary_initialization(&f);
        assert!(!init.diffuse);
        assert!((init.cov[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        let f = StateSpaceForm::new(scalar(0.0), scalar(1.0), scalar(2.5), scalar(0.0)).unwrap();
        assert_eq!(stationary_initialization(&f).cov, scalar(2.5));
        let f = StateSpaceForm::new(scalar(1.0), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let init = stationary_initialization(&f);
        assert!(init.diffuse);
        assert_eq!(init.cov, scalar(1e6));
    }

    #[test]
    fn simulate_deterministic_paths() {
        let f = StateSpaceForm::new(scalar(0.5), scalar(1.0), scalar(0.0), scalar(0.0)).unwrap();
        let s = simulate(&f, 4, 3, &InitialState::Given(DVector::from_element(1, 1.0))).unwrap();
        assert_eq!(s.factors.as_slice(), &[0.5, 0.25, 0.125, 0.0625]);
        assert_eq!(s.observations, s.factors);

        let spec = DfmSpec::new(3, 1, 2, 1).unwrap();
        let mut zero = build(&spec, &ParamSet::zeros(&spec), None, None).unwrap();
        zero.state_cov.fill(0.0);
        zero.obs_cov.fill(0.0);
        let s = simulate(&zero, 10, 1, &InitialState::Zero).unwrap();
        assert!(s.observations.iter().all(|&v| v == 0.0));
        assert_eq!(simulate(&zero, 0, 1, &InitialState::Zero), Err(DfmError::InvalidHorizon));
    }

    #[test]
    fn simulate_seed_determinism_and_moments() {
        let f = StateSpaceForm::new(scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let a = simulate(&f, 20_000, 11, &InitialState::Stationary).unwrap();
        let b = simulate(&f, 20_000, 11, &InitialState::Stationary).unwrap();
        assert_eq!(a, b);
        let c = simulate(&f, 20_000, 12, &InitialState::Stationary).unwrap();
        assert_ne!(a, c);
        let n = a.factors.nrows() as f64;
        let var = a.factors.iter().map(|v| v * v).sum::<f64>() / n;
        assert!((var - 4.0 / 3.0).abs() < 0.06, "sample variance {var}");
    }
}
