//! Maximum-likelihood estimation, observed-information standard errors and
//! z-statistics.

pub mod em;
pub mod init;
pub mod numdiff;
pub mod optimizer;
mod reduce;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};

use crate::error::{DfmError, Result};
use crate::kalman::{filter, loglik_values, smooth};
use crate::model::{pack, parameter_names, unpack, BlockKind, DfmSpec, Layout, ParamSet, ParamVector};
use crate::state_space::{build, stationary_initialization, StateSpaceForm};
use crate::timeseries::{check_standardized, Panel, SeriesStats, TimeIndex};

pub use init::initialize;
pub use optimizer::StopReason;
pub use reduce::{reduce, SignificanceFilter};

/// Panels must match mean 0 / variance 1 within this tolerance before fitting.
pub const STANDARDIZATION_TOL: f64 = 1e-6;

/// Per-loading values, k rows of n_f entries, `None` where unavailable.
pub type LoadingStdErrors = Vec<Vec<Option<f64>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative log-likelihood improvement that ends the ascent.
    pub tolerance: f64,
    /// Scaled gradient norm that ends the ascent and defines convergence.
    pub gradient_tolerance: f64,
    pub em_warm_start: bool,
    pub em_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 500, tolerance: 1e-9, gradient_tolerance: 1e-5, em_warm_start: false, em_sweeps: 10 }
    }
}

/// Exogenous regressor paths, T×n_x for the observation equation and T×n_w
/// for the factor equation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Exogenous {
    pub obs_names: Vec<String>,
    pub obs: Option<DMatrix<f64>>,
    pub factor_names: Vec<String>,
    pub factor: Option<DMatrix<f64>>,
}

impl Exogenous {
    pub fn none() -> Self {
        Exogenous::default()
    }
}

/// One row of the coefficient table, on the natural scale (idiosyncratic
/// variances rather than their logs).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub spec: DfmSpec,
    pub series: Vec<String>,
    pub index: TimeIndex,
    pub exogenous: Exogenous,
    pub estimates: ParamSet,
    pub flat: ParamVector,
    /// Inverse negative Hessian of the log-likelihood in the flat
    /// parameterization, when positive definite.
    pub covariance: Option<DMatrix<f64>>,
    pub rows: Vec<ParameterRow>,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    pub converged: bool,
    pub stop: StopReason,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// T×n_f smoothed factor means and variances.
    pub smoothed_factor: DMatrix<f64>,
    pub smoothed_factor_var: DMatrix<f64>,
    /// T×n_f filtered factor means and variances.
    pub filtered_factor: DMatrix<f64>,
    pub filtered_factor_var: DMatrix<f64>,
    pub sign_convention_applied: bool,
    pub diagnostics: Vec<String>,
}

impl EstimationReport {
    pub fn row(&self, name: &str) -> Option<&ParameterRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn std_errors(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.std_error).collect()
    }

    pub fn z_stats(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.z).collect()
    }

    pub fn p_values(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.p_value).collect()
    }

    pub fn form(&self) -> Result<StateSpaceForm> {
        build(&self.spec, &self.estimates, self.exogenous.obs.as_ref(), self.exogenous.factor.as_ref())
    }

    /// Loading p-values, k×n_f, `None` where standard errors are unavailable.
    pub fn loading_p_values(&self) -> Vec<Vec<Option<f64>>> {
        let block = self.flat.layout.block(BlockKind::Loadings).expect("layout always has loadings");
        (0..block.rows).map(|i| (0..block.cols).map(|j| self.rows[block.position(i, j)].p_value).collect()).collect()
    }

    /// Loadings and their standard errors mapped back to the units of the
    /// unstandardized series (`λ·σ_i`).
    pub fn loadings_in_original_units(&self, stats: &[SeriesStats]) -> Result<(DMatrix<f64>, LoadingStdErrors)> {
        if stats.len() != self.spec.k {
            return Err(DfmError::DimensionMismatch(format!("{} stats for {} series", stats.len(), self.spec.k)));
        }
        let block = self.flat.layout.block(BlockKind::Loadings).expect("layout always has loadings").clone();
        let mut lo = self.estimates.loadings.clone();
        let mut se = vec![vec![None; block.cols]; block.rows];
        for i in 0..block.rows {
            for j in 0..block.cols {
                lo[(i, j)] *= stats[i].std;
                se[i][j] = self.rows[block.position(i, j)].std_error.map(|s| s * stats[i].std);
            }
        }
        Ok((lo, se))
    }
}

/// `estimate / std_error`.
pub fn zstat(estimate: f64, std_error: f64) -> Result<f64> {
    if !(std_error > 0.0) {
        return Err(DfmError::NonPositiveStdError(std_error));
    }
    Ok(estimate / std_error)
}

/// Two-sided standard-normal p-value, `2·(1 − Φ(|z|))`.
pub fn p_value(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// The lagged-factor coefficient of a one-factor AR(1) model.
pub fn persistence(report: &EstimationReport) -> Result<f64> {
    if report.spec.n_f != 1 || report.spec.p != 1 {
        return Err(DfmError::WrongShape(format!(
            "persistence needs n_f = 1 and p = 1, got n_f = {} and p = {}",
            report.spec.n_f, report.spec.p
        )));
    }
    Ok(report.estimates.factor_ar[0][(0, 0)])
}

/// Log-likelihood at a flat parameter vector under the stationary prior.
/// Undefined points (singular innovations, non-finite values) give `-inf`.
pub fn objective(spec: &DfmSpec, panel: &Panel, exog: &Exogenous, theta: &DVector<f64>) -> f64 {
    let eval = || -> Result<f64> {
        let ps = unpack(theta, spec)?;
        let form = build(spec, &ps, exog.obs.as_ref(), exog.factor.as_ref())?;
        loglik_values(&form, panel.values(), &stationary_initialization(&form))
    };
    eval().unwrap_or(f64::NEG_INFINITY)
}

/// Flips each factor so the largest-magnitude entry of its loading column is
/// positive. Returns whether anything changed.
pub fn apply_sign_convention(params: &mut ParamSet) -> bool {
    let mut flipped = false;
    for j in 0..params.loadings.ncols() {
        let col = params.loadings.column(j);
        let pivot = col.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            params.flip_factor(j);
            flipped = true;
        }
    }
    flipped
}

pub fn fit(spec: &DfmSpec, panel: &Panel, options: &FitOptions) -> Result<EstimationReport> {
    fit_with_exog(spec, panel, &Exogenous::none(), options)
}

pub fn fit_with_exog(
    spec: &DfmSpec,
    panel: &Panel,
    exog: &Exogenous,
    options: &FitOptions,
) -> Result<EstimationReport> {
    check_standardized(panel, STANDARDIZATION_TOL)?;
    let start = initialize(spec, panel)?;
    fit_from(spec, panel, exog, start, options)
}

/// Fits starting from explicit parameter values.
pub fn fit_from(
    spec: &DfmSpec,
    panel: &Panel,
    exog: &Exogenous,
    start: ParamSet,
    options: &FitOptions,
) -> Result<EstimationReport> {
    spec.validate()?;
    if panel.n_series() != spec.k {
        return Err(DfmError::DimensionMismatch(format!("panel has {} series, spec has {}", panel.n_series(), spec.k)));
    }
    check_standardized(panel, STANDARDIZATION_TOL)?;
    let mut diagnostics = Vec::new();

    let mut start = start;
    if options.em_warm_start {
        if em::supports(spec) {
            start = em::warm_start(spec, panel, &start, options.em_sweeps)?;
        } else {
            diagnostics.push("EM warm start skipped: only available for q = 0 without exogenous blocks".into());
        }
    }

    let theta0 = pack(&start, spec)?;
    let layout = theta0.layout.clone();
    let f = |theta: &DVector<f64>| objective(spec, panel, exog, theta);
    let ll0 = f(&theta0.values);
    if !ll0.is_finite() {
        return Err(DfmError::OptimizerDiverged);
    }
    let ascent = optimizer::maximize(
        &f,
        theta0.values.clone(),
        &optimizer::AscentOptions {
            max_iter: options.max_iter,
            f_tol: options.tolerance,
            grad_tol: options.gradient_tolerance,
        },
    );
    debug!(
        "ascent stopped after {} iterations ({:?}), loglik {:.6} -> {:.6}, scaled gradient {:.3e}",
        ascent.iterations, ascent.stop, ll0, ascent.value, ascent.scaled_gradient_norm
    );
    let converged = ascent.scaled_gradient_norm < options.gradient_tolerance;
    if !converged {
        diagnostics.push(format!(
            "ascent stopped ({:?}) with scaled gradient norm {:.3e}",
            ascent.stop, ascent.scaled_gradient_norm
        ));
    }

    let mut estimates = unpack(&ascent.x, spec)?;
    let sign_convention_applied = apply_sign_convention(&mut estimates);
    let flat = pack(&estimates, spec)?;
    let log_likelihood = f(&flat.values);

    let hess = numdiff::hessian(&f, &flat.values);
    let neg = -hess;
    let covariance = if neg.iter().all(|v| v.is_finite()) { neg.clone().cholesky().map(|c| c.inverse()) } else { None };
    if covariance.is_none() {
        warn!("negative Hessian is not positive definite; standard errors omitted");
        diagnostics.push("HessianNotPD: negative Hessian is not positive definite; standard errors omitted".into());
    }
    let rows = coefficient_rows(spec, panel.names(), exog, &layout, &flat.values, covariance.as_ref());

    let form = build(spec, &estimates, exog.obs.as_ref(), exog.factor.as_ref())?;
    let fr = filter(&form, panel, &stationary_initialization(&form))?;
    let sm = smooth(&form, &fr);

    Ok(EstimationReport {
        spec: *spec,
        series: panel.names().to_vec(),
        index: *panel.index(),
        exogenous: exog.clone(),
        estimates,
        flat,
        covariance,
        rows,
        log_likelihood,
        initial_log_likelihood: ll0,
        converged,
        stop: ascent.stop,
        iterations: ascent.iterations,
        gradient_norm: ascent.scaled_gradient_norm,
        smoothed_factor: sm.factor_means(&form),
        smoothed_factor_var: sm.factor_variances(&form),
        filtered_factor: crate::kalman::extract_factors(&fr.filtered_means, &form),
        filtered_factor_var: crate::kalman::extract_factor_vars(&fr.filtered_covs, &form),
        sign_convention_applied,
        diagnostics,
    })
}

fn coefficient_rows(
    spec: &DfmSpec,
    series: &[String],
    exog: &Exogenous,
    layout: &Layout,
    theta: &DVector<f64>,
    cov: Option<&DMatrix<f64>>,
) -> Vec<ParameterRow> {
    let names = parameter_names(spec, series, &exog.obs_names, &exog.factor_names);
    let log_var = layout.block(BlockKind::LogIdioVar).expect("layout always has variances");
    (0..theta.len())
        .map(|i| {
            let is_var = i >= log_var.offset && i < log_var.offset + log_var.len();
            let (estimate, scale) = if is_var {
                let v = theta[i].exp();
                // delta method for exp(θ)
                (v, v)
            } else {
                (theta[i], 1.0)
            };
            let std_error = cov.and_then(|c| {
                let var = c[(i, i)];
                (var > 0.0).then(|| var.sqrt() * scale)
            });
            let z = std_error.and_then(|s| zstat(estimate, s).ok());
            ParameterRow { name: names[i].clone(), estimate, std_error, z, p_value: z.map(p_value) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotients_from_the_debt_and_reserve_rows() {
        let z1 = zstat(1.214605, 0.3104895).unwrap();
        let z2 = zstat(1.038016, 0.300841).unwrap();
        assert_eq!(format!("{z1:.7}"), "3.9119036");
        assert_eq!(format!("{z2:.7}"), "3.4503808");
        assert_eq!(zstat(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(zstat(1.0, 0.0), Err(DfmError::NonPositiveStdError(0.0)));
        assert!(zstat(1.0, -1.0).is_err());
    }

    #[test]
    fn p_values_against_high_precision_reference() {
        // 2·(1 − Φ(|z|)) evaluated with 50-digit arithmetic
        let reference = [
            (0.0, 1.0),
            (0.5, 0.617_075_077_451_973_8),
            (1.0, 0.3173105078629141),
            (1.959963984540054, 0.050_000_000_000_000_03),
            (3.0, 0.002_699_796_063_260_189),
            (3.9119036, 9.15714657330329e-5),
            (6.0, 1.973_175_290_075_396e-9),
        ];
        for (z, p) in reference {
            assert!((p_value(z) - p).abs() < 1e-12, "z={z}: {} vs {p}", p_value(z));
            assert_eq!(p_value(z), p_value(-z));
        }
    }

    #[test]
    fn sign_convention_makes_largest_loading_positive() {
        let spec = DfmSpec::new(3, 2, 1, 0).unwrap();
        let mut ps = ParamSet::zeros(&spec);
        ps.loadings = DMatrix::from_row_slice(3, 2, &[0.2, 0.5, -0.9, 0.1, 0.4, -0.7]);
        ps.factor_ar[0] = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.3]);
        assert!(apply_sign_convention(&mut ps));
        assert_eq!(ps.loadings.column(0).as_slice(), &[-0.2, 0.9, -0.4]);
        assert_eq!(ps.loadings.column(1).as_slice(), &[-0.5, -0.1, 0.7]);
        // both factors flipped: off-diagonals flip twice
        assert_eq!(ps.factor_ar[0], DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.3]));
        assert!(!apply_sign_convention(&mut ps));
    }
}
