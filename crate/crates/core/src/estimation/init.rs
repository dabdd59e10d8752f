//! Starting values from principal components.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{DfmError, Result};
use crate::linalg::spectral_radius;
use crate::model::{DfmSpec, ParamSet};
use crate::timeseries::Panel;

/// Lower bound for starting idiosyncratic variances.
pub const VARIANCE_FLOOR: f64 = 0.05;
/// Starting factor dynamics are shrunk to at most this spectral radius.
const MAX_START_RADIUS: f64 = 0.98;

/// Principal-component starting values.
///
/// Loadings come from the leading eigenvectors of the correlation matrix of
/// the mean-imputed panel, factor lags from a least-squares VAR on the
/// component scores, rotated so the factor innovations have unit
/// covariance. Error lags start at zero; idiosyncratic variances are the
/// residual variances, floored at [`VARIANCE_FLOOR`].
pub fn initialize(spec: &DfmSpec, panel: &Panel) -> Result<ParamSet> {
    spec.validate()?;
    let (n, k) = (panel.n_periods(), panel.n_series());
    if k != spec.k {
        return Err(DfmError::DimensionMismatch(format!("panel has {k} series, spec has {}", spec.k)));
    }
    if spec.n_f > k {
        return Err(DfmError::InvalidSpec(format!("{} factors for {k} series", spec.n_f)));
    }
    let mut ps = ParamSet::zeros(spec);

    // mean-imputed panel and per-series scale
    let mut filled = DMatrix::zeros(n, k);
    let mut scale = DVector::zeros(k);
    for j in 0..k {
        let obs = panel.observed(j);
        let mean = obs.iter().sum::<f64>() / obs.len() as f64;
        for t in 0..n {
            filled[(t, j)] = panel.get(t, j).map_or(0.0, |v| v - mean);
        }
        let var = filled.column(j).norm_squared() / n as f64;
        if !(var > 0.0) {
            return Err(DfmError::DegenerateCovariance);
        }
        scale[j] = var.sqrt();
    }
    let unit = DMatrix::from_fn(n, k, |t, j| filled[(t, j)] / scale[j]);

    let fitted = if spec.n_f == 0 {
        DMatrix::zeros(n, k)
    } else {
        let corr = (unit.transpose() * &unit) / n as f64;
        let eig = SymmetricEigen::new(corr);
        if eig.eigenvalues.min() < -1e-8 {
            return Err(DfmError::DegenerateCovariance);
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let mut loadings = DMatrix::zeros(k, spec.n_f);
        let mut scores = DMatrix::zeros(n, spec.n_f);
        for (c, &idx) in order.iter().take(spec.n_f).enumerate() {
            let lam = eig.eigenvalues[idx];
            if !(lam > 1e-10) {
                return Err(DfmError::DegenerateCovariance);
            }
            let v = eig.eigenvectors.column(idx);
            scores.set_column(c, &((&unit * v) / lam.sqrt()));
            for i in 0..k {
                loadings[(i, c)] = v[i] * lam.sqrt() * scale[i];
            }
        }
        let (ar, resid_cov) = fit_var(&scores, spec.p);
        // rotate so factor innovations have identity covariance
        let identity = DMatrix::identity(spec.n_f, spec.n_f);
        let (l, l_inv) = match resid_cov.cholesky() {
            Some(c) => {
                let l = c.l();
                match l.clone().try_inverse() {
                    Some(inv) => (l, inv),
                    None => (identity.clone(), identity),
                }
            }
            None => (identity.clone(), identity),
        };
        ps.loadings = &loadings * &l;
        ps.factor_ar = ar.iter().map(|a| &l_inv * a * &l).collect();
        shrink_to_stable(&mut ps.factor_ar);
        &scores * loadings.transpose()
    };

    let mut var = DVector::zeros(k);
    for j in 0..k {
        let (mut acc, mut cnt) = (0.0, 0usize);
        for t in 0..n {
            if panel.get(t, j).is_some() {
                let r = filled[(t, j)] - fitted[(t, j)];
                acc += r * r;
                cnt += 1;
            }
        }
        var[j] = (acc / cnt as f64).max(VARIANCE_FLOOR);
    }
    ps.set_idio_var(&var)?;
    Ok(ps)
}

/// Least-squares VAR(p) without intercept. Returns the lag matrices and the
/// residual covariance (the score covariance when `p = 0`).
fn fit_var(f: &DMatrix<f64>, p: usize) -> (Vec<DMatrix<f64>>, DMatrix<f64>) {
    let (n, r) = (f.nrows(), f.ncols());
    if p == 0 || n <= p + r * p {
        let cov = (f.transpose() * f) / n as f64;
        return (vec![DMatrix::zeros(r, r); p], cov);
    }
    let rows = n - p;
    let x = DMatrix::from_fn(rows, r * p, |t, c| {
        let lag = c / r + 1;
        f[(t + p - lag, c % r)]
    });
    let y = f.rows(p, rows).into_owned();
    let xtx = x.transpose() * &x;
    let Some(coef) = xtx.lu().solve(&(x.transpose() * &y)) else {
        let cov = (f.transpose() * f) / n as f64;
        return (vec![DMatrix::zeros(r, r); p], cov);
    };
    let resid = &y - &x * &coef;
    let cov = (resid.transpose() * &resid) / rows as f64;
    // coef is (r·p)×r with rows grouped by lag; A_i = coefᵀ restricted to lag i
    let ar = (0..p).map(|i| coef.rows(i * r, r).transpose()).collect();
    (ar, cov)
}

/// Scales factor lag matrices down when the implied companion matrix is not
/// comfortably stable.
pub(crate) fn shrink_to_stable(ar: &mut [DMatrix<f64>]) {
    if ar.is_empty() {
        return;
    }
    let r = ar[0].nrows();
    let p = ar.len();
    let mut comp = DMatrix::zeros(r * p, r * p);
    for (i, a) in ar.iter().enumerate() {
        comp.view_mut((0, i * r), (r, r)).copy_from(a);
    }
    for i in r..r * p {
        comp[(i, i - r)] = 1.0;
    }
    let rho = spectral_radius(&comp);
    if rho >= MAX_START_RADIUS {
        let c = 0.95 / rho;
        // scaling lag i by c^i scales every companion root by c
        for (i, a) in ar.iter_mut().enumerate() {
            *a *= c.powi(i as i32 + 1);
        }
    }
}
