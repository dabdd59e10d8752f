//! BFGS ascent with backtracking line search and finite-difference
//! gradients.

use nalgebra::{DMatrix, DVector};

use super::numdiff::gradient;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOptions {
    pub max_iter: usize,
    /// Relative objective improvement below which the search stops.
    pub f_tol: f64,
    /// Scaled gradient norm below which the search stops.
    pub grad_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    FunctionChange,
    LineSearchFailed,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub scaled_gradient_norm: f64,
    pub stop: StopReason,
}

/// `max_i |g_i| · max(1, |x_i|) / max(1, |f|)`.
pub fn scaled_gradient_norm(g: &DVector<f64>, x: &DVector<f64>, f: f64) -> f64 {
    let denom = f.abs().max(1.0);
    g.iter().zip(x.iter()).map(|(gi, xi)| gi.abs() * xi.abs().max(1.0) / denom).fold(0.0, f64::max)
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

/// Maximizes `f` from `x0`. `f` should return a non-finite value where it is
/// undefined; such points are rejected by the line search.
pub fn maximize<F>(f: &F, x0: DVector<f64>, opts: &AscentOptions) -> AscentResult
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let n = x0.len();
    let obj = |x: &DVector<f64>| finite_or_neg_inf(f(x));
    let mut x = x0;
    let mut fx = obj(&x);
    if n == 0 {
        return AscentResult {
            x,
            value: fx,
            gradient: DVector::zeros(0),
            iterations: 0,
            scaled_gradient_norm: 0.0,
            stop: StopReason::Gradient,
        };
    }
    let mut g = gradient(&obj, &x);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;

    if scaled_gradient_norm(&g, &x, fx) < opts.grad_tol {
        stop = StopReason::Gradient;
    } else {
        while iterations < opts.max_iter {
            iterations += 1;
            // ascent direction
            let mut d = &h_inv * &g;
            if !(d.dot(&g) > 0.0) || !d.iter().all(|v| v.is_finite()) {
                h_inv = DMatrix::identity(n, n);
                fresh = true;
                d = g.clone();
            }
            if fresh {
                // keep the first step of a fresh metric modest
                let norm = d.norm();
                if norm > 1.0 {
                    d /= norm;
                }
            }
            let slope = d.dot(&g);
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial = &x + &d * alpha;
                let ft = obj(&trial);
                if ft.is_finite() && ft >= fx + 1e-4 * alpha * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((x_new, f_new)) = accepted else {
                if fresh {
                    stop = StopReason::LineSearchFailed;
                    break;
                }
                h_inv = DMatrix::identity(n, n);
                fresh = true;
                continue;
            };
            let g_new = gradient(&obj, &x_new);
            let s = &x_new - &x;
            // the objective is maximized, so curvature is measured on -g
            let y = &g - &g_new;
            let sy = s.dot(&y);
            if sy > 1e-12 * s.norm() * y.norm() {
                if fresh {
                    h_inv *= sy / y.dot(&y);
                }
                let rho = 1.0 / sy;
                let hy = &h_inv * &y;
                let yhy = y.dot(&hy);
                h_inv +=
                    (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
                fresh = false;
            }
            let improvement = (f_new - fx) / fx.abs().max(1.0);
            x = x_new;
            fx = f_new;
            g = g_new;
            if scaled_gradient_norm(&g, &x, fx) < opts.grad_tol {
                stop = StopReason::Gradient;
                break;
            }
            if improvement < opts.f_tol {
                stop = StopReason::FunctionChange;
                break;
            }
        }
    }
    let scaled = scaled_gradient_norm(&g, &x, fx);
    AscentResult { x, value: fx, gradient: g, iterations, scaled_gradient_norm: scaled, stop }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPTS: AscentOptions = AscentOptions { max_iter: 500, f_tol: 1e-12, grad_tol: 1e-8 };

    #[test]
    fn concave_quadratic() {
        let f = |x: &DVector<f64>| -(x[0] - 1.0).powi(2) - 10.0 * (x[1] + 2.0).powi(2) - x[0] * x[1];
        let r = maximize(&f, DVector::zeros(2), &OPTS);
        // stationary point of the quadratic
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 20.0]);
        let b = DVector::from_column_slice(&[2.0, -40.0]);
        let xs = a.lu().solve(&b).unwrap();
        assert!((&r.x - &xs).amax() < 1e-6, "{} vs {}", r.x, xs);
    }

    #[test]
    fn negative_rosenbrock() {
        let f = |x: &DVector<f64>| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let r = maximize(&f, DVector::from_column_slice(&[-1.2, 1.0]), &OPTS);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{}", r.x);
    }

    #[test]
    fn rejects_undefined_region() {
        // log-likelihood style barrier: undefined for x <= 0
        let f = |x: &DVector<f64>| if x[0] > 0.0 { x[0].ln() - x[0] } else { f64::NAN };
        let r = maximize(&f, DVector::from_element(1, 5.0), &OPTS);
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }
}
