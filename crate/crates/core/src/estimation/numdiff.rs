//! Central finite differences. Columns are independent and are evaluated in
//! parallel; results do not depend on the thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Relative step for gradients.
pub const GRADIENT_STEP: f64 = 1e-5;
/// Relative step for Hessians.
pub const HESSIAN_STEP: f64 = 1e-4;

pub fn step(rel: f64, x: f64) -> f64 {
    rel * x.abs().max(1.0)
}

fn shifted(x: &DVector<f64>, moves: &[(usize, f64)]) -> DVector<f64> {
    let mut y = x.clone();
    for &(i, h) in moves {
        y[i] += h;
    }
    y
}

pub fn gradient<F>(f: &F, x: &DVector<f64>) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let g: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let h = step(GRADIENT_STEP, x[i]);
            (f(&shifted(x, &[(i, h)])) - f(&shifted(x, &[(i, -h)]))) / (2.0 * h)
        })
        .collect();
    DVector::from_vec(g)
}

/// Five-point stencil, used to cross-check [`gradient`].
pub fn gradient_five_point<F>(f: &F, x: &DVector<f64>, rel: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let g: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let h = step(rel, x[i]);
            let fp1 = f(&shifted(x, &[(i, h)]));
            let fm1 = f(&shifted(x, &[(i, -h)]));
            let fp2 = f(&shifted(x, &[(i, 2.0 * h)]));
            let fm2 = f(&shifted(x, &[(i, -2.0 * h)]));
            (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h)
        })
        .collect();
    DVector::from_vec(g)
}

pub fn hessian<F>(f: &F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let n = x.len();
    let f0 = f(x);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let hi = step(HESSIAN_STEP, x[i]);
            let hj = step(HESSIAN_STEP, x[j]);
            if i == j {
                (f(&shifted(x, &[(i, hi)])) - 2.0 * f0 + f(&shifted(x, &[(i, -hi)]))) / (hi * hi)
            } else {
                let pp = f(&shifted(x, &[(i, hi), (j, hj)]));
                let pm = f(&shifted(x, &[(i, hi), (j, -hj)]));
                let mp = f(&shifted(x, &[(i, -hi), (j, hj)]));
                let mm = f(&shifted(x, &[(i, -hi), (j, -hj)]));
                (pp - pm - mp + mm) / (4.0 * hi * hj)
            }
        })
        .collect();
    let mut h = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(entries) {
        h[(i, j)] = v;
        h[(j, i)] = v;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen(x: &DVector<f64>) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn derivatives_of_known_function() {
        let x = DVector::from_column_slice(&[0.3, -0.8]);
        let g = gradient(&rosen, &x);
        let exact = [-2.0 * (1.0 - 0.3) - 400.0 * 0.3 * (-0.8 - 0.09), 200.0 * (-0.8 - 0.09)];
        assert!((g[0] - exact[0]).abs() < 1e-6 && (g[1] - exact[1]).abs() < 1e-6);
        let g5 = gradient_five_point(&rosen, &x, 1e-3);
        assert!((g5[0] - exact[0]).abs() < 1e-7);
        let h = hessian(&rosen, &x);
        let exact_h = [2.0 - 400.0 * (-0.8 - 0.09) + 800.0 * 0.09, -400.0 * 0.3, 200.0];
        assert!((h[(0, 0)] - exact_h[0]).abs() < 1e-3);
        assert!((h[(0, 1)] - exact_h[1]).abs() < 1e-3);
        assert!((h[(1, 1)] - exact_h[2]).abs() < 1e-3);
    }
}
