//! Small dense linear-algebra helpers shared by the filter and the estimator.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

/// Largest condition number accepted for a covariance that must be inverted.
pub const MAX_CONDITION: f64 = 1e12;

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Solves `S = A S Aᵀ + Q` by the doubling recursion. Returns `None` when the
/// recursion fails to converge (caller should have checked stability).
pub fn discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let mut ak = a.clone();
    let mut s = q.clone();
    for _ in 0..200 {
        let incr = &ak * &s * ak.transpose();
        s += &incr;
        ak = &ak * &ak;
        let scale = s.amax().max(1.0);
        if incr.amax() <= 1e-17 * scale && ak.amax() < 1e-12 {
            symmetrize(&mut s);
            return Some(s);
        }
        if !s.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

/// Cholesky factor of a symmetric positive-definite matrix, refused when the
/// matrix is numerically singular or its condition number exceeds
/// [`MAX_CONDITION`].
pub fn guarded_cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if !(lo > 0.0) || (hi / lo).powi(2) > MAX_CONDITION {
        return None;
    }
    Some(chol)
}

/// Moore-Penrose inverse of a symmetric matrix; eigenvalues below
/// `tol * max|eigenvalue|` are treated as zero.
pub fn pinv_sym(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.amax();
    let mut out = DMatrix::zeros(n, n);
    if top == 0.0 {
        return out;
    }
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() > tol * top {
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

/// A square root `L` with `L Lᵀ = m` for a symmetric PSD matrix, tolerating
/// singular matrices (negative round-off eigenvalues are clipped).
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.iter().all(|&v| v == 0.0) {
        return DMatrix::zeros(n, n);
    }
    let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0));
    if is_diag {
        return DMatrix::from_fn(n, n, |i, j| if i == j { m[(i, i)].max(0.0).sqrt() } else { 0.0 });
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut l = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        l.column_mut(j).scale_mut(lam.max(0.0).sqrt());
    }
    l
}

/// Smallest eigenvalue of a symmetric matrix (0 for the empty matrix).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}
