//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue cutoff used for every pseudoinverse. For a data
/// matrix it applies to the eigenvalues of its Gram matrix, i.e. to the
/// spectrum of the sample covariance.
pub const PINV_RCOND: f64 = 1e-10;

/// Moore-Penrose pseudoinverse through the smaller Gram matrix:
/// `(A^T A)^+ A^T` for tall inputs, `A^T (A A^T)^+` for wide ones.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    if r >= c {
        pinv_sym(&(a.transpose() * a)).0 * a.transpose()
    } else {
        a.transpose() * pinv_sym(&(a * a.transpose())).0
    }
}

/// Pseudoinverse of a symmetric PSD matrix via eigendecomposition, with the
/// same relative cutoff. Also returns the numerical rank.
pub fn pinv_sym(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let n = a.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let eig = symmetrize(a).symmetric_eigen();
    let emax = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let cutoff = PINV_RCOND * emax;
    let mut out = DMatrix::zeros(n, n);
    let mut rank = 0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cutoff && l > 0.0 {
            rank += 1;
            let q = eig.eigenvectors.column(k);
            out.ger(1.0 / l, &q, &q, 1.0);
        }
    }
    (out, rank)
}

/// (A + A^T) / 2.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solve `a x = b` for symmetric positive definite `a`, falling back to LU.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Matrix("singular system".into()))
}

pub fn solve_spd_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Matrix("singular system".into()))
}

/// Eigen-pairs of a symmetric matrix sorted by descending eigenvalue.
pub fn sorted_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = symmetrize(a).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in idx.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Flip the sign of each column so its first entry with |v| > tol is positive.
pub fn canonical_signs(m: &mut DMatrix<f64>) {
    const TOL: f64 = 1e-12;
    for j in 0..m.ncols() {
        let first = m.column(j).iter().cloned().find(|v| v.abs() > TOL);
        if let Some(v) = first {
            if v < 0.0 {
                m.column_mut(j).neg_mut();
            }
        }
    }
}

/// Lower Cholesky-like factor `l` with `l l^T = sigma` for a PSD matrix.
/// Adds diagonal jitter 1e-12 when the plain factorization fails, and
/// rejects matrices with an eigenvalue below -1e-8.
pub fn psd_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(Error::Dimension { expected: n, got: sigma.ncols() });
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let s = symmetrize(sigma);
    if let Some(ch) = s.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = s.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-8 {
        return Err(Error::Matrix(format!(
            "covariance is not positive semi-definite (min eigenvalue {min:e})"
        )));
    }
    if eig.eigenvalues.iter().all(|&l| l <= 0.0) {
        return Ok(DMatrix::zeros(n, n));
    }
    let jittered = &s + DMatrix::identity(n, n) * 1e-12;
    if let Some(ch) = jittered.cholesky() {
        return Ok(ch.l());
    }
    // Exactly singular directions: fall back to the symmetric square root.
    let mut root = DMatrix::zeros(n, n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 0.0 {
            let q = eig.eigenvectors.column(k);
            root.ger(l.sqrt(), &q, &q, 1.0);
        }
    }
    Ok(root)
}

/// Operator (spectral) norm of a square matrix.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    symmetrize(&gram).symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
}
