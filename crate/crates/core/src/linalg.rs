//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Weighted inner product `sum_i w_i u_i v_i`.
pub fn weighted_dot(w: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    w.iter()
        .zip(u.iter())
        .zip(v.iter())
        .map(|((w, u), v)| w * u * v)
        .sum()
}

/// Orthonormal basis (as columns) of the Euclidean orthogonal complement of
/// `g`, built from a single Householder reflector. Returns an `n x (n-1)`
/// matrix; for `g = 0` the leading `n-1` unit vectors are returned.
pub fn orthonormal_complement(g: &DVector<f64>) -> DMatrix<f64> {
    let n = g.len();
    let norm = g.norm();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if norm == 0.0 {
        return DMatrix::identity(n, n).columns(0, n - 1).into_owned();
    }
    // w = g + sign(g0) |g| e0 keeps the reflector well conditioned.
    let mut w = g.clone();
    let sign = if g[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += sign * norm;
    let ww = w.norm_squared();
    let mut h = DMatrix::identity(n, n);
    h -= (&w * w.transpose()) * (2.0 / ww);
    // Column 0 of H is parallel to g; the rest span its complement.
    h.columns(1, n - 1).into_owned()
}

/// LU solve that reports singularity and non-finite output.
pub fn lu_solve(a: DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let lu = a.lu();
    let x = lu
        .solve(b)
        .ok_or_else(|| Error::SingularSolve(format!("{what}: matrix is singular")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSolve(format!("{what}: non-finite solution")));
    }
    Ok(x)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// ascending order (eigenvectors permuted to match).
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}
