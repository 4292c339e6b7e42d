use nalgebra::{DMatrix, DVector};

use super::{CtmcModel, StationaryDistribution};
use crate::error::Result;

/// The bilinear form `E(u, v) = v^T diag(pi) (-Q) u` split as
/// `E = S + A` with `S` symmetric and `A` antisymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct FormDecomposition {
    symmetric: DMatrix<f64>,
    antisymmetric: DMatrix<f64>,
}

impl FormDecomposition {
    pub fn symmetric(&self) -> &DMatrix<f64> {
        &self.symmetric
    }

    pub fn antisymmetric(&self) -> &DMatrix<f64> {
        &self.antisymmetric
    }

    /// The full matrix `diag(pi) (-Q)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.symmetric + &self.antisymmetric
    }

    pub fn n(&self) -> usize {
        self.symmetric.nrows()
    }

    /// `E(u, v)`.
    pub fn energy(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.symmetric * u)) + v.dot(&(&self.antisymmetric * u))
    }

    /// `E(u, u)`, which only sees the symmetric part.
    pub fn quadratic(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.symmetric * u))
    }

    pub fn antisymmetric_norm(&self) -> f64 {
        self.antisymmetric.norm()
    }
}

pub fn dirichlet_form(model: &CtmcModel, pi: &StationaryDistribution) -> FormDecomposition {
    let m = form_matrix(model, pi);
    let mt = m.transpose();
    FormDecomposition {
        symmetric: (&m + &mt) * 0.5,
        antisymmetric: (&m - &mt) * 0.5,
    }
}

fn form_matrix(model: &CtmcModel, pi: &StationaryDistribution) -> DMatrix<f64> {
    let q = model.rates();
    let w = pi.weights();
    DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| -w[i] * q[(i, j)])
}

/// Largest detailed-balance defect `|pi_x q_xy - pi_y q_yx|`.
pub fn detailed_balance_defect(model: &CtmcModel, pi: &StationaryDistribution) -> f64 {
    let q = model.rates();
    let w = pi.weights();
    let n = model.n();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((w[i] * q[(i, j)] - w[j] * q[(j, i)]).abs());
        }
    }
    worst
}

pub fn is_reversible(model: &CtmcModel, pi: &StationaryDistribution, tol: f64) -> bool {
    detailed_balance_defect(model, pi) <= tol
}

/// The `L^2(pi)` adjoint generator `Q* = diag(pi)^-1 Q^T diag(pi)`.
pub fn dual_generator(model: &CtmcModel, pi: &StationaryDistribution) -> Result<CtmcModel> {
    let q = model.rates();
    let w = pi.weights();
    let n = model.n();
    let mut dual = DMatrix::from_fn(n, n, |x, y| {
        if x == y {
            q[(x, x)]
        } else {
            w[y] * q[(y, x)] / w[x]
        }
    });
    // The diagonal is unchanged; re-balance rows so rounding does not trip validation.
    for x in 0..n {
        let off: f64 = (0..n).filter(|&y| y != x).map(|y| dual[(x, y)]).sum();
        dual[(x, x)] = -off;
    }
    let dual = CtmcModel::from_matrix_with_tol(dual, 1e-8)?;
    Ok(match model.labels() {
        Some(l) => dual.with_labels(l.to_vec())?,
        None => dual,
    })
}
