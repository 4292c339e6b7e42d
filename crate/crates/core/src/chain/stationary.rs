use nalgebra::{DMatrix, DVector};

use super::CtmcModel;
use crate::error::{Error, Result};
use crate::linalg::{lu_solve, weighted_dot};

/// A strictly positive probability vector with `pi Q = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: DVector<f64>,
}

impl StationaryDistribution {
    /// Wraps a probability vector after checking positivity and normalization.
    pub fn new(pi: DVector<f64>) -> Result<Self> {
        if let Some(i) = pi.iter().position(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::SingularSolve(format!(
                "stationary weight {i} is {}",
                pi[i]
            )));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::SingularSolve(format!(
                "stationary weights sum to {total}"
            )));
        }
        Ok(Self { pi })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn as_slice(&self) -> &[f64] {
        self.pi.as_slice()
    }

    /// `(pi, f)`.
    pub fn mean(&self, f: &DVector<f64>) -> f64 {
        self.pi.dot(f)
    }

    /// `(u, v)_pi`.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        weighted_dot(&self.pi, u, v)
    }

    /// `||u||_pi`.
    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// `pi(set)`.
    pub fn mass(&self, states: &[usize]) -> f64 {
        states.iter().map(|&i| self.pi[i]).sum()
    }

    /// `f - (pi, f)`.
    pub fn center(&self, f: &DVector<f64>) -> DVector<f64> {
        let m = self.mean(f);
        f.map(|v| v - m)
    }

    /// Largest entry of `|pi Q|`.
    pub fn balance_residual(&self, model: &CtmcModel) -> f64 {
        (model.rates().transpose() * &self.pi).amax()
    }
}

/// Solves `pi Q = 0, sum(pi) = 1` as one bordered linear system
/// `[Q^T 1; 1^T 0] [pi; s] = [0; 1]`.
pub fn stationary_distribution(model: &CtmcModel) -> Result<StationaryDistribution> {
    let n = model.n();
    let q = model.rates();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&q.transpose());
    for i in 0..n {
        m[(i, n)] = 1.0;
        m[(n, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let sol = lu_solve(m, &rhs, "stationary distribution")?;
    let mut pi = sol.rows(0, n).into_owned();
    if pi.iter().any(|p| *p <= 0.0) {
        return Err(Error::SingularSolve(
            "stationary solve produced a non-positive weight".into(),
        ));
    }
    let total: f64 = pi.iter().sum();
    pi /= total;
    let dist = StationaryDistribution::new(pi)?;
    let scale = q.amax().max(1.0);
    if dist.balance_residual(model) > 1e-10 * scale {
        return Err(Error::SingularSolve(format!(
            "stationary residual {:e} too large",
            dist.balance_residual(model)
        )));
    }
    Ok(dist)
}
