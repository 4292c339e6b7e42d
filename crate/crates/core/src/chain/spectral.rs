use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::form::detailed_balance_defect;
use super::{dirichlet_form, CtmcModel, FormDecomposition, StationaryDistribution};
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_complement, sorted_symmetric_eigen};

/// Detailed-balance tolerance used when a report needs a reversibility flag.
pub const REVERSIBLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    /// `inf { E(u,u) : pi(u) = 0, pi(u^2) = 1 }`, in 1/time.
    pub lambda1: f64,
    /// `C` in `||P_t f|| <= C e^{-lambda1 t} ||f||`. The symmetric-form
    /// gap always gives `C = 1` since `d/dt ||P_t f||^2 = -2 E(P_t f)`.
    pub ergodicity_constant: f64,
    pub reversible: bool,
    /// Set when the chain is not reversible and `lambda1` is the gap of the
    /// additive symmetrization `(Q + Q*) / 2`.
    pub symmetrized: bool,
}

/// Smallest nonzero eigenvalue of `S u = lambda diag(pi) u`.
pub fn spectral_gap(model: &CtmcModel, pi: &StationaryDistribution) -> SpectralReport {
    let form = dirichlet_form(model, pi);
    let reversible =
        detailed_balance_defect(model, pi) <= REVERSIBLE_TOL * model.rates().amax().max(1.0);
    let n = model.n();
    let lambda1 = if n < 2 {
        f64::INFINITY
    } else {
        let w = pi.weights().map(|p| 1.0 / p.sqrt());
        let s = form.symmetric();
        let h = DMatrix::from_fn(n, n, |i, j| w[i] * s[(i, j)] * w[j]);
        let (vals, _) = sorted_symmetric_eigen(&h);
        vals[1]
    };
    SpectralReport {
        lambda1,
        ergodicity_constant: 1.0,
        reversible,
        symmetrized: !reversible,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorReport {
    /// Best `K` in `|E(u,v)| <= K E(u,u)^1/2 E(v,v)^1/2`.
    #[serde(rename = "K")]
    pub k: f64,
    /// Largest singular value of the whitened antisymmetric part.
    pub mu: f64,
    /// A pair `(u, v)` attaining `K`.
    pub attained_pair: (Vec<f64>, Vec<f64>),
}

/// Sector constant `K = (1 + mu^2)^1/2`, with `mu` the spectral norm of
/// `S^-1/2 A S^-1/2` restricted to a complement of the constants.
pub fn sector_constant(model: &CtmcModel, pi: &StationaryDistribution) -> Result<SectorReport> {
    sector_constant_of(&dirichlet_form(model, pi), pi)
}

pub fn sector_constant_of(
    form: &FormDecomposition,
    pi: &StationaryDistribution,
) -> Result<SectorReport> {
    let n = form.n();
    if n < 2 {
        return Ok(SectorReport {
            k: 1.0,
            mu: 0.0,
            attained_pair: (vec![0.0; n], vec![0.0; n]),
        });
    }
    // E vanishes on constants in both arguments, so any complement works.
    let basis = orthonormal_complement(pi.weights());
    let s = basis.transpose() * form.symmetric() * &basis;
    let a = basis.transpose() * form.antisymmetric() * &basis;
    let (vals, vecs) = sorted_symmetric_eigen(&s);
    let top = vals[vals.len() - 1];
    if !(vals[0] > 1e-12 * top.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateForm);
    }
    let inv_sqrt = DMatrix::from_diagonal(&vals.map(|l| 1.0 / l.sqrt()));
    let whiten = &vecs * inv_sqrt * vecs.transpose();
    let t = &whiten * a * &whiten;
    let m = t.nrows();
    let svd = t.clone().svd(true, true);
    let (mut mu, mut idx) = (0.0_f64, 0usize);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > mu {
            mu = *s;
            idx = i;
        }
    }
    let x: DVector<f64> = match &svd.v_t {
        Some(vt) if mu > 0.0 => vt.row(idx).transpose(),
        _ => {
            let mut e = DVector::zeros(m);
            e[0] = 1.0;
            e
        }
    };
    // For skew T, (I + T) x with x a top singular vector attains sqrt(1 + mu^2).
    let y = (DMatrix::identity(m, m) + &t) * &x;
    let y = &y / y.norm();
    let u = &basis * &whiten * x;
    let v = &basis * &whiten * y;
    Ok(SectorReport {
        k: (1.0 + mu * mu).sqrt(),
        mu,
        attained_pair: (u.iter().copied().collect(), v.iter().copied().collect()),
    })
}
