//! Mean exit times `E_pi tau_Omega` from a subset `Omega` of a finite chain,
//! and the spectral-gap bound `E_pi tau_Omega <= pi(Omega) / (lambda1 pi(Omega^c))`.
//!
//! Along the way the report records each link of
//! `E_pi tau <= sigma^2(f) / 2 <= |f|^2 / lambda1` for the indicator
//! observable `f = (1_Omega - pi(Omega)) / (1 - pi(Omega))`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain::{
    asymptotic_variance_exact, detailed_balance_defect, dirichlet_form, spectral_gap, CtmcModel,
    StationaryDistribution, REVERSIBLE_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::lu_solve;

pub const FLAG_AS_STATED_VIOLATED: &str = "as-stated bound violated";
pub const FLAG_PROVABLE_TIGHT: &str = "provable bound tight";
pub const FLAG_NONREVERSIBLE: &str = "nonreversible: bound hypotheses not met";

/// Ratio `exact / bound_provable` above which the bound counts as tight.
pub const TIGHT_RATIO: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitTimeReport {
    pub omega: Vec<usize>,
    pub exact: f64,
    /// `sigma^2(X, f) / 2` for the indicator observable.
    pub sigma2_half: f64,
    pub lambda1: f64,
    /// `pi(Omega) / (lambda1 pi(Omega^c))`.
    pub bound_provable: f64,
    /// `pi(Omega) / (2 lambda1 pi(Omega^c))`, half the provable bound.
    pub bound_as_stated: f64,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalExitTime {
    /// `inf { E(u,u) : u = 0 off Omega, pi(u) = 1 }`.
    pub infimum: f64,
    /// `1 / infimum`.
    pub exit_time: f64,
    pub minimizer: Vec<f64>,
}

/// Sorted, deduplicated `omega` with `0 < pi(Omega) < 1`.
fn checked_omega(n: usize, omega: &[usize]) -> Result<Vec<usize>> {
    let mut states = omega.to_vec();
    states.sort_unstable();
    states.dedup();
    if let Some(&bad) = states.iter().find(|&&x| x >= n) {
        return Err(Error::StateOutOfRange { index: bad, n });
    }
    if states.is_empty() {
        return Err(Error::EmptyOmega);
    }
    if states.len() == n {
        return Err(Error::FullOmega);
    }
    Ok(states)
}

fn require_reversible(model: &CtmcModel, pi: &StationaryDistribution) -> Result<()> {
    let defect = detailed_balance_defect(model, pi);
    if defect > REVERSIBLE_TOL * model.rates().amax().max(1.0) {
        return Err(Error::NotReversible { defect });
    }
    Ok(())
}

/// Solves `-Q_Omega h = 1` with `h = 0` off `Omega` and returns
/// `sum_{x in Omega} pi_x h_x`. Valid for any irreducible chain.
pub fn mean_exit_time_exact(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    omega: &[usize],
) -> Result<f64> {
    let states = checked_omega(model.n(), omega)?;
    let q = model.rates();
    let k = states.len();
    let sub = DMatrix::from_fn(k, k, |i, j| -q[(states[i], states[j])]);
    let h = lu_solve(sub, &DVector::from_element(k, 1.0), "exit-time system")?;
    Ok(states
        .iter()
        .zip(h.iter())
        .map(|(&x, hx)| pi.as_slice()[x] * hx)
        .sum())
}

/// Minimizes the Dirichlet energy over vectors vanishing off `Omega` with
/// unit `pi`-mean. On reversible chains `exit_time` equals the direct solve.
pub fn variational_exit_time(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    omega: &[usize],
) -> Result<VariationalExitTime> {
    let states = checked_omega(model.n(), omega)?;
    require_reversible(model, pi)?;
    let s = dirichlet_form(model, pi);
    let s = s.symmetric();
    let k = states.len();
    let s_omega = DMatrix::from_fn(k, k, |i, j| s[(states[i], states[j])]);
    let p = DVector::from_iterator(k, states.iter().map(|&x| pi.as_slice()[x]));
    let w = lu_solve(s_omega, &p, "restricted form")?;
    let denom = p.dot(&w);
    let mut minimizer = vec![0.0; model.n()];
    for (i, &x) in states.iter().enumerate() {
        minimizer[x] = w[i] / denom;
    }
    Ok(VariationalExitTime {
        infimum: 1.0 / denom,
        exit_time: denom,
        minimizer,
    })
}

/// `f = (1_Omega - pi(Omega)) / (1 - pi(Omega))`: centered, equal to 1 on
/// `Omega`, with `|f|^2_pi = pi(Omega) / pi(Omega^c)`.
pub fn indicator_observable(pi: &StationaryDistribution, omega: &[usize]) -> Result<DVector<f64>> {
    let states = checked_omega(pi.len(), omega)?;
    let mass = pi.mass(&states);
    let mut f = DVector::from_element(pi.len(), -mass / (1.0 - mass));
    for &x in &states {
        f[x] = 1.0;
    }
    Ok(f)
}

pub fn exit_bound_report(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    omega: &[usize],
) -> Result<ExitTimeReport> {
    checked_omega(model.n(), omega)?;
    require_reversible(model, pi)?;
    exit_bound_report_unchecked(model, pi, omega)
}

/// As [`exit_bound_report`] but also accepts non-reversible chains, for
/// which `lambda1` is the gap of the symmetrized form and the report
/// carries a flag instead of failing.
pub fn exit_bound_report_unchecked(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    omega: &[usize],
) -> Result<ExitTimeReport> {
    let states = checked_omega(model.n(), omega)?;
    let exact = mean_exit_time_exact(model, pi, &states)?;
    let f = indicator_observable(pi, &states)?;
    let sigma2_half = asymptotic_variance_exact(model, pi, &f)? / 2.0;
    let lambda1 = spectral_gap(model, pi).lambda1;
    let mass = pi.mass(&states);
    let bound_provable = mass / (lambda1 * (1.0 - mass));
    let bound_as_stated = bound_provable / 2.0;
    let mut flags = Vec::new();
    if require_reversible(model, pi).is_err() {
        flags.push(FLAG_NONREVERSIBLE.to_string());
    }
    if exact > bound_as_stated * (1.0 + 1e-10) {
        flags.push(FLAG_AS_STATED_VIOLATED.to_string());
    }
    if exact / bound_provable > TIGHT_RATIO {
        flags.push(FLAG_PROVABLE_TIGHT.to_string());
    }
    Ok(ExitTimeReport {
        omega: states,
        exact,
        sigma2_half,
        lambda1,
        bound_provable,
        bound_as_stated,
        flags,
    })
}
