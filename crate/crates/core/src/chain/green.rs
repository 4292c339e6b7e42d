use nalgebra::{DMatrix, DVector};

use super::{CtmcModel, StationaryDistribution};
use crate::error::{Error, Result};
use crate::linalg::lu_solve;

/// Default relative tolerance for "centered" checks on observables.
pub const CENTER_TOL: f64 = 1e-10;

/// A centered observable `f` with `(pi, f) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    values: DVector<f64>,
    centered: bool,
}

impl Observable {
    /// Wraps `values` without centering; `centered` records whether
    /// `(pi, f)` is within tolerance.
    pub fn new(values: DVector<f64>, pi: &StationaryDistribution) -> Self {
        let centered = is_centered(&values, pi);
        Self { values, centered }
    }

    /// `f - (pi, f)`.
    pub fn centered(values: &DVector<f64>, pi: &StationaryDistribution) -> Self {
        Self {
            values: pi.center(values),
            centered: true,
        }
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }
}

fn is_centered(f: &DVector<f64>, pi: &StationaryDistribution) -> bool {
    pi.mean(f).abs() <= CENTER_TOL * f.amax().max(1.0)
}

pub(crate) fn check_centered(f: &DVector<f64>, pi: &StationaryDistribution) -> Result<()> {
    if f.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            got: f.len(),
        });
    }
    if !is_centered(f, pi) {
        return Err(Error::NotCentered { mean: pi.mean(f) });
    }
    Ok(())
}

/// LU factorization of the bordered Poisson system
/// `[-Q 1; pi^T 0] [u; s] = [f; 0]`, reusable across right-hand sides.
pub struct GreenSolver {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pi: StationaryDistribution,
    q: DMatrix<f64>,
}

impl GreenSolver {
    pub fn new(model: &CtmcModel, pi: &StationaryDistribution) -> Result<Self> {
        let n = model.n();
        if pi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: pi.len(),
            });
        }
        let q = model.rates();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&(-q));
        for i in 0..n {
            m[(i, n)] = 1.0;
            m[(n, i)] = pi.weights()[i];
        }
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSolve("Poisson system is singular".into()));
        }
        Ok(Self {
            lu,
            pi: pi.clone(),
            q: q.clone(),
        })
    }

    /// `Gf`, the mean-zero solution of `-Q u = f`.
    pub fn solve(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        check_centered(f, &self.pi)?;
        let n = f.len();
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(f);
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSolve("Poisson system is singular".into()))?;
        let mut u = sol.rows(0, n).into_owned();
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSolve("non-finite Poisson solution".into()));
        }
        let m = self.pi.mean(&u);
        u.add_scalar_mut(-m);
        let resid = (&self.q * &u + f).amax();
        if resid > 1e-9 * f.amax().max(f64::MIN_POSITIVE) && f.amax() > 0.0 {
            return Err(Error::SingularSolve(format!("Poisson residual {resid:e}")));
        }
        Ok(u)
    }
}

/// Green operator `Gf = int_0^inf P_s f ds` for a centered `f`: the solution
/// of `-Q u = f` with `(pi, u) = 0`.
pub fn green_solve(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    GreenSolver::new(model, pi)?.solve(f)
}

/// `G_alpha f = (alpha I - Q)^-1 f` for `alpha > 0`.
pub fn resolvent_solve(model: &CtmcModel, alpha: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "resolvent parameter must be positive, got {alpha}"
        )));
    }
    let n = model.n();
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    let m = DMatrix::identity(n, n) * alpha - model.rates();
    lu_solve(m, f, "resolvent")
}

/// `sigma^2(X, f) = 2 (Gf, f)_pi`.
pub fn asymptotic_variance_exact(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    f: &DVector<f64>,
) -> Result<f64> {
    let u = green_solve(model, pi, f)?;
    Ok(2.0 * pi.inner(&u, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{dual_generator, stationary_distribution};
    use crate::fixtures;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn two_state_green() {
        let m = fixtures::two_state(1.0, 1.0);
        let pi = stationary_distribution(&m).unwrap();
        let u = green_solve(&m, &pi, &v(&[1.0, -1.0])).unwrap();
        assert!((u - v(&[0.5, -0.5])).amax() < 1e-14);
        assert!(
            (asymptotic_variance_exact(&m, &pi, &v(&[1.0, -1.0])).unwrap() - 1.0).abs() < 1e-14
        );
    }

    #[test]
    fn three_cycle_green() {
        let m = fixtures::three_cycle(1.0);
        let pi = stationary_distribution(&m).unwrap();
        let f = v(&[2.0, -1.0, -1.0]);
        let u = green_solve(&m, &pi, &f).unwrap();
        assert!((u - v(&[1.0, -1.0, 0.0])).amax() < 1e-14);
        assert!((asymptotic_variance_exact(&m, &pi, &f).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_observable() {
        let m = fixtures::three_cycle(1.0);
        let pi = stationary_distribution(&m).unwrap();
        let u = green_solve(&m, &pi, &DVector::zeros(3)).unwrap();
        assert_eq!(u.amax(), 0.0);
        assert_eq!(
            asymptotic_variance_exact(&m, &pi, &DVector::zeros(3)).unwrap(),
            0.0
        );
    }

    #[test]
    fn uncentered_is_rejected() {
        let m = fixtures::two_state(1.0, 2.0);
        let pi = stationary_distribution(&m).unwrap();
        assert!(matches!(
            green_solve(&m, &pi, &v(&[1.0, -1.0])),
            Err(Error::NotCentered { .. })
        ));
    }

    #[test]
    fn resolvent_two_state() {
        let m = fixtures::two_state(1.0, 1.0);
        let g = resolvent_solve(&m, 1.0, &v(&[1.0, -1.0])).unwrap();
        assert!((g - v(&[1.0 / 3.0, -1.0 / 3.0])).amax() < 1e-15);
        assert!(resolvent_solve(&m, 0.0, &v(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn resolvent_large_alpha_recovers_f() {
        let m = fixtures::three_cycle(1.0);
        let f = v(&[2.0, -1.0, -1.0]);
        let alpha = 1e8;
        let g = resolvent_solve(&m, alpha, &f).unwrap() * alpha;
        assert!((g - f).amax() < 1e-7);
    }

    #[test]
    fn resolvent_approaches_green() {
        let m = fixtures::three_cycle(1.0);
        let pi = stationary_distribution(&m).unwrap();
        let f = v(&[2.0, -1.0, -1.0]);
        let gf = green_solve(&m, &pi, &f).unwrap();
        let gaps: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|n| pi.norm(&(resolvent_solve(&m, 1.0 / n, &f).unwrap() - &gf)))
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
        assert!(gaps[2] < 1e-2);
    }

    #[test]
    fn dual_green_has_same_quadratic_value() {
        let m = fixtures::three_cycle(1.0);
        let pi = stationary_distribution(&m).unwrap();
        let dual = dual_generator(&m, &pi).unwrap();
        let f = v(&[2.0, -1.0, -1.0]);
        let a = pi.inner(&green_solve(&m, &pi, &f).unwrap(), &f);
        let b = pi.inner(&green_solve(&dual, &pi, &f).unwrap(), &f);
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn scale_divides_variance() {
        let m = fixtures::three_cycle(1.0);
        let pi = stationary_distribution(&m).unwrap();
        let f = v(&[2.0, -1.0, -1.0]);
        let k = 4.0;
        let s1 = asymptotic_variance_exact(&m, &pi, &f).unwrap();
        let sk = asymptotic_variance_exact(&m.scaled(k).unwrap(), &pi, &f).unwrap();
        assert!((sk * k - s1).abs() < 1e-13);
    }
}
