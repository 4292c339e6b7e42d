//! The min-max characterization of the asymptotic variance,
//!
//! ```text
//! 2 / sigma^2(X, f) = inf_{(u,f)_pi = 1} sup_{(v,f)_pi = 0} E(u + v, u - v),
//! ```
//!
//! evaluated two ways: through the explicit saddle point built from `Gf` and
//! `G*f`, and by direct minimization of the inner supremum over the affine
//! constraint set. For reversible chains it collapses to
//! `inf_{(u,f)_pi = 1} E(u, u)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Serialize, Serializer};

use crate::chain::{
    check_centered, detailed_balance_defect, dirichlet_form, dual_generator, green_solve,
    CtmcModel, FormDecomposition, StationaryDistribution, REVERSIBLE_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{lu_solve, orthonormal_complement, sorted_symmetric_eigen};

/// A real number or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedReal::PosInfinity)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::PosInfinity => s.serialize_str("inf"),
        }
    }
}

/// The affine set `{u : (u, f)_pi = delta}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub f: DVector<f64>,
    pub delta: f64,
}

impl ConstraintSet {
    pub fn contains(&self, pi: &StationaryDistribution, u: &DVector<f64>, tol: f64) -> bool {
        (pi.inner(u, &self.f) - self.delta).abs() <= tol
    }
}

/// The saddle point `w = Gf/(Gf,f)`, `w* = G*f/(Gf,f)`, `u0 = (w + w*)/2`,
/// `v0 = (w - w*)/2` with value `1/(Gf,f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    pub w: DVector<f64>,
    pub w_star: DVector<f64>,
    pub u0: DVector<f64>,
    pub v0: DVector<f64>,
    pub value: f64,
}

pub fn build_saddle(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    f: &DVector<f64>,
) -> Result<SaddlePoint> {
    check_centered(f, pi)?;
    let gf = green_solve(model, pi, f)?;
    let quad = pi.inner(&gf, f);
    if !(quad > 1e-14 * pi.inner(f, f).max(f64::MIN_POSITIVE)) {
        return Err(Error::ZeroVariance { value: quad });
    }
    let dual = dual_generator(model, pi)?;
    let gf_star = green_solve(&dual, pi, f)?;
    let w = &gf / quad;
    let w_star = &gf_star / quad;
    let u0 = (&w + &w_star) * 0.5;
    let v0 = (&w - &w_star) * 0.5;
    Ok(SaddlePoint {
        w,
        w_star,
        u0,
        v0,
        value: 1.0 / quad,
    })
}

/// Outcome of the inner maximization at a fixed `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSup {
    pub value: ExtendedReal,
    /// Minimum-norm maximizer, absent when the supremum is infinite.
    pub optimizer: Option<DVector<f64>>,
}

/// Precomputed data for repeated inner solves with one `(model, f)` pair.
///
/// With `E = S + A`,
/// `E(u + v, u - v) = u'Su - v'Sv + 2 u'Av`, so the inner problem is an
/// equality-constrained concave quadratic in `v`. It is reduced onto an
/// orthonormal basis `N` of `{v : (v, f)_pi = 0}` and solved through the
/// eigen-decomposition of `N'SN`, which also exposes degenerate directions.
pub struct MinMaxProblem {
    form: FormDecomposition,
    f: DVector<f64>,
    /// `diag(pi) f`: `(u, f)_pi = g'u`.
    g: DVector<f64>,
    basis: DMatrix<f64>,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl MinMaxProblem {
    pub fn new(model: &CtmcModel, pi: &StationaryDistribution, f: &DVector<f64>) -> Result<Self> {
        check_centered(f, pi)?;
        if f.amax() == 0.0 {
            return Err(Error::ZeroVariance { value: 0.0 });
        }
        let form = dirichlet_form(model, pi);
        let g = f.component_mul(pi.weights());
        let basis = orthonormal_complement(&g);
        let reduced = basis.transpose() * form.symmetric() * &basis;
        let (eigvals, eigvecs) = sorted_symmetric_eigen(&reduced);
        Ok(Self {
            form,
            f: f.clone(),
            g,
            basis,
            eigvals,
            eigvecs,
        })
    }

    pub fn form(&self) -> &FormDecomposition {
        &self.form
    }

    /// Orthonormal basis of the annihilator `{v : (v, f)_pi = 0}`.
    pub fn annihilator_basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// The point of `{(u, f)_pi = 1}` closest to the origin.
    pub fn base_point(&self) -> DVector<f64> {
        &self.g / self.g.norm_squared()
    }

    pub fn constraint_value(&self, u: &DVector<f64>) -> f64 {
        self.g.dot(u)
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    /// `sup_{(v,f)_pi = 0} E(u + v, u - v)`.
    pub fn inner_sup(&self, u: &DVector<f64>) -> InnerSup {
        let su = self.form.symmetric() * u;
        let base = u.dot(&su);
        // 2 u'Av = 2 b'v with b = A'u = -Au.
        let b = -(self.form.antisymmetric() * u);
        let coeffs = self.eigvecs.transpose() * (self.basis.transpose() * &b);
        let top = self.eigvals[self.eigvals.len() - 1].max(f64::MIN_POSITIVE);
        let coupling_scale = (self.form.symmetric().norm() + self.form.antisymmetric_norm())
            * u.norm()
            + f64::MIN_POSITIVE;
        let mut gain = 0.0;
        let mut x = DVector::zeros(coeffs.len());
        for (i, (&lambda, &c)) in self.eigvals.iter().zip(coeffs.iter()).enumerate() {
            if lambda > 1e-10 * top {
                gain += c * c / lambda;
                x[i] = c / lambda;
            } else if c.abs() > 1e-8 * coupling_scale {
                return InnerSup {
                    value: ExtendedReal::PosInfinity,
                    optimizer: None,
                };
            }
        }
        let v = &self.basis * (&self.eigvecs * x);
        InnerSup {
            value: ExtendedReal::Finite(base + gain),
            optimizer: Some(v),
        }
    }

    /// Gradient of `u -> inner_sup(u)` given the inner maximizer `v*`:
    /// `2 S u + 2 A v*` (envelope theorem).
    fn gradient(&self, u: &DVector<f64>, v_star: &DVector<f64>) -> DVector<f64> {
        (self.form.symmetric() * u + self.form.antisymmetric() * v_star) * 2.0
    }
}

/// Convenience wrapper around [`MinMaxProblem::inner_sup`]. The caller is
/// expected to pass `u` with `(u, f)_pi = 1`.
pub fn inner_sup(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    f: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<InnerSup> {
    Ok(MinMaxProblem::new(model, pi, f)?.inner_sup(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Inner supremum evaluated at the explicit saddle point `u0`.
    Saddle,
    /// Numerical minimization of the inner supremum over `{(u, f)_pi = 1}`.
    Optimize,
}

/// Result of the outer minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterSolution {
    pub value: f64,
    pub minimizer: DVector<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop once the reduced gradient norm falls below this fraction of
    /// its starting value.
    pub relative_tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            relative_tolerance: 1e-11,
        }
    }
}

/// Minimizes `u -> sup_v E(u + v, u - v)` over `u = start + N c` by
/// conjugate-gradient descent in the coefficients `c`, each objective and
/// gradient evaluation going through the inner solve. The objective is a
/// convex quadratic in `c`, so exact line steps are available from two
/// gradient evaluations.
pub fn minimize_outer(
    problem: &MinMaxProblem,
    start: &DVector<f64>,
    config: OptimizerConfig,
) -> Result<OuterSolution> {
    let basis = problem.annihilator_basis();
    let eval = |u: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        let inner = problem.inner_sup(u);
        match (inner.value, inner.optimizer) {
            (ExtendedReal::Finite(v), Some(opt)) => {
                Ok((v, basis.transpose() * problem.gradient(u, &opt)))
            }
            _ => Err(Error::DegenerateForm),
        }
    };
    let mut u = start.clone();
    let (mut value, mut grad) = eval(&u)?;
    let g0 = grad.norm();
    let stop = config.relative_tolerance * g0.max(f64::MIN_POSITIVE);
    let mut dir = -&grad;
    let restart = basis.ncols().max(1);
    for it in 0..config.max_iterations {
        if grad.norm() <= stop {
            return Ok(OuterSolution {
                value,
                minimizer: u,
                iterations: it,
                gradient_norm: grad.norm(),
            });
        }
        let step_u = basis * &dir;
        let (_, grad_probe) = eval(&(&u + &step_u))?;
        let curvature = (&grad_probe - &grad).dot(&dir);
        let slope = grad.dot(&dir);
        if !(curvature > 0.0) || !curvature.is_finite() {
            break;
        }
        let t = -slope / curvature;
        u += step_u * t;
        let (new_value, new_grad) = eval(&u)?;
        let beta = if (it + 1) % restart == 0 {
            0.0
        } else {
            (new_grad.dot(&(&new_grad - &grad)) / grad.norm_squared()).max(0.0)
        };
        dir = -&new_grad + dir * beta;
        if dir.dot(&new_grad) >= 0.0 {
            dir = -&new_grad;
        }
        value = new_value;
        grad = new_grad;
    }
    if grad.norm() <= stop.max(1e-9 * (1.0 + value.abs())) {
        return Ok(OuterSolution {
            value,
            minimizer: u,
            iterations: config.max_iterations,
            gradient_norm: grad.norm(),
        });
    }
    Err(Error::NonConvergence {
        iterations: config.max_iterations,
        gradient_norm: grad.norm(),
    })
}

/// `2 / sigma^2(X, f)` by the requested method.
pub fn minmax_value(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    f: &DVector<f64>,
    method: Method,
) -> Result<f64> {
    let problem = MinMaxProblem::new(model, pi, f)?;
    match method {
        Method::Saddle => {
            let saddle = build_saddle(model, pi, f)?;
            problem
                .inner_sup(&saddle.u0)
                .value
                .finite()
                .ok_or(Error::DegenerateForm)
        }
        Method::Optimize => {
            Ok(minimize_outer(&problem, &problem.base_point(), OptimizerConfig::default())?.value)
        }
    }
}

/// Minimizer and value of `E(u, u)` subject to `(u, f)_pi = 1` and the
/// mean-zero pin `(u, 1)_pi = 0`, by one Lagrange linear system.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversibleMin {
    pub value: f64,
    pub minimizer: DVector<f64>,
}

pub fn reversible_min(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    f: &DVector<f64>,
) -> Result<ReversibleMin> {
    check_centered(f, pi)?;
    let defect = detailed_balance_defect(model, pi);
    if defect > REVERSIBLE_TOL * model.rates().amax().max(1.0) {
        return Err(Error::NotReversible { defect });
    }
    if f.amax() == 0.0 {
        return Err(Error::ZeroVariance { value: 0.0 });
    }
    let n = model.n();
    let form = dirichlet_form(model, pi);
    let g = f.component_mul(pi.weights());
    let mut m = DMatrix::zeros(n + 2, n + 2);
    m.view_mut((0, 0), (n, n))
        .copy_from(&(form.symmetric() * 2.0));
    for i in 0..n {
        m[(i, n)] = g[i];
        m[(n, i)] = g[i];
        m[(i, n + 1)] = pi.weights()[i];
        m[(n + 1, i)] = pi.weights()[i];
    }
    let mut rhs = DVector::zeros(n + 2);
    rhs[n] = 1.0;
    let sol = lu_solve(m, &rhs, "reversible Lagrange system")?;
    let u = sol.rows(0, n).into_owned();
    let value = form.quadratic(&u);
    if !(value > 0.0) {
        return Err(Error::ZeroVariance { value });
    }
    Ok(ReversibleMin {
        value,
        minimizer: u,
    })
}

/// Numerical evidence for the min-max identity on one `(model, f)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub value_saddle: f64,
    pub value_optimize: f64,
    pub sigma2: f64,
    /// Largest violation of either saddle inequality over all probes
    /// (zero when none is violated).
    pub max_saddle_violation: f64,
    pub probes: usize,
}

/// Checks both saddle inequalities on `probes` random directions drawn as
/// standard normal coefficients in the annihilator basis.
pub fn verify_minmax<R: Rng + ?Sized>(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    f: &DVector<f64>,
    probes: usize,
    rng: &mut R,
) -> Result<VerificationReport> {
    let problem = MinMaxProblem::new(model, pi, f)?;
    let saddle = build_saddle(model, pi, f)?;
    let value_saddle = problem
        .inner_sup(&saddle.u0)
        .value
        .finite()
        .ok_or(Error::DegenerateForm)?;
    let value_optimize =
        minimize_outer(&problem, &problem.base_point(), OptimizerConfig::default())?.value;
    let form = problem.form();
    let basis = problem.annihilator_basis();
    let mut worst = 0.0_f64;
    for _ in 0..probes {
        let z = DVector::from_fn(basis.ncols(), |_, _| StandardNormal.sample(rng));
        let dir = basis * z;
        let upper = form.energy(&(&saddle.u0 + &dir), &(&saddle.u0 - &dir)) - saddle.value;
        let u = &saddle.u0 + &dir;
        let lower = saddle.value - form.energy(&(&u + &saddle.v0), &(&u - &saddle.v0));
        worst = worst.max(upper).max(lower);
    }
    Ok(VerificationReport {
        value_saddle,
        value_optimize,
        sigma2: 2.0 / saddle.value,
        max_saddle_violation: worst.max(0.0),
        probes,
    })
}
