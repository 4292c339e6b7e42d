use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sde::step_count;
use super::{
    batch_count, replica_rng, run_replicas, AvarEstimate, BatchAccumulator, SdePath,
    SimulationConfig,
};
use crate::error::{Error, Result};

/// `dX = B X dt + sqrt(2) dW` with `B = [[-1, -c], [c, -1]]`. The drift is
/// `-grad U + Z` for `U = |x|^2 / 2` and the rotation `Z = c (-x2, x1)`;
/// the stationary law is the standard Gaussian for every `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuRotationModel {
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Samples the Gaussian transition kernel exactly.
    #[default]
    Exact,
    Euler,
}

impl OuRotationModel {
    pub fn new(c: f64) -> Self {
        Self { c }
    }

    pub fn drift_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(-1.0, -self.c, self.c, -1.0)
    }

    pub fn stationary_covariance(&self) -> Matrix2<f64> {
        Matrix2::identity()
    }

    /// Max entry of `B Sigma + Sigma B^T + 2 I`.
    pub fn lyapunov_residual(&self) -> f64 {
        let (b, s) = (self.drift_matrix(), self.stationary_covariance());
        (b * s + s * b.transpose() + Matrix2::identity() * 2.0).amax()
    }

    pub fn field(&self) -> LinearField {
        LinearField::rotation(self.c)
    }

    pub fn potential(&self) -> QuadraticPotential {
        QuadraticPotential
    }

    /// Largest step accepted by the Euler integrator.
    pub fn max_euler_dt(&self) -> f64 {
        1e-2 / (1.0 + self.c.abs())
    }
}

pub trait VectorField2 {
    fn value(&self, x: [f64; 2]) -> [f64; 2];
    fn divergence(&self, x: [f64; 2]) -> f64;
}

pub trait Potential2 {
    fn value(&self, x: [f64; 2]) -> f64;
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
}

/// `Z(x) = M x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearField {
    pub m: [[f64; 2]; 2],
}

impl LinearField {
    pub fn rotation(c: f64) -> Self {
        Self {
            m: [[0.0, -c], [c, 0.0]],
        }
    }
}

impl VectorField2 for LinearField {
    fn value(&self, x: [f64; 2]) -> [f64; 2] {
        let m = &self.m;
        [
            m[0][0] * x[0] + m[0][1] * x[1],
            m[1][0] * x[0] + m[1][1] * x[1],
        ]
    }

    fn divergence(&self, _x: [f64; 2]) -> f64 {
        self.m[0][0] + self.m[1][1]
    }
}

/// `U(x) = |x|^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadraticPotential;

impl Potential2 for QuadraticPotential {
    fn value(&self, x: [f64; 2]) -> f64 {
        0.5 * (x[0] * x[0] + x[1] * x[1])
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        x
    }
}

/// Max over `points` of `|div(Z e^-U)| = |div Z - <grad U, Z>| e^-U`.
pub fn check_invariance_condition(
    field: &impl VectorField2,
    potential: &impl Potential2,
    points: &[[f64; 2]],
) -> f64 {
    points
        .iter()
        .map(|&x| {
            let (z, g) = (field.value(x), potential.gradient(x));
            ((field.divergence(x) - (g[0] * z[0] + g[1] * z[1])) * (-potential.value(x)).exp())
                .abs()
        })
        .fold(0.0, f64::max)
}

/// `sigma^2 = 2 v^T Sigma (-B^T)^-1 v` for the linear observable `x -> v.x`,
/// which here equals `2 |v|^2 / (1 + c^2)`.
pub fn avar_ou_linear_exact(ou: &OuRotationModel, v: [f64; 2]) -> Result<f64> {
    if v == [0.0, 0.0] || !v.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "observable direction must be finite and nonzero, got {v:?}"
        )));
    }
    let v = Vector2::from(v);
    let inv = (-ou.drift_matrix().transpose())
        .try_inverse()
        .ok_or_else(|| Error::SingularSolve("drift matrix".into()))?;
    Ok(2.0 * v.dot(&(ou.stationary_covariance() * inv * v)))
}

/// One-step map `x -> phi x + chol * xi`.
struct Stepper {
    phi: Matrix2<f64>,
    chol: Matrix2<f64>,
}

impl Stepper {
    fn new(ou: &OuRotationModel, dt: f64, integrator: Integrator) -> Result<Self> {
        let b = ou.drift_matrix();
        match integrator {
            Integrator::Exact => {
                let phi = (b * dt).exp();
                let cov =
                    ou.stationary_covariance() - phi * ou.stationary_covariance() * phi.transpose();
                let chol = cov
                    .cholesky()
                    .ok_or_else(|| Error::SingularSolve("transition covariance".into()))?
                    .l();
                Ok(Self { phi, chol })
            }
            Integrator::Euler => {
                if dt > ou.max_euler_dt() * (1.0 + 1e-12) {
                    return Err(Error::InvalidConfig(format!(
                        "Euler step {dt} exceeds {} for c = {}",
                        ou.max_euler_dt(),
                        ou.c
                    )));
                }
                Ok(Self {
                    phi: Matrix2::identity() + b * dt,
                    chol: Matrix2::identity() * (2.0 * dt).sqrt(),
                })
            }
        }
    }

    fn step<R: Rng>(&self, x: Vector2<f64>, rng: &mut R) -> Vector2<f64> {
        let xi = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        self.phi * x + self.chol * xi
    }
}

fn stationary_draw<R: Rng>(rng: &mut R) -> Vector2<f64> {
    Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Path of replica 0 on `[0, config.horizon]` from `X_0 ~ N(0, I)`.
pub fn simulate_ou_rotation(
    ou: &OuRotationModel,
    config: &SimulationConfig,
    integrator: Integrator,
) -> Result<SdePath<[f64; 2]>> {
    config.validate()?;
    let stepper = Stepper::new(ou, config.dt, integrator)?;
    let mut rng = replica_rng(config.seed, 0);
    let mut x = stationary_draw(&mut rng);
    let n = step_count(config);
    let mut states = Vec::with_capacity(n + 1);
    states.push([x[0], x[1]]);
    for _ in 0..n {
        x = stepper.step(x, &mut rng);
        states.push([x[0], x[1]]);
    }
    Ok(SdePath {
        dt: config.dt,
        states,
    })
}

/// Streaming batch-means estimate for `x -> v.x` over
/// `config.n_replicas` paths.
pub fn estimate_avar_ou(
    ou: &OuRotationModel,
    v: [f64; 2],
    config: &SimulationConfig,
    integrator: Integrator,
) -> Result<AvarEstimate> {
    config.validate()?;
    let stepper = Stepper::new(ou, config.dt, integrator)?;
    let n = step_count(config);
    let horizon = n as f64 * config.dt;
    let n_b = batch_count(horizon - config.burn_in, &config.batches)?;
    let v = Vector2::from(v);
    let replicas = run_replicas(config, |r| {
        let mut rng = replica_rng(config.seed, r);
        let mut x = stationary_draw(&mut rng);
        let mut acc = BatchAccumulator::new(config.burn_in, horizon, n_b);
        for k in 0..n {
            let t = k as f64 * config.dt;
            acc.add(t, t + config.dt, v.dot(&x));
            x = stepper.step(x, &mut rng);
        }
        Ok(acc.into_integrals())
    })?;
    Ok(AvarEstimate::from_batches(
        &replicas,
        (horizon - config.burn_in) / n_b as f64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::estimate_avar_sde;

    #[test]
    fn exact_values() {
        let v = [1.0, 0.0];
        assert!((avar_ou_linear_exact(&OuRotationModel::new(0.0), v).unwrap() - 2.0).abs() < 1e-14);
        assert!((avar_ou_linear_exact(&OuRotationModel::new(1.0), v).unwrap() - 1.0).abs() < 1e-14);
        for c in [0.3, 2.0, -4.0] {
            let w = [0.6, -1.7];
            let expected = 2.0 * (w[0] * w[0] + w[1] * w[1]) / (1.0 + c * c);
            assert!(
                (avar_ou_linear_exact(&OuRotationModel::new(c), w).unwrap() - expected).abs()
                    < 1e-13
            );
        }
        assert!(avar_ou_linear_exact(&OuRotationModel::new(1.0), [0.0, 0.0]).is_err());
    }

    #[test]
    fn exact_value_decreases_in_rotation() {
        let vals: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&c| avar_ou_linear_exact(&OuRotationModel::new(c), [1.0, 1.0]).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn lyapunov_identity() {
        for c in [0.0, 0.5, 3.0] {
            assert_eq!(OuRotationModel::new(c).lyapunov_residual(), 0.0);
        }
    }

    #[test]
    fn exact_transition_has_closed_form() {
        // e^{B dt} = e^{-dt} R(c dt) and the step covariance is (1 - e^{-2 dt}) I.
        let (c, dt) = (1.3, 0.2);
        let s = Stepper::new(&OuRotationModel::new(c), dt, Integrator::Exact).unwrap();
        let e = (-dt).exp();
        let (cos, sin) = ((c * dt).cos(), (c * dt).sin());
        assert!((s.phi - Matrix2::new(e * cos, -e * sin, e * sin, e * cos)).amax() < 1e-13);
        let sd = (1.0 - e * e).sqrt();
        assert!((s.chol - Matrix2::identity() * sd).amax() < 1e-13);
    }

    #[test]
    fn euler_step_is_bounded() {
        let ou = OuRotationModel::new(1.0);
        let config = SimulationConfig::new(1, 10.0).with_dt(0.01);
        assert!(matches!(
            simulate_ou_rotation(&ou, &config, Integrator::Euler),
            Err(Error::InvalidConfig(_))
        ));
        assert!(simulate_ou_rotation(&ou, &config.with_dt(0.005), Integrator::Euler).is_ok());
    }

    #[test]
    fn rotation_field_satisfies_invariance() {
        let ou = OuRotationModel::new(1.7);
        assert_eq!(
            check_invariance_condition(&ou.field(), &ou.potential(), &[[1.0, 2.0], [-0.3, 0.4]]),
            0.0
        );
        let mut rng = replica_rng(1, 0);
        let points: Vec<[f64; 2]> = (0..10_000)
            .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        assert!(check_invariance_condition(&ou.field(), &ou.potential(), &points) <= 1e-12);
    }

    #[test]
    fn shear_field_violates_invariance() {
        let shear = LinearField {
            m: [[1.0, 0.0], [0.0, 0.0]],
        };
        assert!(check_invariance_condition(&shear, &QuadraticPotential, &[[0.5, 0.5]]) > 0.1);
    }

    #[test]
    fn same_seed_same_path() {
        let ou = OuRotationModel::new(0.5);
        let config = SimulationConfig::new(8, 20.0).with_dt(0.05);
        let a = simulate_ou_rotation(&ou, &config, Integrator::Exact).unwrap();
        assert_eq!(
            a,
            simulate_ou_rotation(&ou, &config, Integrator::Exact).unwrap()
        );
        assert_eq!(a.states.len(), 401);
    }

    #[test]
    fn no_rotation_decouples_components() {
        let s = Stepper::new(&OuRotationModel::new(0.0), 0.1, Integrator::Exact).unwrap();
        assert_eq!((s.phi[(0, 1)], s.phi[(1, 0)]), (0.0, 0.0));
    }

    #[test]
    fn empirical_covariance_is_identity() {
        for c in [0.0, 2.0] {
            let config = SimulationConfig::new(12, 2e4).with_dt(0.05);
            let path =
                simulate_ou_rotation(&OuRotationModel::new(c), &config, Integrator::Exact).unwrap();
            // Each second moment x_i x_j is a quadratic observable; its batch-means
            // variance gives the standard error of the time average.
            for (i, j, target) in [(0, 0, 1.0), (1, 1, 1.0), (0, 1, 0.0)] {
                let g = |x: &[f64; 2]| x[i] * x[j] - target;
                let est = estimate_avar_sde(&path, g, &config).unwrap();
                let mean = path.states.iter().map(g).sum::<f64>() / path.states.len() as f64;
                let se = (est.sigma2_hat / path.horizon()).sqrt();
                assert!(
                    mean.abs() <= 3.0 * se + 1e-3,
                    "c = {c}, ({i},{j}): {mean} vs {se}"
                );
            }
        }
    }

    #[test]
    fn estimate_matches_exact_value() {
        let ou = OuRotationModel::new(1.0);
        let est = estimate_avar_ou(
            &ou,
            [1.0, 0.0],
            &SimulationConfig::new(4, 2e4).with_dt(0.05),
            Integrator::Exact,
        )
        .unwrap();
        assert!(est.covers(1.0, 3.0), "{est:?}");
    }
}
