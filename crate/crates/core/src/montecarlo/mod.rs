//! Monte Carlo estimates of `sigma^2(X, f) = lim E_pi[(t^-1/2 int_0^t f(X_s) ds)^2]`
//! by batch means over long stationary trajectories.
//!
//! Every replica draws from its own ChaCha8 stream selected by
//! `(seed, replica index)`, so results are reproducible bit for bit and
//! independent of how replicas are scheduled across threads.

mod batch;
mod ctmc;
mod ou;
mod sde;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use batch::{batch_count, BatchAccumulator, BatchPolicy};
pub use ctmc::{estimate_avar_ctmc, simulate_ctmc, CtmcPath};
pub use ou::{
    avar_ou_linear_exact, check_invariance_condition, estimate_avar_ou, simulate_ou_rotation,
    Integrator, LinearField, OuRotationModel, Potential2, QuadraticPotential, VectorField2,
};
pub use sde::{
    estimate_avar_halfline, estimate_avar_sde, euler_maruyama_halfline, sample_stationary_halfline,
    simulate_sde_halfline, SdePath,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    /// Total simulated time per replica, burn-in included.
    pub horizon: f64,
    /// Step size for SDE integrators; unused by exact chain simulation.
    pub dt: f64,
    pub burn_in: f64,
    pub n_replicas: usize,
    #[serde(default)]
    pub batches: BatchPolicy,
}

impl SimulationConfig {
    pub fn new(seed: u64, horizon: f64) -> Self {
        Self {
            seed,
            horizon,
            dt: 1e-2,
            burn_in: 0.0,
            n_replicas: 1,
            batches: BatchPolicy::default(),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_replicas(mut self, n: usize) -> Self {
        self.n_replicas = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.burn_in >= 0.0 && self.horizon > self.burn_in && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need horizon > burn_in >= 0, got horizon = {}, burn_in = {}",
                self.horizon, self.burn_in
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.n_replicas == 0 {
            return Err(Error::InvalidConfig(
                "at least one replica is required".into(),
            ));
        }
        Ok(())
    }

    /// Time available for estimation in one replica.
    pub fn effective_horizon(&self) -> f64 {
        self.horizon - self.burn_in
    }
}

/// The random stream of replica `replica` under `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvarEstimate {
    pub sigma2_hat: f64,
    /// Standard error of `sigma2_hat` from the chi-square law of batch
    /// variances: `sigma2_hat * sqrt(2 / dof)`.
    pub stderr: f64,
    /// Batches per replica.
    pub n_batches: usize,
    pub n_replicas: usize,
    /// Total time used for estimation, summed over replicas.
    pub effective_t: f64,
}

impl AvarEstimate {
    /// Pools batch integrals from independent replicas. Each replica
    /// contributes `n_batches - 1` degrees of freedom.
    pub fn from_batches(replicas: &[Vec<f64>], batch_length: f64) -> Self {
        let n_batches = replicas.first().map_or(0, Vec::len);
        let mut sum_sq = 0.0;
        let mut dof = 0usize;
        for integrals in replicas {
            let k = integrals.len();
            if k < 2 {
                continue;
            }
            let means: Vec<f64> = integrals.iter().map(|i| i / batch_length).collect();
            let grand = means.iter().sum::<f64>() / k as f64;
            sum_sq += means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
            dof += k - 1;
        }
        let sigma2_hat = if dof > 0 {
            batch_length * sum_sq / dof as f64
        } else {
            0.0
        };
        let stderr = if dof > 0 {
            sigma2_hat * (2.0 / dof as f64).sqrt()
        } else {
            0.0
        };
        Self {
            sigma2_hat,
            stderr,
            n_batches,
            n_replicas: replicas.len(),
            effective_t: batch_length * (n_batches * replicas.len()) as f64,
        }
    }

    /// `|sigma2_hat - exact| <= k * stderr`.
    pub fn covers(&self, exact: f64, k: f64) -> bool {
        (self.sigma2_hat - exact).abs() <= k * self.stderr
    }
}

/// Runs `replica` for every index in parallel and returns the results in
/// index order.
pub(crate) fn run_replicas<T: Send>(
    config: &SimulationConfig,
    replica: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..config.n_replicas as u64)
        .into_par_iter()
        .map(&replica)
        .collect()
}
