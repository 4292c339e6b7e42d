use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{
    batch_count, replica_rng, run_replicas, AvarEstimate, BatchAccumulator, SimulationConfig,
};
use crate::diffusion1d::{Diffusion1DModel, Function};
use crate::error::{Error, Result};

/// States sampled every `dt` starting at time 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdePath<S> {
    pub dt: f64,
    pub states: Vec<S>,
}

impl<S> SdePath<S> {
    /// Time of the last sample.
    pub fn horizon(&self) -> f64 {
        self.states.len().saturating_sub(1) as f64 * self.dt
    }
}

pub(crate) fn step_count(config: &SimulationConfig) -> usize {
    (config.horizon / config.dt + 1e-9).floor() as usize
}

/// Draws from the model's stationary law by inverting the piecewise
/// linear CDF of the grid density.
pub fn sample_stationary_halfline<R: Rng>(model: &Diffusion1DModel, rng: &mut R) -> f64 {
    let xs = model.nodes();
    let p = model.pi_density();
    let mut cdf = Vec::with_capacity(xs.len());
    cdf.push(0.0);
    for i in 1..xs.len() {
        cdf.push(cdf[i - 1] + 0.5 * (p[i - 1] + p[i]) * (xs[i] - xs[i - 1]));
    }
    let target = rng.random::<f64>() * cdf[cdf.len() - 1];
    let i = cdf.partition_point(|&c| c <= target).clamp(1, xs.len() - 1);
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    let t = if c1 > c0 {
        (target - c0) / (c1 - c0)
    } else {
        0.0
    };
    xs[i - 1] + t * (xs[i] - xs[i - 1])
}

/// One reflected Euler-Maruyama step `X <- |X + b dt + sqrt(2a) dW|`.
fn reflected_step(model: &Diffusion1DModel, x: f64, dt: f64, dw: f64, t: f64) -> Result<f64> {
    let (a, b) = model.coefficients_at(x);
    let next = (x + b * dt + (2.0 * a).sqrt() * dw).abs();
    let x_max = model.grid().x_max;
    if !(next <= x_max) {
        return Err(Error::StepOutOfRange { t, x: next, x_max });
    }
    Ok(next)
}

/// Reflected Euler-Maruyama path driven by the given Brownian increments,
/// each of variance `dt`. Returns `increments.len() + 1` states.
pub fn euler_maruyama_halfline(
    model: &Diffusion1DModel,
    x_init: f64,
    dt: f64,
    increments: &[f64],
) -> Result<Vec<f64>> {
    let mut path = Vec::with_capacity(increments.len() + 1);
    let mut x = x_init;
    path.push(x);
    for (k, &dw) in increments.iter().enumerate() {
        x = reflected_step(model, x, dt, dw, (k + 1) as f64 * dt)?;
        path.push(x);
    }
    Ok(path)
}

/// Reflected Euler-Maruyama path of replica 0 on `[0, config.horizon]`,
/// started from the stationary law.
pub fn simulate_sde_halfline(
    model: &Diffusion1DModel,
    config: &SimulationConfig,
) -> Result<SdePath<f64>> {
    config.validate()?;
    let mut rng = replica_rng(config.seed, 0);
    let mut x = sample_stationary_halfline(model, &mut rng);
    let n = step_count(config);
    let sd = config.dt.sqrt();
    let mut states = Vec::with_capacity(n + 1);
    states.push(x);
    for k in 0..n {
        let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
        x = reflected_step(model, x, config.dt, dw, (k + 1) as f64 * config.dt)?;
        states.push(x);
    }
    Ok(SdePath {
        dt: config.dt,
        states,
    })
}

/// Batch-means estimate from a stored path, with the left-point Riemann
/// sum `sum f(X_k) dt` as time integral. Samples before `config.burn_in`
/// are discarded.
pub fn estimate_avar_sde<S>(
    path: &SdePath<S>,
    f: impl Fn(&S) -> f64,
    config: &SimulationConfig,
) -> Result<AvarEstimate> {
    let horizon = path.horizon();
    if !(horizon > config.burn_in) {
        return Err(Error::InvalidConfig(format!(
            "path of length {horizon} does not extend past burn-in {}",
            config.burn_in
        )));
    }
    let n_b = batch_count(horizon - config.burn_in, &config.batches)?;
    let mut acc = BatchAccumulator::new(config.burn_in, horizon, n_b);
    for (k, s) in path.states[..path.states.len() - 1].iter().enumerate() {
        let t = k as f64 * path.dt;
        acc.add(t, t + path.dt, f(s));
    }
    let length = acc.batch_length();
    Ok(AvarEstimate::from_batches(&[acc.into_integrals()], length))
}

/// Streaming estimate over `config.n_replicas` independent half-line
/// paths; nothing is stored.
pub fn estimate_avar_halfline(
    model: &Diffusion1DModel,
    f: &Function,
    config: &SimulationConfig,
) -> Result<AvarEstimate> {
    config.validate()?;
    let n = step_count(config);
    let horizon = n as f64 * config.dt;
    let n_b = batch_count(horizon - config.burn_in, &config.batches)?;
    let grid = model.grid();
    let sd = config.dt.sqrt();
    let replicas = run_replicas(config, |r| {
        let mut rng = replica_rng(config.seed, r);
        let mut x = sample_stationary_halfline(model, &mut rng);
        let mut acc = BatchAccumulator::new(config.burn_in, horizon, n_b);
        for k in 0..n {
            let t = k as f64 * config.dt;
            acc.add(t, t + config.dt, f.eval(grid, x));
            let dw: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
            x = reflected_step(model, x, config.dt, dw, t + config.dt)?;
        }
        Ok(acc.into_integrals())
    })?;
    Ok(AvarEstimate::from_batches(
        &replicas,
        (horizon - config.burn_in) / n_b as f64,
    ))
}
