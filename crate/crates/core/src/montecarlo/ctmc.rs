use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::{
    batch_count, replica_rng, run_replicas, AvarEstimate, BatchAccumulator, SimulationConfig,
};
use nalgebra::DVector;

use crate::chain::{check_centered, CtmcModel, StationaryDistribution};
use crate::error::{Error, Result};

/// A piecewise-constant trajectory: `states[k]` is occupied on
/// `[times[k], times[k + 1])`, the last one until `horizon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtmcPath {
    pub times: Vec<f64>,
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl CtmcPath {
    /// Fraction of `[0, horizon]` spent in each state.
    pub fn occupation(&self, n: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n];
        for (k, &s) in self.states.iter().enumerate() {
            let end = self.times.get(k + 1).copied().unwrap_or(self.horizon);
            occ[s] += end - self.times[k];
        }
        if self.horizon > 0.0 {
            occ.iter_mut().for_each(|o| *o /= self.horizon);
        }
        occ
    }
}

/// Jump kernel of a validated generator.
struct Kernel {
    exit: Vec<f64>,
    targets: Vec<Vec<usize>>,
    jumps: Vec<Option<WeightedIndex<f64>>>,
}

impl Kernel {
    fn new(model: &CtmcModel) -> Self {
        let q = model.rates();
        let n = model.n();
        let mut exit = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        let mut jumps = Vec::with_capacity(n);
        for x in 0..n {
            let (ys, ws): (Vec<usize>, Vec<f64>) = (0..n)
                .filter(|&y| y != x && q[(x, y)] > 0.0)
                .map(|y| (y, q[(x, y)]))
                .unzip();
            exit.push(ws.iter().sum());
            jumps.push(WeightedIndex::new(&ws).ok());
            targets.push(ys);
        }
        Self {
            exit,
            targets,
            jumps,
        }
    }

    /// Calls `visit(t0, t1, state)` for each holding interval up to `horizon`.
    fn run<R: Rng>(
        &self,
        start: usize,
        horizon: f64,
        rng: &mut R,
        mut visit: impl FnMut(f64, f64, usize),
    ) {
        let (mut t, mut x) = (0.0, start);
        while t < horizon {
            let rate = self.exit[x];
            let next = match &self.jumps[x] {
                Some(w) if rate > 0.0 => {
                    let hold: f64 = rng.sample(Exp1);
                    (t + hold / rate, Some(self.targets[x][w.sample(rng)]))
                }
                _ => (f64::INFINITY, None),
            };
            visit(t, next.0.min(horizon), x);
            match next {
                (t1, Some(y)) if t1 < horizon => {
                    t = t1;
                    x = y;
                }
                _ => break,
            }
        }
    }
}

fn initial_state<R: Rng>(pi: &StationaryDistribution, rng: &mut R) -> usize {
    WeightedIndex::new(pi.as_slice())
        .expect("stationary weights are positive")
        .sample(rng)
}

/// Exact (Gillespie) trajectory of replica 0 on `[0, config.horizon]`,
/// started from `pi`.
pub fn simulate_ctmc(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    config: &SimulationConfig,
) -> Result<CtmcPath> {
    if !(config.horizon >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "horizon must be nonnegative, got {}",
            config.horizon
        )));
    }
    check_pi(model, pi)?;
    let kernel = Kernel::new(model);
    let mut rng = replica_rng(config.seed, 0);
    let start = initial_state(pi, &mut rng);
    let mut path = CtmcPath {
        times: vec![0.0],
        states: vec![start],
        horizon: config.horizon,
    };
    kernel.run(start, config.horizon, &mut rng, |t0, _, x| {
        if t0 > 0.0 {
            path.times.push(t0);
            path.states.push(x);
        }
    });
    Ok(path)
}

fn check_pi(model: &CtmcModel, pi: &StationaryDistribution) -> Result<()> {
    if pi.as_slice().len() != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            got: pi.as_slice().len(),
        });
    }
    Ok(())
}

/// Batch-means estimate of the asymptotic variance of a centered
/// observable. The time integral is exact along each path.
pub fn estimate_avar_ctmc(
    model: &CtmcModel,
    pi: &StationaryDistribution,
    f: &DVector<f64>,
    config: &SimulationConfig,
) -> Result<AvarEstimate> {
    config.validate()?;
    check_pi(model, pi)?;
    check_centered(f, pi)?;
    let n_b = batch_count(config.effective_horizon(), &config.batches)?;
    let kernel = Kernel::new(model);
    let values = f.as_slice();
    let replicas = run_replicas(config, |r| {
        let mut rng = replica_rng(config.seed, r);
        let start = initial_state(pi, &mut rng);
        let mut acc = BatchAccumulator::new(config.burn_in, config.horizon, n_b);
        kernel.run(start, config.horizon, &mut rng, |t0, t1, x| {
            acc.add(t0, t1, values[x])
        });
        Ok(acc.into_integrals())
    })?;
    Ok(AvarEstimate::from_batches(
        &replicas,
        config.effective_horizon() / n_b as f64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{asymptotic_variance_exact, stationary_distribution};
    use crate::fixtures::{three_cycle, two_state};

    fn setup(model: &CtmcModel) -> StationaryDistribution {
        stationary_distribution(model).unwrap()
    }

    #[test]
    fn occupation_matches_pi() {
        let m = two_state(1.0, 1.0);
        let pi = setup(&m);
        let path = simulate_ctmc(&m, &pi, &SimulationConfig::new(3, 1e4)).unwrap();
        let occ = path.occupation(2);
        // Occupation fraction of a symmetric flip chain has variance about 1 / (4 T).
        let se = (1.0 / 4e4_f64).sqrt();
        assert!((occ[0] - 0.5).abs() < 3.0 * se, "{occ:?}");
        assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_path_is_initial_state() {
        let m = three_cycle(1.0);
        let pi = setup(&m);
        let path = simulate_ctmc(&m, &pi, &SimulationConfig::new(1, 0.0)).unwrap();
        assert_eq!(path.times, vec![0.0]);
        assert_eq!(path.states.len(), 1);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = three_cycle(1.0);
        let pi = setup(&m);
        let c = SimulationConfig::new(11, 500.0);
        assert_eq!(
            simulate_ctmc(&m, &pi, &c).unwrap(),
            simulate_ctmc(&m, &pi, &c).unwrap()
        );
        let f = DVector::from_vec(vec![2.0, -1.0, -1.0]);
        let c = c.with_replicas(3);
        assert_eq!(
            estimate_avar_ctmc(&m, &pi, &f, &c).unwrap(),
            estimate_avar_ctmc(&m, &pi, &f, &c).unwrap()
        );
    }

    #[test]
    fn path_follows_allowed_transitions() {
        let m = three_cycle(1.0);
        let pi = setup(&m);
        let path = simulate_ctmc(&m, &pi, &SimulationConfig::new(5, 200.0)).unwrap();
        assert!(path.states.windows(2).all(|w| w[1] == (w[0] + 1) % 3));
        assert!(path.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn initial_state_is_stationary() {
        // Chi-square goodness of fit over 10^4 draws, 2 degrees of freedom.
        let m = crate::fixtures::birth_death(&[1.0, 2.0], &[3.0, 1.0]);
        let pi = setup(&m);
        let mut rng = replica_rng(2024, 0);
        let mut counts = [0usize; 3];
        let draws = 10_000;
        for _ in 0..draws {
            counts[initial_state(&pi, &mut rng)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(pi.as_slice())
            .map(|(&c, &p)| (c as f64 - draws as f64 * p).powi(2) / (draws as f64 * p))
            .sum();
        assert!(chi2 < 9.21, "chi2 = {chi2}");
    }

    #[test]
    fn two_state_estimate() {
        let m = two_state(1.0, 1.0);
        let pi = setup(&m);
        let f = DVector::from_vec(vec![1.0, -1.0]);
        let exact = asymptotic_variance_exact(&m, &pi, &f).unwrap();
        assert!((exact - 1.0).abs() < 1e-12);
        let est = estimate_avar_ctmc(&m, &pi, &f, &SimulationConfig::new(1, 1e5)).unwrap();
        assert!(est.covers(exact, 3.0), "{est:?}");
        assert_eq!(est.n_batches, 316);
    }

    #[test]
    fn three_cycle_estimate() {
        let m = three_cycle(1.0);
        let pi = setup(&m);
        let f = DVector::from_vec(vec![2.0, -1.0, -1.0]);
        let exact = asymptotic_variance_exact(&m, &pi, &f).unwrap();
        assert!((exact - 2.0).abs() < 1e-12);
        let est = estimate_avar_ctmc(&m, &pi, &f, &SimulationConfig::new(2, 1e5)).unwrap();
        assert!(est.covers(exact, 3.0), "{est:?}");
    }

    #[test]
    fn zero_observable_gives_zero() {
        let m = three_cycle(1.0);
        let pi = setup(&m);
        let est = estimate_avar_ctmc(
            &m,
            &pi,
            &DVector::from_vec(vec![0.0; 3]),
            &SimulationConfig::new(1, 1e3),
        )
        .unwrap();
        assert_eq!((est.sigma2_hat, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn short_horizon_is_rejected() {
        let m = two_state(1.0, 1.0);
        let pi = setup(&m);
        let f = DVector::from_vec(vec![1.0, -1.0]);
        let err = estimate_avar_ctmc(&m, &pi, &f, &SimulationConfig::new(1, 100.0)).unwrap_err();
        assert_eq!(
            err,
            Error::TooFewBatches {
                got: 10,
                needed: 16
            }
        );
    }

    #[test]
    fn uncentered_observable_is_rejected() {
        let m = two_state(1.0, 1.0);
        let pi = setup(&m);
        let f = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            estimate_avar_ctmc(&m, &pi, &f, &SimulationConfig::new(1, 1e3)),
            Err(Error::NotCentered { .. })
        ));
    }
}
