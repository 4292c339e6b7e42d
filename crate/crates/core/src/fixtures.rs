//! Reference chains and random model families used by the tests, the
//! acceptance suite and the documentation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chain::{CtmcModel, StationaryDistribution};

/// Two states with rates `0 -> 1 = a` and `1 -> 0 = b`.
pub fn two_state(a: f64, b: f64) -> CtmcModel {
    CtmcModel::from_matrix(DMatrix::from_row_slice(2, 2, &[-a, a, b, -b]))
        .expect("valid two-state chain")
}

/// Three states visited `0 -> 1 -> 2 -> 0` at a common rate.
pub fn three_cycle(rate: f64) -> CtmcModel {
    let mut q = DMatrix::zeros(3, 3);
    for i in 0..3 {
        q[(i, (i + 1) % 3)] = rate;
        q[(i, i)] = -rate;
    }
    CtmcModel::from_matrix(q).expect("valid cycle")
}

/// Birth-death chain on `0..=births.len()`: `births[i]` is the rate
/// `i -> i+1` and `deaths[i]` the rate `i+1 -> i`.
pub fn birth_death(births: &[f64], deaths: &[f64]) -> CtmcModel {
    assert_eq!(births.len(), deaths.len());
    let n = births.len() + 1;
    let mut q = DMatrix::zeros(n, n);
    for i in 0..births.len() {
        q[(i, i + 1)] = births[i];
        q[(i + 1, i)] = deaths[i];
    }
    close_rows(&mut q);
    CtmcModel::from_matrix(q).expect("valid birth-death chain")
}

/// Complete graph on `n` states, every off-diagonal rate equal to `rate`.
pub fn complete_graph(n: usize, rate: f64) -> CtmcModel {
    let mut q = DMatrix::from_element(n, n, rate);
    close_rows(&mut q);
    CtmcModel::from_matrix(q).expect("valid complete graph")
}

/// A random chain together with its exactly known stationary law.
#[derive(Debug, Clone)]
pub struct RandomChain {
    pub model: CtmcModel,
    pub pi: StationaryDistribution,
}

fn close_rows(q: &mut DMatrix<f64>) {
    let n = q.nrows();
    for i in 0..n {
        q[(i, i)] = 0.0;
        let out: f64 = q.row(i).iter().sum();
        q[(i, i)] = -out;
    }
}

fn random_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    let w = DVector::from_fn(n, |_, _| rng.random_range(0.5..1.5));
    let total = w.sum();
    w / total
}

fn reversible_core<R: Rng + ?Sized>(pi: &DVector<f64>, density: f64, rng: &mut R) -> DMatrix<f64> {
    let n = pi.len();
    let mut q = DMatrix::zeros(n, n);
    // A spanning path keeps the core irreducible regardless of density.
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i + 1 || rng.random::<f64>() < density {
                let s = rng.random_range(0.5..2.0);
                q[(i, j)] = s * (pi[j] / pi[i]).sqrt();
                q[(j, i)] = s * (pi[i] / pi[j]).sqrt();
            }
        }
    }
    q
}

/// Random reversible chain on `n` states with a random stationary law:
/// `pi_x q_xy = s_xy sqrt(pi_x pi_y)` with symmetric `s`.
pub fn random_reversible<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RandomChain {
    let pi = random_weights(n, rng);
    let mut q = reversible_core(&pi, 0.7, rng);
    close_rows(&mut q);
    RandomChain {
        model: CtmcModel::from_matrix(q).expect("valid reversible chain"),
        pi: StationaryDistribution::new(pi).expect("valid weights"),
    }
}

fn add_circulation<R: Rng + ?Sized>(
    q: &mut DMatrix<f64>,
    pi: &DVector<f64>,
    eps: f64,
    rng: &mut R,
) {
    let n = pi.len();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for k in 0..n {
        let (x, y) = (order[k], order[(k + 1) % n]);
        // Constant probability flux eps around the cycle preserves pi Q = 0.
        q[(x, y)] += eps / pi[x];
    }
}

/// Reversible core plus a divergence-free circulation of strength `eps`
/// around a random Hamiltonian cycle; `pi` is unchanged by the perturbation.
pub fn random_mixture<R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> RandomChain {
    let pi = random_weights(n, rng);
    let mut q = reversible_core(&pi, 0.7, rng);
    add_circulation(&mut q, &pi, eps, rng);
    close_rows(&mut q);
    RandomChain {
        model: CtmcModel::from_matrix(q).expect("valid mixture chain"),
        pi: StationaryDistribution::new(pi).expect("valid weights"),
    }
}

/// As [`random_mixture`] with every pair of states connected.
pub fn random_dense_mixture<R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> RandomChain {
    let pi = random_weights(n, rng);
    let mut q = reversible_core(&pi, 1.0, rng);
    add_circulation(&mut q, &pi, eps, rng);
    close_rows(&mut q);
    RandomChain {
        model: CtmcModel::from_matrix(q).expect("valid mixture chain"),
        pi: StationaryDistribution::new(pi).expect("valid weights"),
    }
}

/// Standard normal coordinates, centered and scaled to `||f||_pi = 1`.
pub fn random_centered_observable<R: Rng + ?Sized>(
    pi: &StationaryDistribution,
    rng: &mut R,
) -> DVector<f64> {
    let raw = DVector::from_fn(pi.len(), |_, _| StandardNormal.sample(rng));
    let f = pi.center(&raw);
    let norm = pi.norm(&f);
    f / norm
}

/// A uniformly random nonempty proper subset of `0..n`, sorted.
pub fn random_omega<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    assert!(n >= 2);
    loop {
        let omega: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if !omega.is_empty() && omega.len() < n {
            return omega;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{is_reversible, stationary_distribution};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_families_have_the_advertised_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 3..10 {
            let rev = random_reversible(n, &mut rng);
            assert!(rev.pi.balance_residual(&rev.model) < 1e-13);
            assert!(is_reversible(&rev.model, &rev.pi, 1e-13));
            let mix = random_mixture(n, 0.3, &mut rng);
            assert!(mix.pi.balance_residual(&mix.model) < 1e-12);
            assert!(!is_reversible(&mix.model, &mix.pi, 1e-6));
            let solved = stationary_distribution(&mix.model).unwrap();
            assert!((solved.weights() - mix.pi.weights()).amax() < 1e-12);
        }
    }
}
