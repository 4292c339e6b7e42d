use avar_core::chain::{
    asymptotic_variance_exact, dirichlet_form, dual_generator, green_solve, resolvent_solve,
    sector_constant, spectral_gap, stationary_distribution,
};
use avar_core::diffusion1d::{
    avar_quadrature, build_model, poisson_solution, Function, Grid1d, QuadratureConfig,
};
use avar_core::exittime::{indicator_observable, mean_exit_time_exact, variational_exit_time};
use avar_core::fixtures::{
    random_centered_observable, random_mixture, random_omega, random_reversible, two_state,
    RandomChain,
};
use avar_core::montecarlo::{estimate_avar_ctmc, replica_rng, SimulationConfig};
use avar_core::varform::{build_saddle, MinMaxProblem};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn chain(seed: u64, n: usize, eps: f64) -> (RandomChain, DVector<f64>, ChaCha8Rng) {
    let mut rng = replica_rng(seed, 0);
    let c = random_mixture(n, eps, &mut rng);
    let f = random_centered_observable(&c.pi, &mut rng);
    (c, f, rng)
}

fn normal_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn stationary_law_and_green_solution(seed in any::<u64>(), n in 3usize..12, eps in 0.0f64..2.0) {
        let (c, f, _) = chain(seed, n, eps);
        let pi = stationary_distribution(&c.model).unwrap();
        prop_assert!(pi.as_slice().iter().all(|&p| p > 0.0));
        prop_assert!(pi.balance_residual(&c.model) <= 1e-12);
        let u = green_solve(&c.model, &pi, &f).unwrap();
        let residual = (c.model.rates() * &u + &f).amax();
        prop_assert!(residual <= 1e-9 * f.amax());
        prop_assert!(pi.mean(&u).abs() <= 1e-10);
    }

    #[test]
    fn form_is_nonnegative(seed in any::<u64>(), n in 3usize..12, eps in 0.0f64..2.0) {
        let (c, _, mut rng) = chain(seed, n, eps);
        let form = dirichlet_form(&c.model, &c.pi);
        for _ in 0..1000 {
            let u = normal_vector(n, &mut rng);
            prop_assert!(form.quadratic(&u) >= -1e-12);
        }
    }

    #[test]
    fn duality_symmetry(seed in any::<u64>(), n in 3usize..12, eps in 0.0f64..2.0) {
        let (c, f, _) = chain(seed, n, eps);
        let dual = dual_generator(&c.model, &c.pi).unwrap();
        let g = green_solve(&c.model, &c.pi, &f).unwrap();
        let g_star = green_solve(&dual, &c.pi, &f).unwrap();
        prop_assert!((c.pi.inner(&g, &f) - c.pi.inner(&g_star, &f)).abs() <= 1e-10);
        prop_assert!(c.pi.balance_residual(&dual) <= 1e-12);
    }

    #[test]
    fn resolvent_approaches_green(seed in any::<u64>(), n in 3usize..12, eps in 0.0f64..2.0) {
        let (c, f, _) = chain(seed, n, eps);
        let g = green_solve(&c.model, &c.pi, &f).unwrap();
        let d: Vec<f64> = [1.0, 0.1, 0.01, 0.001]
            .iter()
            .map(|&a| c.pi.norm(&(resolvent_solve(&c.model, a, &f).unwrap() - &g)))
            .collect();
        prop_assert!(d.windows(2).all(|w| w[1] < w[0]), "{:?}", d);
    }

    #[test]
    fn reversibility_iff_unit_sector_constant(seed in any::<u64>(), n in 3usize..10, eps in prop_oneof![Just(0.0), 0.05f64..2.0]) {
        let (c, _, _) = chain(seed, n, eps);
        let k = sector_constant(&c.model, &c.pi).unwrap().k;
        let a_norm = dirichlet_form(&c.model, &c.pi).antisymmetric().norm();
        let reversible = spectral_gap(&c.model, &c.pi).reversible;
        prop_assert_eq!(reversible, eps == 0.0);
        prop_assert_eq!((k - 1.0).abs() <= 1e-8, reversible);
        prop_assert_eq!(a_norm <= 1e-10, reversible);
    }

    #[test]
    fn time_scaling(seed in any::<u64>(), n in 3usize..12, eps in 0.0f64..2.0, k in 0.1f64..10.0) {
        let (c, f, _) = chain(seed, n, eps);
        let fast = c.model.scaled(k).unwrap();
        let s = asymptotic_variance_exact(&c.model, &c.pi, &f).unwrap();
        let s_fast = asymptotic_variance_exact(&fast, &c.pi, &f).unwrap();
        prop_assert!(rel(s_fast, s / k) <= 1e-10);
        let gap = spectral_gap(&c.model, &c.pi).lambda1;
        prop_assert!(rel(spectral_gap(&fast, &c.pi).lambda1, k * gap) <= 1e-10);
    }

    #[test]
    fn saddle_orthogonality(seed in any::<u64>(), n in 3usize..12, eps in 0.0f64..2.0) {
        let (c, f, mut rng) = chain(seed, n, eps);
        let s = build_saddle(&c.model, &c.pi, &f).unwrap();
        let form = dirichlet_form(&c.model, &c.pi);
        let g = c.pi.weights().component_mul(&f);
        for _ in 0..20 {
            let raw = normal_vector(n, &mut rng);
            let v1 = &raw - &g * (g.dot(&raw) / g.dot(&g));
            prop_assert!(form.energy(&v1, &s.w_star).abs() <= 1e-10);
            prop_assert!(form.energy(&s.w, &v1).abs() <= 1e-10);
        }
    }

    #[test]
    fn inner_sup_in_full_coordinates(seed in any::<u64>(), n in 3usize..10, eps in 0.0f64..2.0) {
        // Lagrange system on all of R^n, pinned by (v, 1)_pi = 0, against the
        // reduced solve on the annihilator basis.
        let (c, f, mut rng) = chain(seed, n, eps);
        let problem = MinMaxProblem::new(&c.model, &c.pi, &f).unwrap();
        let form = problem.form();
        let (s, a) = (form.symmetric(), form.antisymmetric());
        let g = c.pi.weights().component_mul(&f);
        let p = c.pi.weights();
        let mut kkt = DMatrix::zeros(n + 2, n + 2);
        kkt.view_mut((0, 0), (n, n)).copy_from(&(s * 2.0));
        for i in 0..n {
            kkt[(i, n)] = g[i];
            kkt[(n, i)] = g[i];
            kkt[(i, n + 1)] = p[i];
            kkt[(n + 1, i)] = p[i];
        }
        let lu = kkt.lu();
        for _ in 0..10 {
            let u = problem.base_point() + problem.annihilator_basis() * normal_vector(n - 1, &mut rng);
            let mut rhs = DVector::zeros(n + 2);
            rhs.rows_mut(0, n).copy_from(&(a.transpose() * &u * 2.0));
            let sol = lu.solve(&rhs).unwrap();
            let v = sol.rows(0, n).into_owned();
            let direct = u.dot(&(s * &u)) - v.dot(&(s * &v)) + 2.0 * u.dot(&(a * &v));
            let reduced = problem.inner_sup(&u).value.finite().unwrap();
            prop_assert!(rel(reduced, direct) <= 1e-9, "{} vs {}", reduced, direct);
        }
    }

    #[test]
    fn exit_time_proof_chain(seed in any::<u64>(), n in 3usize..10) {
        let mut rng = replica_rng(seed, 0);
        let c = random_reversible(n, &mut rng);
        let omega = random_omega(n, &mut rng);
        let f = indicator_observable(&c.pi, &omega).unwrap();
        // Every u vanishing off Omega with pi(u) = 1 has (u, f)_pi = 1.
        for _ in 0..20 {
            let mut u = DVector::zeros(n);
            for &x in &omega {
                u[x] = rng.random_range(-1.0..2.0);
            }
            let m = c.pi.mean(&u);
            if m.abs() < 1e-3 {
                continue;
            }
            u /= m;
            prop_assert!((c.pi.inner(&u, &f) - 1.0).abs() <= 1e-12);
        }
        let exact = mean_exit_time_exact(&c.model, &c.pi, &omega).unwrap();
        let sigma2 = asymptotic_variance_exact(&c.model, &c.pi, &f).unwrap();
        prop_assert!(exact <= sigma2 / 2.0 + 1e-10);
        let gap = spectral_gap(&c.model, &c.pi).lambda1;
        prop_assert!(sigma2 / 2.0 <= c.pi.inner(&f, &f) / gap + 1e-10);
        let v = variational_exit_time(&c.model, &c.pi, &omega).unwrap();
        prop_assert!(rel(v.exit_time, exact) <= 1e-8);
    }
}

fn half_line(a: &str, pi: &str) -> avar_core::diffusion1d::Diffusion1DModel {
    build_model(
        &Function::parse(a).unwrap(),
        &Function::parse(pi).unwrap(),
        None,
        Grid1d::new(40.0, 2001).unwrap(),
        QuadratureConfig::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn diffusion_identities(p in 0.3f64..2.0, q in 0.0f64..2.0, r in 0.1f64..1.0, k in 0.2f64..5.0, c1 in -2.0f64..2.0, c2 in -1.0f64..1.0) {
        let a = format!("{p} + {q} * exp(-{r} * x)");
        let m = half_line(&a, "0.5 * (1 + x) * exp(-x)");
        prop_assert!(m.consistency_residual() <= 1e-7);
        let f = m.centered(&Function::parse(&format!("{c1} * x + {c2} * x^2")).unwrap()).unwrap();
        let s = avar_quadrature(&m, &f).unwrap().sigma2;
        let poisson = poisson_solution(&m, &f).unwrap().sigma2;
        prop_assert!((s - poisson).abs() <= 1e-5 * s);
        let fast = half_line(&format!("{k} * ({a})"), "0.5 * (1 + x) * exp(-x)");
        let s_fast = avar_quadrature(&fast, &f).unwrap().sigma2;
        prop_assert!(rel(s_fast, s / k) <= 1e-10, "{} vs {}", s_fast, s / k);
    }

    #[test]
    fn estimates_are_bit_identical(seed in any::<u64>(), replicas in 1usize..4) {
        let m = two_state(1.0, 2.0);
        let pi = stationary_distribution(&m).unwrap();
        let f = pi.center(&DVector::from_vec(vec![1.0, 0.0]));
        let config = SimulationConfig::new(seed, 400.0).with_replicas(replicas);
        let a = estimate_avar_ctmc(&m, &pi, &f, &config).unwrap();
        let b = estimate_avar_ctmc(&m, &pi, &f, &config).unwrap();
        prop_assert_eq!(a.sigma2_hat.to_bits(), b.sigma2_hat.to_bits());
        prop_assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }
}
