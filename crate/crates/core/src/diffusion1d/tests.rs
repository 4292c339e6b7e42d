use super::*;

fn f(src: &str) -> Function {
    Function::parse(src).unwrap()
}

fn exponential(a: &str) -> Diffusion1DModel {
    build_model(
        &f(a),
        &f("exp(-x)"),
        Some(1.0),
        Grid1d::new(40.0, 8001).unwrap(),
        QuadratureConfig::default(),
    )
    .unwrap()
}

#[test]
fn unit_coefficient_drift_and_scale() {
    let m = exponential("1");
    assert!(m.b().iter().all(|b| (b + 1.0).abs() < 1e-14));
    for (x, c) in m.nodes().iter().zip(m.c()) {
        assert!((c + (x - 1.0)).abs() < 1e-9, "c({x}) = {c}");
    }
    assert!(m.consistency_residual() <= 1e-8);
    assert_eq!(m.x0(), 1.0);
    assert_eq!(m.c()[m.grid().nearest(1.0)], 0.0);
    assert_eq!(m.phi()[0], 0.0);
}

#[test]
fn doubled_coefficient_drift() {
    let m = exponential("2");
    assert!(m.b().iter().all(|b| (b + 2.0).abs() < 1e-14));
}

#[test]
fn variable_coefficient_consistency() {
    let m = build_model(
        &f("1 + x + 0.1*x^2"),
        &f("x * exp(-x)"),
        None,
        Grid1d::new(45.0, 9001).unwrap(),
        QuadratureConfig::default(),
    );
    // x e^{-x} vanishes at 0, which breaks strict positivity.
    assert!(matches!(m, Err(Error::NonpositiveInput { what: "pi", .. })));
    let m = build_model(
        &f("1 + x + 0.1*x^2"),
        &f("0.5 * (1 + x) * exp(-x)"),
        None,
        Grid1d::new(45.0, 9001).unwrap(),
        QuadratureConfig::default(),
    )
    .unwrap();
    assert!(
        m.consistency_residual() < 1e-7,
        "{}",
        m.consistency_residual()
    );
}

#[test]
fn scaling_coefficient_keeps_density() {
    let m1 = exponential("1");
    let m3 = exponential("3");
    assert_eq!(m1.pi_density(), m3.pi_density());
    assert!((m1.consistency_residual() - m3.consistency_residual()).abs() < 1e-12);
}

#[test]
fn sample_inputs_use_finite_differences() {
    let grid = Grid1d::new(40.0, 8001).unwrap();
    let pi: Vec<f64> = grid.nodes().iter().map(|x| (-x).exp()).collect();
    let m = build_model(
        &Function::Samples(vec![1.0; 8001]),
        &Function::Samples(pi),
        Some(1.0),
        grid,
        QuadratureConfig::default(),
    )
    .unwrap();
    let a = avar_quadrature(&m, &f("x - 1")).unwrap();
    assert!((a.sigma2 - 4.0).abs() < 1e-4);
    assert!(m.consistency_residual() < 1e-10);
    // Curved log-density: second-order accurate only.
    let pi: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|x| 2.0 * (-x * x).exp() / std::f64::consts::PI.sqrt())
        .collect();
    let m = build_model(
        &Function::Samples(vec![1.0; 8001]),
        &Function::Samples(pi),
        None,
        Grid1d::new(8.0, 8001).unwrap(),
        QuadratureConfig::default(),
    );
    assert!(m.is_err(), "grid length differs from samples");
    let grid = Grid1d::new(8.0, 8001).unwrap();
    let pi: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|x| 2.0 * (-x * x).exp() / std::f64::consts::PI.sqrt())
        .collect();
    let m = build_model(
        &Function::Samples(vec![1.0; 8001]),
        &Function::Samples(pi),
        None,
        grid,
        QuadratureConfig::default(),
    )
    .unwrap();
    assert!(
        m.consistency_residual() < 1e-5,
        "{}",
        m.consistency_residual()
    );
}

#[test]
fn heavy_tail_is_rejected() {
    let err = build_model(
        &f("1"),
        &f("exp(-x)"),
        None,
        Grid1d::new(10.0, 1001).unwrap(),
        QuadratureConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::TailMassTooLarge { .. }));
}

#[test]
fn nonpositive_coefficient_is_rejected() {
    let err = build_model(
        &f("x - 1"),
        &f("exp(-x)"),
        None,
        Grid1d::new(40.0, 401).unwrap(),
        QuadratureConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::NonpositiveInput { what: "a", .. }));
}

#[test]
fn exponential_quadrature_closed_form() {
    let r = avar_quadrature(&exponential("1"), &f("x - 1")).unwrap();
    assert!((r.sigma2 - 4.0).abs() < 1e-8, "{}", r.sigma2);
    assert!(r.recentered_shift.abs() < 1e-10);
    let coarse = r.coarse_levels[0];
    assert!(((coarse - r.sigma2) / r.sigma2).abs() < 1e-5);
    let r2 = avar_quadrature(&exponential("2"), &f("x - 1")).unwrap();
    assert!((r2.sigma2 - 2.0).abs() < 1e-8);
    let r0 = avar_quadrature(&exponential("1"), &f("0")).unwrap();
    assert_eq!(r0.sigma2, 0.0);
}

#[test]
fn uncentered_observable_is_rejected() {
    assert!(matches!(
        avar_quadrature(&exponential("1"), &f("x")),
        Err(Error::NotCentered { .. })
    ));
    let nearly = avar_quadrature(&exponential("1"), &f("x - 1 + 1e-7")).unwrap();
    assert!((nearly.recentered_shift - 1e-7).abs() < 1e-10);
}

#[test]
fn quadrature_scales_inversely_with_coefficient() {
    let m = exponential("1 + 0.5*x");
    let obs = m.centered(&f("(x^2 - 2) * exp(-x/3)")).unwrap();
    let s1 = avar_quadrature(&m, &obs).unwrap().sigma2;
    let s4 = avar_quadrature(&exponential("4 * (1 + 0.5*x)"), &obs)
        .unwrap()
        .sigma2;
    assert!((s1 / s4 - 4.0).abs() < 1e-12);
}

#[test]
fn grid_refinement_converges() {
    let s: Vec<f64> = [1001, 2001, 4001]
        .iter()
        .map(|&n| {
            let m = build_model(
                &f("1 + x"),
                &f("exp(-x)"),
                Some(1.0),
                Grid1d::new(40.0, n).unwrap(),
                QuadratureConfig::default(),
            )
            .unwrap();
            avar_quadrature(&m, &f("x - 1")).unwrap().sigma2
        })
        .collect();
    let (d1, d2) = ((s[1] - s[0]).abs(), (s[2] - s[1]).abs());
    assert!(d2 * 4.0 <= d1 || d2 < 1e-12, "{s:?}");
    let trap = QuadratureConfig {
        rule: Rule::Trapezoid,
        ..Default::default()
    };
    let t: Vec<f64> = [2001, 4001, 8001]
        .iter()
        .map(|&n| {
            let m = build_model(
                &f("1 + x"),
                &f("exp(-x)"),
                Some(1.0),
                Grid1d::new(40.0, n).unwrap(),
                trap,
            )
            .unwrap();
            avar_quadrature(&m, &m.centered(&f("x - 1")).unwrap())
                .unwrap()
                .sigma2
        })
        .collect();
    assert!((t[2] - t[1]).abs() * 2.0 <= (t[1] - t[0]).abs(), "{t:?}");
}

#[test]
fn poisson_solution_is_half_square() {
    let m = exponential("1");
    let p = poisson_solution(&m, &f("x - 1")).unwrap();
    for (i, x) in m.nodes().iter().enumerate().take(4000) {
        assert!((p.du[i] - x).abs() < 1e-6, "u'({x}) = {}", p.du[i]);
        assert!((p.u[i] - x * x / 2.0).abs() < 1e-5);
    }
    assert!(p.du[0].abs() < 1e-12);
    assert!(p.residual_max <= 1e-5, "{}", p.residual_max);
    assert!((p.sigma2 - 4.0).abs() < 1e-5 * 4.0);
}

#[test]
fn poisson_of_zero_is_constant() {
    let p = poisson_solution(&exponential("1"), &f("0")).unwrap();
    assert!(p.u.iter().all(|u| *u == 0.0));
}

#[test]
fn poisson_and_quadrature_agree() {
    for a in ["1", "1 + x", "2 + exp(-x)", "(1 + x)^0.5"] {
        let m = exponential(a);
        let obs = f("x - 1");
        let q = avar_quadrature(&m, &obs).unwrap().sigma2;
        let p = poisson_solution(&m, &obs).unwrap().sigma2;
        assert!((q - p).abs() <= 1e-5 * q, "{a}: {q} vs {p}");
    }
}

#[test]
fn nonexplosion_verdicts() {
    let d = check_nonexplosive(&exponential("1"));
    assert_eq!(d.verdict, ExplosionVerdict::Diverging);
    let short = build_model(
        &f("1"),
        &f("exp(-10*x) * 10"),
        None,
        Grid1d::new(2.0, 401).unwrap(),
        QuadratureConfig::default(),
    )
    .unwrap();
    assert_eq!(
        check_nonexplosive(&short).verdict,
        ExplosionVerdict::Inconclusive
    );
    let fast = build_model(
        &f("exp(2*x)"),
        &f("exp(-x)"),
        Some(1.0),
        Grid1d::new(40.0, 8001).unwrap(),
        QuadratureConfig::default(),
    )
    .unwrap();
    let d = check_nonexplosive(&fast);
    assert_eq!(d.verdict, ExplosionVerdict::Inconclusive);
    assert!(d.growth_exponent < DIVERGING_EXPONENT);
}

#[test]
fn comparison_orders_variances() {
    let obs = f("x - 1");
    let c = compare_coefficients(&exponential("2"), &exponential("1"), &obs).unwrap();
    assert!((c.sigma2_a - 2.0).abs() < 1e-8 && (c.sigma2_a1 - 4.0).abs() < 1e-8);
    assert_eq!(c.verdict, ComparisonVerdict::Confirmed);
    let same = compare_coefficients(&exponential("1"), &exponential("1"), &obs).unwrap();
    assert_eq!(same.sigma2_a, same.sigma2_a1);
    assert_eq!(same.verdict, ComparisonVerdict::Confirmed);
    assert!(matches!(
        compare_coefficients(&exponential("1"), &exponential("2"), &obs),
        Err(Error::DominanceViolated { .. })
    ));
}

#[test]
fn spec_file_round_trip() {
    let json = r#"{"a": "1 + x", "pi": "exp(-x)", "x0": 1.0, "x_max": 40, "n_grid": 4001}"#;
    let spec: DiffusionSpec = serde_json::from_str(json).unwrap();
    let m = spec.build(QuadratureConfig::default()).unwrap();
    assert_eq!(m.grid().n_grid, 4001);
    let back: DiffusionSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
    let missing = r#"{"a": 1, "pi": "exp(-x)", "n_grid": 11}"#;
    assert!(serde_json::from_str::<DiffusionSpec>(missing).is_err());
    let samples = r#"{"a": [1, 1, 1], "pi": "exp(-x)", "x_max": 1, "n_grid": 3}"#;
    let spec: DiffusionSpec = serde_json::from_str(samples).unwrap();
    assert_eq!(spec.a, Function::Samples(vec![1.0; 3]));
}
