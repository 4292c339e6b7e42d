use std::time::Instant;

use avar_core::chain::{
    asymptotic_variance_exact, detailed_balance_defect, dual_generator, sector_constant,
    spectral_gap, stationary_distribution, CtmcModel, ModelFile, StationaryDistribution,
    CENTER_TOL, DEFAULT_ROW_SUM_TOL, REVERSIBLE_TOL,
};
use avar_core::diffusion1d::{
    avar_quadrature, check_nonexplosive, compare_coefficients, poisson_solution, DiffusionSpec,
    Function, QuadratureConfig, Rule, DIVERGING_EXPONENT, RECENTER_THRESHOLD,
};
use avar_core::exittime::{exit_bound_report, exit_bound_report_unchecked, TIGHT_RATIO};
use avar_core::montecarlo::{
    avar_ou_linear_exact, estimate_avar_ctmc, estimate_avar_halfline, estimate_avar_ou,
    AvarEstimate, BatchPolicy, Integrator, OuRotationModel, SimulationConfig,
};
use avar_core::varform::{minmax_value, reversible_min, Method, OptimizerConfig};
use avar_core::Error;
use serde_json::{json, Value};

use crate::failure::{warn, Failure};
use crate::output::{render, write, Manifest, Rendered};
use crate::{
    input, ChainArgs, Command, Diffusion1dArgs, ExittimeArgs, IntegratorArg, RuleArg, SimCommon,
    SimTarget,
};

/// What a command contributes to its manifest.
struct Context {
    subcommand: &'static str,
    inputs: Vec<String>,
    seed: Option<u64>,
    defaults: Value,
}

pub fn dispatch(
    command: Command,
    args: Vec<String>,
    threads: Option<usize>,
    replay_out: Option<Option<String>>,
) -> Result<(), Failure> {
    let start = Instant::now();
    let (ctx, rendered, output) = match command {
        Command::Chain(a) => cmd_chain(&a).map(|(c, r)| (c, r, a.output))?,
        Command::Diffusion1d(a) => cmd_diffusion1d(&a).map(|(c, r)| (c, r, a.output))?,
        Command::Exittime(a) => cmd_exittime(&a).map(|(c, r)| (c, r, a.output))?,
        Command::Simulate(s) => {
            let common = match &s.target {
                SimTarget::Ou(a) => a.common.clone(),
                SimTarget::Chain(a) => a.common.clone(),
                SimTarget::Halfline(a) => a.common.clone(),
            };
            cmd_simulate(&s.target).map(|(c, r)| (c, r, common.output))?
        }
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    };
    let manifest = Manifest {
        tool: "avar-lab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: ctx.subcommand.into(),
        args,
        inputs: ctx.inputs,
        seed: ctx.seed,
        output: output.out.clone(),
        format: output.format,
        defaults: ctx.defaults,
        threads,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let bytes = render(&manifest, &rendered)?;
    let target = match replay_out {
        Some(o) => o,
        None => output.out.clone(),
    };
    write(&bytes, target.as_deref())
}

fn load_chain(
    path: &str,
) -> Result<(CtmcModel, StationaryDistribution, Option<Vec<f64>>), Failure> {
    let file: ModelFile = input::read_json(path)?;
    let f = file.f.clone();
    let model = file.into_model()?;
    let pi = stationary_distribution(&model)?;
    Ok((model, pi, f))
}

fn chain_defaults() -> Value {
    let opt = OptimizerConfig::default();
    json!({
        "row_sum_tol": DEFAULT_ROW_SUM_TOL,
        "center_tol": CENTER_TOL,
        "reversible_tol": REVERSIBLE_TOL,
        "optimizer": { "max_iterations": opt.max_iterations, "relative_tolerance": opt.relative_tolerance },
    })
}

fn cmd_chain(a: &ChainArgs) -> Result<(Context, Rendered), Failure> {
    let (model, pi, file_f) = load_chain(&a.model)?;
    let mut f = input::observable(a.f.as_deref(), file_f, model.n())?;
    if a.center {
        f = pi.center(&f);
    }
    let sigma2 = asymptotic_variance_exact(&model, &pi, &f)?;
    let saddle = minmax_value(&model, &pi, &f, Method::Saddle)?;
    let optimize = minmax_value(&model, &pi, &f, Method::Optimize)?;
    let spectral = spectral_gap(&model, &pi);
    let sector = sector_constant(&model, &pi)?;
    let dual = dual_generator(&model, &pi)?;
    let dual_sigma2 = asymptotic_variance_exact(&dual, &pi, &f)?;
    let reversible_value = if spectral.reversible {
        Some(reversible_min(&model, &pi, &f)?.value)
    } else {
        None
    };
    let report = json!({
        "n": model.n(),
        "labels": model.labels(),
        "pi": pi.as_slice(),
        "reversible": spectral.reversible,
        "detailed_balance_defect": detailed_balance_defect(&model, &pi),
        "sigma2": sigma2,
        "minmax": { "saddle": saddle, "optimize": optimize, "saddle_times_sigma2": saddle * sigma2 },
        "reversible_min": reversible_value,
        "spectral": spectral,
        "sector": sector,
        "duality": {
            "dual_stationary_residual": pi.balance_residual(&dual),
            "dual_sigma2": dual_sigma2,
            "sigma2_gap": (dual_sigma2 - sigma2).abs(),
        },
    });
    let ctx = Context {
        subcommand: "chain",
        inputs: vec![a.model.clone()],
        seed: None,
        defaults: chain_defaults(),
    };
    Ok((ctx, Rendered { report, row: None }))
}

fn quadrature_config(rule: RuleArg) -> QuadratureConfig {
    QuadratureConfig {
        rule: match rule {
            RuleArg::Simpson => Rule::Simpson,
            RuleArg::Trapezoid => Rule::Trapezoid,
        },
        ..QuadratureConfig::default()
    }
}

fn diffusion_observable(raw: Option<&str>, spec: &DiffusionSpec) -> Result<Function, Failure> {
    match (raw, &spec.f) {
        (Some(r), _) => Ok(Function::parse(r)?),
        (None, Some(f)) => Ok(f.clone()),
        (None, None) => Err(Failure::usage(
            "no observable: pass --f or add \"f\" to the spec".into(),
        )),
    }
}

fn cmd_diffusion1d(a: &Diffusion1dArgs) -> Result<(Context, Rendered), Failure> {
    let config = quadrature_config(a.rule);
    let spec: DiffusionSpec = input::read_json(&a.model)?;
    let model = spec.build(config)?;
    let f = diffusion_observable(a.f.as_deref(), &spec)?;
    let quadrature = avar_quadrature(&model, &f)?;
    let poisson = poisson_solution(&model, &f)?;
    let mut inputs = vec![a.model.clone()];
    let comparison = match &a.compare {
        Some(path) => {
            inputs.push(path.clone());
            let other: DiffusionSpec = input::read_json(path)?;
            Some(compare_coefficients(&model, &other.build(config)?, &f)?)
        }
        None => None,
    };
    let report = json!({
        "f": f,
        "x0": model.x0(),
        "tail_mass": model.tail_mass(),
        "consistency_residual": model.consistency_residual(),
        "sigma2": quadrature.sigma2,
        "quadrature": quadrature,
        "poisson": { "sigma2": poisson.sigma2, "residual_max": poisson.residual_max },
        "non_explosion": check_nonexplosive(&model),
        "comparison": comparison,
    });
    let defaults = json!({
        "quadrature": config,
        "recenter_threshold": RECENTER_THRESHOLD,
        "diverging_exponent": DIVERGING_EXPONENT,
    });
    Ok((
        Context {
            subcommand: "diffusion1d",
            inputs,
            seed: None,
            defaults,
        },
        Rendered { report, row: None },
    ))
}

fn cmd_exittime(a: &ExittimeArgs) -> Result<(Context, Rendered), Failure> {
    let (model, pi, _) = load_chain(&a.model)?;
    let omega = input::omega(&a.omega, &model)?;
    let report = if a.strict {
        exit_bound_report(&model, &pi, &omega)?
    } else {
        match exit_bound_report(&model, &pi, &omega) {
            Err(e @ Error::NotReversible { .. }) => {
                warn(e.kind(), &format!("{e}; bounds use the symmetrized gap"));
                exit_bound_report_unchecked(&model, &pi, &omega)?
            }
            other => other?,
        }
    };
    let defaults =
        json!({ "reversible_tol": REVERSIBLE_TOL, "tight_ratio": TIGHT_RATIO, "strict": a.strict });
    let ctx = Context {
        subcommand: "exittime",
        inputs: vec![a.model.clone()],
        seed: None,
        defaults,
    };
    Ok((
        ctx,
        Rendered {
            report: serde_json::to_value(report).expect("reports serialize"),
            row: None,
        },
    ))
}

fn sim_config(common: &SimCommon, default_dt: f64) -> SimulationConfig {
    SimulationConfig {
        seed: common.seed,
        horizon: common.horizon,
        dt: common.dt.unwrap_or(default_dt),
        burn_in: common.burn_in,
        n_replicas: common.replicas,
        batches: BatchPolicy::default(),
    }
}

fn fmt_f64(x: f64) -> String {
    serde_json::to_string(&x).expect("floats serialize")
}

fn simulation_output(
    model_id: String,
    f_id: String,
    config: &SimulationConfig,
    estimate: AvarEstimate,
    exact: Option<f64>,
) -> Rendered {
    let row = vec![
        ("model_id", model_id.clone()),
        ("f_id", f_id.clone()),
        ("seed", config.seed.to_string()),
        ("T", fmt_f64(config.horizon)),
        ("dt", fmt_f64(config.dt)),
        ("sigma2_hat", fmt_f64(estimate.sigma2_hat)),
        ("stderr", fmt_f64(estimate.stderr)),
        ("n_batches", estimate.n_batches.to_string()),
        ("n_replicas", estimate.n_replicas.to_string()),
        ("effective_T", fmt_f64(estimate.effective_t)),
        ("sigma2_exact", exact.map(fmt_f64).unwrap_or_default()),
    ];
    let report = json!({
        "model_id": model_id,
        "f_id": f_id,
        "seed": config.seed,
        "T": config.horizon,
        "dt": config.dt,
        "estimate": estimate,
        "sigma2_exact": exact,
        "within_3_stderr": exact.map(|e| estimate.covers(e, 3.0)),
    });
    Rendered {
        report,
        row: Some(row),
    }
}

fn cmd_simulate(target: &SimTarget) -> Result<(Context, Rendered), Failure> {
    match target {
        SimTarget::Ou(a) => {
            let v = input::parse_list(&a.v, "--v")?;
            let v: [f64; 2] = v.try_into().map_err(|v: Vec<f64>| {
                Failure::input(
                    "InvalidInput",
                    format!("--v needs 2 components, got {}", v.len()),
                    Value::Null,
                )
            })?;
            let ou = OuRotationModel::new(a.c);
            let integrator = match a.integrator {
                IntegratorArg::Exact => Integrator::Exact,
                IntegratorArg::Euler => Integrator::Euler,
            };
            let default_dt = match integrator {
                Integrator::Exact => 0.05,
                Integrator::Euler => ou.max_euler_dt(),
            };
            let config = sim_config(&a.common, default_dt);
            let exact = avar_ou_linear_exact(&ou, v)?;
            let estimate = estimate_avar_ou(&ou, v, &config, integrator)?;
            let rendered = simulation_output(
                format!("ou:c={}", a.c),
                format!("v={},{}", v[0], v[1]),
                &config,
                estimate,
                Some(exact),
            );
            let defaults =
                json!({ "config": config, "integrator": format!("{integrator:?}").to_lowercase() });
            Ok((
                Context {
                    subcommand: "simulate ou",
                    inputs: vec![],
                    seed: Some(config.seed),
                    defaults,
                },
                rendered,
            ))
        }
        SimTarget::Chain(a) => {
            let (model, pi, file_f) = load_chain(&a.model)?;
            let f = input::observable(a.f.as_deref(), file_f, model.n())?;
            let config = sim_config(&a.common, 1.0);
            let exact = asymptotic_variance_exact(&model, &pi, &f)?;
            let estimate = estimate_avar_ctmc(&model, &pi, &f, &config)?;
            let f_id = a.f.clone().unwrap_or_else(|| "model".into());
            let rendered = simulation_output(a.model.clone(), f_id, &config, estimate, Some(exact));
            let mut defaults = chain_defaults();
            defaults["config"] = serde_json::to_value(config).expect("configs serialize");
            let ctx = Context {
                subcommand: "simulate chain",
                inputs: vec![a.model.clone()],
                seed: Some(config.seed),
                defaults,
            };
            Ok((ctx, rendered))
        }
        SimTarget::Halfline(a) => {
            let qconfig = QuadratureConfig::default();
            let spec: DiffusionSpec = input::read_json(&a.model)?;
            let model = spec.build(qconfig)?;
            let f = diffusion_observable(a.f.as_deref(), &spec)?;
            let config = sim_config(&a.common, 1e-3);
            let exact = avar_quadrature(&model, &f)?.sigma2;
            let estimate = estimate_avar_halfline(&model, &f, &config)?;
            let rendered = simulation_output(
                a.model.clone(),
                f.to_string(),
                &config,
                estimate,
                Some(exact),
            );
            let defaults = json!({ "config": config, "quadrature": qconfig });
            let ctx = Context {
                subcommand: "simulate halfline",
                inputs: vec![a.model.clone()],
                seed: Some(config.seed),
                defaults,
            };
            Ok((ctx, rendered))
        }
    }
}
