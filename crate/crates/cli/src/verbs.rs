use std::f64::consts::LN_2;

use serde_json::{json, Value};
use subpress_core::bowen::{dimension_root, lyapunov_spread, BowenSettings};
use subpress_core::numeric::Budget;
use subpress_core::potentials::check_subadditivity;
use subpress_core::pressure::{
    check_power_lemma, estimate_pressure, greedy_maximal_separated, log_partition_sum,
    pressure_curve, EstimatorKind, PressureEstimate,
};
use subpress_core::varprinciple::{
    check_lemma35, empirical_measure_diagnostic, optimize_measure, vp_gap, OptimizeResult,
    OptimizerSettings, VpSettings,
};
use subpress_core::{Estimator, Mode, RandomMarkovMeasure};

use crate::config::{ExperimentConfig, System, Verb};
use crate::report::{Check, CsvTable, Outcome};
use crate::CliError;

pub const LEMMA_TOL: f64 = 1e-12;
pub const FEKETE_TOL: f64 = 1e-9;
pub const SIDE_TOL: f64 = 1e-9;
pub const SPREAD_TOL: f64 = 1e-12;
pub const ROOT_STABILITY_TOL: f64 = 1e-3;
pub const LEMMA35_ALLOWANCE: f64 = 0.1;

pub fn dispatch(
    cfg: &ExperimentConfig,
    sys: &System,
    budget: &Budget,
) -> Result<Outcome, CliError> {
    match cfg.run.verb {
        Verb::Pressure => pressure(cfg, sys, budget),
        Verb::Convergence => convergence(cfg, sys, budget),
        Verb::VpCheck => vp_check(cfg, sys, budget),
        Verb::Lemmas => lemmas(cfg, sys, budget),
        Verb::Dimension => dimension(cfg, sys, budget),
        Verb::Diagnose => diagnose(cfg, sys, budget),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("report types serialize")
}

fn seed_cell(mode: Mode) -> String {
    mode.seed().map(|s| s.to_string()).unwrap_or_default()
}

fn estimate_cells(e: &PressureEstimate) -> Vec<String> {
    vec![
        e.depth.to_string(),
        e.eps_exponent.to_string(),
        e.value.to_string(),
        e.std_error.to_string(),
        e.mode.label().to_string(),
        seed_cell(e.mode),
    ]
}

const CURVE_HEADER: [&str; 6] = ["n", "m", "value", "stdError", "mode", "seed"];

fn pressure(cfg: &ExperimentConfig, sys: &System, budget: &Budget) -> Result<Outcome, CliError> {
    let curve = pressure_curve(
        &sys.chain,
        &sys.bundle,
        sys.potential.as_ref(),
        &cfg.run.n_list,
        &cfg.run.m_list,
        cfg.mode(),
        cfg.run.estimator,
        budget,
    )?;
    let mut checks = Vec::new();
    if cfg.run.estimator == EstimatorKind::Raw {
        checks.push(Check::new(
            "monotone-in-m",
            curve.monotone_in_m,
            format!(
                "largest decrease in m: {:e}",
                curve.worst_monotonicity_violation
            ),
        ));
    }
    let csv = CsvTable {
        header: CURVE_HEADER.to_vec(),
        rows: curve.rows.iter().map(estimate_cells).collect(),
    };
    let result = json!({
        "curve": to_json(&curve),
        "exact_pressure": cfg.run.exact_pressure,
        "difference_from_exact": cfg.run.exact_pressure.map(|p| curve.extrapolated - p),
    });
    Ok(Outcome {
        checks,
        result,
        csv: Some(csv),
    })
}

fn convergence(cfg: &ExperimentConfig, sys: &System, budget: &Budget) -> Result<Outcome, CliError> {
    let curve = pressure_curve(
        &sys.chain,
        &sys.bundle,
        sys.potential.as_ref(),
        &cfg.run.n_list,
        &cfg.run.m_list,
        cfg.mode(),
        EstimatorKind::Raw,
        budget,
    )?;
    let mut rows = Vec::with_capacity(curve.rows.len());
    let mut increments = Vec::with_capacity(curve.rows.len());
    for raw in &curve.rows {
        let inc = estimate_pressure(
            &sys.chain,
            &sys.bundle,
            sys.potential.as_ref(),
            raw.depth,
            raw.eps_exponent,
            cfg.mode(),
            Estimator::richardson(raw.depth),
            budget,
        )?;
        let mut cells = estimate_cells(raw);
        cells.push(inc.value.to_string());
        cells.push(inc.std_error.to_string());
        rows.push(cells);
        increments.push(inc);
    }
    let checks = vec![Check::new(
        "monotone-in-m",
        curve.monotone_in_m,
        format!(
            "largest decrease in m: {:e}",
            curve.worst_monotonicity_violation
        ),
    )];
    let mut header = CURVE_HEADER.to_vec();
    header.extend(["increment", "incrementStdError"]);
    let result = json!({
        "curve": to_json(&curve),
        "increments": to_json(&increments),
        "exact_pressure": cfg.run.exact_pressure,
    });
    Ok(Outcome {
        checks,
        result,
        csv: Some(CsvTable { header, rows }),
    })
}

fn optimizer_settings(cfg: &ExperimentConfig) -> OptimizerSettings {
    OptimizerSettings {
        depth: cfg.run.depth,
        iter_cap: cfg.run.iter_cap,
        tol: cfg.run.opt_tol,
        ..OptimizerSettings::default()
    }
}

/// The uniform measure when it is consistent, else a seeded random valid one.
fn default_measure(cfg: &ExperimentConfig, sys: &System) -> Result<RandomMarkovMeasure, CliError> {
    let uniform = RandomMarkovMeasure::uniform(&sys.chain, &sys.bundle)?;
    if uniform.validate(&sys.chain, &sys.bundle)?.valid {
        return Ok(uniform);
    }
    let mut drawn =
        subpress_core::fixtures::seeded_measures(&sys.chain, &sys.bundle, 1, cfg.run.seed)?;
    Ok(drawn.remove(0))
}

fn run_optimizer(
    cfg: &ExperimentConfig,
    sys: &System,
    budget: &Budget,
) -> Result<OptimizeResult, CliError> {
    let start = default_measure(cfg, sys)?;
    Ok(optimize_measure(
        &sys.chain,
        &sys.bundle,
        sys.potential.as_ref(),
        &start,
        &optimizer_settings(cfg),
        budget,
    )?)
}

fn optimizer_checks(opt: &OptimizeResult, cfg: &ExperimentConfig, checks: &mut Vec<Check>) {
    let monotone = opt.trace.windows(2).all(|w| w[1] >= w[0]);
    checks.push(Check::new(
        "optimizer-trace-nondecreasing",
        monotone,
        format!("{} sweeps", opt.trace.len() - 1),
    ));
    checks.push(Check::new(
        "optimizer-iteration-cap",
        opt.iterations <= cfg.run.iter_cap,
        format!(
            "{} of {} iterations, converged: {}",
            opt.iterations, cfg.run.iter_cap, opt.converged
        ),
    ));
}

fn vp_check(cfg: &ExperimentConfig, sys: &System, budget: &Budget) -> Result<Outcome, CliError> {
    let mut measures = cfg.measures(sys)?;
    let mut checks = Vec::new();
    let optimizer = if cfg.measures.optimize {
        let opt = run_optimizer(cfg, sys, budget)?;
        optimizer_checks(&opt, cfg, &mut checks);
        measures.push(opt.measure.clone());
        Some(opt)
    } else {
        None
    };
    if measures.is_empty() {
        return Err(CliError::Config(
            "measures: vp-check needs a listed, uniform, random or optimized measure".into(),
        ));
    }
    let settings = VpSettings {
        n_list: cfg.run.n_list.clone(),
        m_list: cfg.run.m_list.clone(),
        depth: cfg.run.depth,
        mode: cfg.mode(),
        estimator: cfg.run.estimator,
    };
    let gap = vp_gap(
        &sys.chain,
        &sys.bundle,
        sys.potential.as_ref(),
        &measures,
        &settings,
        cfg.run.exact_pressure,
        budget,
    )?;
    if let Some(p) = cfg.run.exact_pressure {
        let worst = gap
            .sides
            .iter()
            .map(|s| s.side - p)
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::new(
            "sides-below-exact-pressure",
            gap.all_within_exact,
            format!("largest h + F* minus exact pressure: {worst:e}"),
        ));
    }
    let result = json!({
        "gap": to_json(&gap),
        "measures": to_json(&measures),
        "optimizer": optimizer.as_ref().map(|o| json!({
            "objective": o.objective,
            "iterations": o.iterations,
            "converged": o.converged,
            "trace": o.trace,
        })),
    });
    Ok(Outcome {
        checks,
        result,
        csv: None,
    })
}

fn lemmas(cfg: &ExperimentConfig, sys: &System, budget: &Budget) -> Result<Outcome, CliError> {
    let pot = sys.potential.as_ref();
    let mut checks = Vec::new();

    let mut power = Vec::new();
    for &k in &cfg.run.k_list {
        for &n in &cfg.run.n_list {
            for &m in &cfg.run.m_list {
                power.push(check_power_lemma(
                    &sys.chain,
                    &sys.bundle,
                    pot,
                    k,
                    n,
                    m,
                    cfg.mode(),
                    budget,
                )?);
            }
        }
    }
    let worst_power = power
        .iter()
        .map(|r| r.min_slack)
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::new(
        "power-inequality",
        worst_power >= -LEMMA_TOL,
        format!("smallest slack {worst_power:e} over {} cases", power.len()),
    ));

    let max_len = cfg.run.n_list.iter().copied().max().unwrap_or(1);
    let subadd = check_subadditivity(
        pot,
        &sys.chain,
        &sys.bundle,
        cfg.run.trials,
        cfg.run.seed,
        max_len,
    )?;
    checks.push(Check::new(
        "subadditivity",
        subadd.worst_violation <= LEMMA_TOL,
        format!("worst f_(n+m) - f_n - f_m∘Θⁿ: {:e}", subadd.worst_violation),
    ));

    let mut measures = cfg.measures(sys)?;
    if measures.is_empty() {
        measures.push(default_measure(cfg, sys)?);
    }
    let mut averaging = Vec::new();
    let mut fekete = Vec::new();
    for meas in &measures {
        for &n in &cfg.run.n_list {
            for &k in cfg.run.k_list.iter().filter(|&&k| k < n) {
                averaging.push(meas.check_lemma34(&sys.chain, &sys.bundle, pot, n, k, budget)?);
            }
        }
        let bracket = meas.f_star_bracket(&sys.chain, &sys.bundle, pot, cfg.run.depth, budget)?;
        fekete.push(bracket.fekete_defect());
    }
    let worst_avg = averaging
        .iter()
        .map(|r| r.slack)
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::new(
        "averaging-inequality",
        worst_avg >= -LEMMA_TOL,
        format!(
            "smallest slack {worst_avg:e} over {} cases",
            averaging.len()
        ),
    ));
    let worst_fekete = fekete.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new(
        "fekete",
        worst_fekete <= FEKETE_TOL,
        format!("largest a_(n+m) - a_n - a_m: {worst_fekete:e}"),
    ));

    let mut greedy = Vec::new();
    for i in 0..cfg.run.trials {
        let n = cfg.run.n_list[i % cfg.run.n_list.len()];
        let m = cfg.run.m_list[i % cfg.run.m_list.len()];
        let u = sys
            .chain
            .sample_path_stream(n + m, cfg.run.seed, i as u64)
            .symbols;
        let sel = greedy_maximal_separated(&sys.bundle, pot, &u, n, m, m + 1, budget)?;
        let total = log_partition_sum(&sys.bundle, pot, &u, n, m, budget)?;
        greedy.push(n as f64 * LN_2 + sel.log_sum - total);
    }
    let worst_greedy = greedy.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(Check::new(
        "greedy-2^n-bound",
        greedy.is_empty() || worst_greedy >= -LEMMA_TOL,
        format!("smallest slack {worst_greedy:e} over {} runs", greedy.len()),
    ));

    let result = json!({
        "power_inequality": to_json(&power),
        "subadditivity": to_json(&subadd),
        "averaging_inequality": to_json(&averaging),
        "fekete_defects": fekete,
        "greedy_min_slack": if greedy.is_empty() { Value::Null } else { json!(worst_greedy) },
        "greedy_runs": greedy.len(),
    });
    Ok(Outcome {
        checks,
        result,
        csv: None,
    })
}

fn dimension(cfg: &ExperimentConfig, sys: &System, budget: &Budget) -> Result<Outcome, CliError> {
    let cocycle = sys.cocycle.as_ref().ok_or_else(|| {
        CliError::Config(
            "potential.kind: dimension needs a cocycle or scaled-inverse-norm potential".into(),
        )
    })?;
    let n = *cfg.run.n_list.iter().max().expect("n_list is non-empty");
    let mut roots = Vec::new();
    for &m in &cfg.run.m_list {
        let settings = BowenSettings {
            n,
            m,
            mode: cfg.mode(),
            estimator: cfg.run.estimator.at(n),
            t_max: cfg.run.t_max,
            tol_t: cfg.run.tol_t,
            tol_p: cfg.run.tol_p,
        };
        roots.push((
            m,
            dimension_root(&sys.chain, &sys.bundle, cocycle, &settings, budget)?,
        ));
    }
    let mut checks = Vec::new();
    let converged = roots.iter().all(|(_, r)| r.converged);
    checks.push(Check::new(
        "bisection-converged",
        converged,
        format!("{} roots", roots.len()),
    ));
    let lo = roots
        .iter()
        .map(|(_, r)| r.t_star)
        .fold(f64::INFINITY, f64::min);
    let hi = roots
        .iter()
        .map(|(_, r)| r.t_star)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::new(
        "root-stable-in-m",
        hi - lo <= ROOT_STABILITY_TOL,
        format!("roots span {:e}", hi - lo),
    ));
    let reference = match cfg.measures(sys)?.into_iter().next() {
        Some(meas) => meas,
        None => default_measure(cfg, sys)?,
    };
    let spread = lyapunov_spread(
        &sys.chain,
        &sys.bundle,
        cocycle,
        &reference,
        cfg.run.depth,
        budget,
    )?;
    checks.push(Check::new(
        "spread-nonnegative",
        spread.spread >= -SPREAD_TOL,
        format!("spread {:e}", spread.spread),
    ));
    let (_, primary) = &roots[0];
    let result = json!({
        "t_star": primary.t_star,
        "bracket": [primary.bracket.0, primary.bracket.1],
        "upper_estimate": primary.upper_estimate,
        "steps": to_json(&primary.steps),
        "roots_by_m": roots.iter().map(|(m, r)| json!({"m": m, "root": to_json(r)})).collect::<Vec<_>>(),
        "spread": to_json(&spread),
    });
    Ok(Outcome {
        checks,
        result,
        csv: None,
    })
}

fn diagnose(cfg: &ExperimentConfig, sys: &System, budget: &Budget) -> Result<Outcome, CliError> {
    let pot = sys.potential.as_ref();
    let m = cfg.run.m_list[0];
    let listed = cfg.measures(sys)?;
    let (reference, source) = match listed.into_iter().next() {
        Some(meas) => (meas, "configured"),
        None => (run_optimizer(cfg, sys, budget)?.measure, "optimized"),
    };
    let bracket = reference.f_star_bracket(&sys.chain, &sys.bundle, pot, cfg.run.depth, budget)?;
    let mut diagnostics = Vec::new();
    let mut lemma = Vec::new();
    for &n in &cfg.run.n_list {
        let d = empirical_measure_diagnostic(&sys.chain, &sys.bundle, pot, n, m, budget)?;
        lemma.push(check_lemma35(&d, &bracket, LEMMA35_ALLOWANCE));
        diagnostics.push(d);
    }
    let holds = lemma.iter().all(|r| r.holds);
    let worst = lemma
        .iter()
        .map(|r| r.empirical_average - r.bracket_upper)
        .fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![Check::new(
        "gibbs-average-below-f-star",
        holds,
        format!("largest excess over the bracket: {worst:e} (allowance {LEMMA35_ALLOWANCE})"),
    )];
    let result = json!({
        "reference_measure": to_json(&reference),
        "reference_source": source,
        "f_star": to_json(&bracket),
        "diagnostics": to_json(&diagnostics),
        "limsup_checks": to_json(&lemma),
    });
    Ok(Outcome {
        checks,
        result,
        csv: None,
    })
}
