//! Subcommand implementations. Each one turns its config block into a CSV
//! document; grid points run in parallel and rows are emitted in grid order.

use rayon::prelude::*;

use aoi_core::{
    average_aoi, k_criterion, optimize_policy, peak, peak_aoi, policy_moments, simulate,
    solve_threshold, validate, x_star, Error, PolicyFamily, SearchSpec, SimConfig,
    StoppingPolicy, SystemParams,
};

use crate::config::{ConfigFile, PolicySpec, SweepAxis};
use crate::output::{fmt_sig9, Csv};
use crate::CliError;

/// Seed and departure-count overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub departures: Option<u64>,
}

fn numeric(err: Error) -> CliError {
    CliError::Numeric(err.to_string())
}

fn solver_tolerance(params: &SystemParams, tol: Option<f64>) -> f64 {
    tol.unwrap_or_else(|| peak::default_tolerance(&params.age_density()))
}

pub fn cmd_solve_peak(config: &ConfigFile) -> Result<String, CliError> {
    let spec = config
        .solve_peak
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'solve_peak' block".into()))?;
    let grid = spec
        .lambda_grid
        .clone()
        .unwrap_or_else(|| crate::config::DEFAULT_LAMBDA_GRID.to_vec());
    if grid.is_empty() {
        return Err(CliError::Config("empty lambda grid".into()));
    }

    let rows: Result<Vec<Vec<String>>, CliError> = grid
        .par_iter()
        .map(|&lambda| {
            let params = config.system.with_lambda(lambda)?;
            let solution =
                solve_threshold(&params, solver_tolerance(&params, spec.tol)).map_err(numeric)?;
            let baseline = peak_aoi(&params, f64::INFINITY).map_err(numeric)?;
            Ok(vec![
                fmt_sig9(lambda),
                fmt_sig9(solution.threshold),
                fmt_sig9(solution.peak_aoi),
                fmt_sig9(baseline),
                fmt_sig9(baseline - solution.peak_aoi),
            ])
        })
        .collect();

    let mut csv = Csv::new(&["lambda", "w_th", "peak_opt", "peak_no_threshold", "gap"]);
    for row in rows? {
        csv.row(&row);
    }
    Ok(csv.finish())
}

pub fn cmd_variance_sweep(config: &ConfigFile) -> Result<String, CliError> {
    let spec = config
        .variance_sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'variance_sweep' block".into()))?;
    let grid = spec
        .theta_grid
        .clone()
        .unwrap_or_else(|| crate::config::DEFAULT_THETA_GRID.to_vec());
    if grid.is_empty() {
        return Err(CliError::Config("empty theta grid".into()));
    }

    let rows: Result<Vec<Vec<String>>, CliError> = grid
        .par_iter()
        .map(|&theta| {
            let params = config.system.with_theta(theta)?;
            let solution =
                solve_threshold(&params, solver_tolerance(&params, spec.tol)).map_err(numeric)?;
            let baseline = peak_aoi(&params, f64::INFINITY).map_err(numeric)?;
            Ok(vec![
                fmt_sig9(theta),
                fmt_sig9(params.sensing().mean()),
                fmt_sig9(params.sensing().variance()),
                fmt_sig9(solution.threshold),
                fmt_sig9(solution.peak_aoi),
                fmt_sig9(baseline),
            ])
        })
        .collect();

    let mut csv = Csv::new(&[
        "theta",
        "mean_c",
        "var_c",
        "w_th",
        "peak_opt",
        "peak_no_threshold",
    ]);
    for row in rows? {
        csv.row(&row);
    }
    Ok(csv.finish())
}

pub fn cmd_avg_sweep(config: &ConfigFile) -> Result<String, CliError> {
    let spec = config
        .avg_sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'avg_sweep' block".into()))?;
    let grid = spec
        .grid
        .clone()
        .unwrap_or_else(|| spec.axis.default_grid().to_vec());
    if grid.is_empty() {
        return Err(CliError::Config("empty sweep grid".into()));
    }
    let search = SearchSpec {
        waits: (0..=spec.max_wait.unwrap_or(20)).map(f64::from).collect(),
        ..SearchSpec::default()
    };

    let rows: Result<Vec<Vec<String>>, CliError> = grid
        .par_iter()
        .map(|&value| {
            let params = match spec.axis {
                SweepAxis::Lambda => config.system.with_lambda(value)?,
                SweepAxis::VarT => config.system.with_var_t(value)?,
                SweepAxis::Theta => config.system.with_theta(value)?,
            };
            let (hybrid, hybrid_value) =
                optimize_policy(&params, PolicyFamily::Hybrid, &search).map_err(numeric)?;
            let (pod, pod_value) =
                optimize_policy(&params, PolicyFamily::Pod, &search).map_err(numeric)?;
            let baseline = average_aoi(
                &params,
                &policy_moments(&params, &StoppingPolicy::NoThresholdZeroWait).map_err(numeric)?,
            );
            let (hybrid_wait, hybrid_threshold) = match hybrid {
                StoppingPolicy::Hybrid { wait, threshold } => (wait, threshold),
                _ => unreachable!("hybrid family returns hybrid policies"),
            };
            let (pod_wait, pod_threshold) = match pod {
                StoppingPolicy::Pod {
                    wait,
                    outage_threshold,
                } => (wait, outage_threshold),
                _ => unreachable!("pod family returns pod policies"),
            };
            Ok(vec![
                fmt_sig9(value),
                fmt_sig9(hybrid_wait),
                fmt_sig9(hybrid_threshold),
                fmt_sig9(hybrid_value),
                fmt_sig9(pod_wait),
                fmt_sig9(pod_threshold),
                fmt_sig9(pod_value),
                fmt_sig9(baseline),
                fmt_sig9(k_criterion(&params)),
                fmt_sig9(x_star(&params)),
            ])
        })
        .collect();

    let mut csv = Csv::new(&[
        spec.axis.column(),
        "hybrid_n_w",
        "hybrid_w_th",
        "hybrid_avg_aoi",
        "pod_n_w",
        "pod_w_pod",
        "pod_avg_aoi",
        "no_threshold_avg_aoi",
        "k_criterion",
        "x_star",
    ]);
    for row in rows? {
        csv.row(&row);
    }
    Ok(csv.finish())
}

pub fn cmd_eval(config: &ConfigFile) -> Result<String, CliError> {
    let spec = config
        .eval
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'eval' block".into()))?;
    let params = config.system.to_params()?;
    let policy = spec.policy.to_policy();
    policy
        .validate(&params)
        .map_err(|e| CliError::Config(format!("eval.policy: {e}")))?;
    let moments = policy_moments(&params, &policy).map_err(numeric)?;
    let mean_age = params.age_density().mean();
    let analytic_peak = 1.0 / params.lambda()
        + 2.0 * params.transmission().mean()
        + moments.mean_attempts * mean_age
        + moments.mean_final_age;

    let mut csv = Csv::new(&[
        "policy",
        "mean_attempts",
        "mean_final_age",
        "peak_aoi",
        "avg_aoi",
        "avg_aoi_exact",
        "k_criterion",
        "x_star",
    ]);
    csv.row(&[
        spec.policy.describe(),
        fmt_sig9(moments.mean_attempts),
        fmt_sig9(moments.mean_final_age),
        fmt_sig9(analytic_peak),
        fmt_sig9(average_aoi(&params, &moments)),
        policy.deterministic_attempts().to_string(),
        fmt_sig9(k_criterion(&params)),
        fmt_sig9(x_star(&params)),
    ]);
    Ok(csv.finish())
}

pub fn cmd_simulate(config: &ConfigFile, overrides: Overrides) -> Result<String, CliError> {
    let spec = config
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'simulate' block".into()))?;
    let params = config.system.to_params()?;
    let policy = spec.policy.to_policy();
    let sim_config = SimConfig {
        params,
        policy,
        num_departures: overrides
            .departures
            .or(spec.num_departures)
            .unwrap_or(100_000),
        num_batches: spec.num_batches.unwrap_or(32),
        seed: overrides.seed.or(spec.seed).unwrap_or(0),
        discard_first_cycles: spec.discard_first_cycles.unwrap_or(1),
    };
    sim_config
        .validate()
        .map_err(|e| CliError::Config(format!("simulate: {e}")))?;
    let est = simulate(&sim_config).map_err(numeric)?;

    let mut csv = Csv::new(&["quantity", "estimate", "halfwidth"]);
    let mut push = |name: &str, value: f64, halfwidth: Option<f64>| {
        csv.row(&[
            name.to_string(),
            fmt_sig9(value),
            halfwidth.map(fmt_sig9).unwrap_or_default(),
        ]);
    };
    push("avg_aoi", est.avg_aoi.value, Some(est.avg_aoi.halfwidth));
    push("avg_aoi_path", est.avg_aoi_path, None);
    push("peak_aoi", est.peak_aoi.value, Some(est.peak_aoi.halfwidth));
    push(
        "mean_attempts",
        est.mean_attempts.value,
        Some(est.mean_attempts.halfwidth),
    );
    push(
        "mean_y",
        est.mean_interdeparture.value,
        Some(est.mean_interdeparture.halfwidth),
    );
    push(
        "mean_s",
        est.mean_system_time.value,
        Some(est.mean_system_time.halfwidth),
    );
    push(
        "mean_final_age",
        est.mean_final_age.value,
        Some(est.mean_final_age.halfwidth),
    );
    push("effective_rate", est.effective_rate, None);
    Ok(csv.finish())
}

/// Returns the CSV report plus whether any exactness-expected quantity
/// disagreed with the simulation beyond three standard errors.
pub fn cmd_validate(
    config: &ConfigFile,
    overrides: Overrides,
) -> Result<(String, bool), CliError> {
    let spec = config
        .validate
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'validate' block".into()))?;
    if spec.policies.is_empty() {
        return Err(CliError::Config("validate.policies is empty".into()));
    }
    let params = config.system.to_params()?;
    let departures = overrides.departures.or(spec.num_departures).unwrap_or(100_000);
    let seeds = match overrides.seed {
        Some(seed) => vec![seed],
        None => spec.seeds.clone().unwrap_or_else(|| vec![1, 2, 3]),
    };
    if seeds.is_empty() {
        return Err(CliError::Config("validate.seeds is empty".into()));
    }
    for policy_spec in &spec.policies {
        policy_spec
            .to_policy()
            .validate(&params)
            .map_err(|e| CliError::Config(format!("validate.policies: {e}")))?;
    }

    let cases: Vec<(PolicySpec, u64)> = spec
        .policies
        .iter()
        .flat_map(|p| seeds.iter().map(move |&s| (p.clone(), s)))
        .collect();
    let reports: Result<Vec<_>, CliError> = cases
        .par_iter()
        .map(|(policy_spec, seed)| {
            let report = validate(&params, &policy_spec.to_policy(), departures, *seed)
                .map_err(numeric)?;
            Ok((policy_spec.describe(), *seed, report))
        })
        .collect();

    let mut csv = Csv::new(&[
        "policy",
        "seed",
        "quantity",
        "analytical",
        "simulated",
        "halfwidth",
        "z_score",
        "expected_exact",
        "flagged",
    ]);
    let mut any_violation = false;
    for (label, seed, report) in reports? {
        any_violation |= !report.exactness_violations().is_empty();
        for row in &report.rows {
            csv.row(&[
                label.clone(),
                seed.to_string(),
                row.quantity.to_string(),
                fmt_sig9(row.analytical),
                fmt_sig9(row.simulated),
                fmt_sig9(row.halfwidth),
                fmt_sig9(row.z_score),
                row.expected_exact.to_string(),
                row.flagged().to_string(),
            ]);
        }
    }
    Ok((csv.finish(), any_violation))
}
