use rayon::prelude::*;

use super::config::{Backend, ExperimentConfig, FlowKind};
use super::report::{ConvergenceReport, ReportRow, RowFailure};
use crate::allencahn::{discrete_norm, reference_with_gate, reference_solve, ACProblem, Field, NormKind, Terms};
use crate::linear::{exact_trajectory, generate_problem, LinearProblem, StateVector};
use crate::splitting::{run, step_count, ErrorTrace, Flow, Norm, SplitState, SplittingScheme, Trajectory};
use crate::{Error, Result};

use std::sync::Arc;

/// Error summary of one `(policy, τ, norm)` cell over its runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub max_err: f64,
    pub mean_err: f64,
    pub std_err: f64,
}

/// Aggregate runs of one cell in norm `k`: the ensemble mean is taken at
/// every grid time first and then maximised over time; the spread is the
/// sample standard deviation at that maximising time.
pub fn aggregate(traces: &[ErrorTrace], k: usize) -> CellStats {
    let runs = traces.len();
    let len = traces.iter().map(|t| t.errors[k].len()).min().unwrap_or(0);
    let mut best = (0usize, f64::NEG_INFINITY);
    for n in 0..len {
        let mean = traces.iter().map(|t| t.errors[k][n]).sum::<f64>() / runs as f64;
        if mean > best.1 {
            best = (n, mean);
        }
    }
    let (n_star, mean_err) = best;
    let std_err = if runs > 1 {
        let var = traces.iter().map(|t| (t.errors[k][n_star] - mean_err).powi(2)).sum::<f64>() / (runs - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };
    let max_err = traces.iter().map(|t| t.max_error(k)).fold(0.0, f64::max);
    CellStats { max_err, mean_err: mean_err.max(0.0), std_err }
}

struct Task {
    policy: usize,
    tau: usize,
    run: u64,
}

/// Run every `(policy, τ, run)` task, in parallel on the current rayon
/// pool, and reduce the results in task order.
fn sweep<S: SplitState>(
    config: &ExperimentConfig,
    flows: &[Arc<dyn Flow<S>>],
    u0: &S,
    reference: &Trajectory<S>,
    norms: &[(&str, Norm<'_, S>)],
) -> Result<ConvergenceReport> {
    let hash = config.hash();
    let p = flows.len();
    let mut tasks = Vec::new();
    for (pi, kind) in config.policies.iter().enumerate() {
        let runs = if kind.is_randomized() { config.ensemble as u64 } else { 1 };
        for ti in 0..config.taus.len() {
            tasks.extend((0..runs).map(|run| Task { policy: pi, tau: ti, run }));
        }
    }
    let norm_fns: Vec<Norm<'_, S>> = norms.iter().map(|(_, f)| *f).collect();
    let outcomes: Vec<Result<ErrorTrace>> = tasks
        .par_iter()
        .map(|task| {
            let policy = config.policies[task.policy].policy(config, p, task.run);
            let scheme = SplittingScheme::new(flows.to_vec(), policy, config.taus[task.tau], config.horizon)?;
            run(&scheme, u0, reference, &norm_fns)
        })
        .collect();

    let mut report = ConvergenceReport { config_hash: hash.clone(), ..Default::default() };
    // Cells in task order: policy-major, then τ.
    let mut cells: Vec<Vec<Vec<ErrorTrace>>> = config.policies.iter().map(|_| vec![Vec::new(); config.taus.len()]).collect();
    let mut failed: Vec<Vec<Option<String>>> = config.policies.iter().map(|_| vec![None; config.taus.len()]).collect();
    for (task, outcome) in tasks.iter().zip(outcomes) {
        match outcome {
            Ok(trace) => cells[task.policy][task.tau].push(trace),
            Err(e) => {
                let slot = &mut failed[task.policy][task.tau];
                if slot.is_none() {
                    *slot = Some(format!("run {}: {e}", task.run));
                }
            }
        }
    }
    for (pi, kind) in config.policies.iter().enumerate() {
        for (ti, &tau) in config.taus.iter().enumerate() {
            if let Some(message) = failed[pi][ti].take() {
                report.failures.push(RowFailure { policy: kind.name().into(), tau, message });
            }
        }
        for (k, (norm, _)) in norms.iter().enumerate() {
            for (ti, &tau) in config.taus.iter().enumerate() {
                if report.failures.iter().any(|f| f.policy == kind.name() && f.tau == tau) {
                    continue;
                }
                let traces = &cells[pi][ti];
                let stats = aggregate(traces, k);
                report.rows.push(ReportRow {
                    config_hash: hash.clone(),
                    policy: kind.name().into(),
                    tau,
                    norm: norm.to_string(),
                    max_err: stats.max_err,
                    mean_err: stats.mean_err,
                    std_err: stats.std_err,
                    subflow_evals: traces[0].subflow_evals,
                });
            }
        }
    }
    report.refit();
    Ok(report)
}

/// Run the experiment a config describes. Configuration problems are
/// returned as errors; failures of individual runs are recorded in the
/// report and leave the other rows intact.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    match config.backend {
        Backend::Linear => {
            let problem = generate_problem(config.m, config.p, config.seed)?;
            run_linear(config, &problem)
        }
        Backend::AllenCahn => {
            let problem = allen_cahn_problem(config)?;
            run_allen_cahn(config, &problem)
        }
    }
}

/// Sweep a given linear problem (its horizon is replaced by the config's).
pub fn run_linear(config: &ExperimentConfig, problem: &LinearProblem) -> Result<ConvergenceReport> {
    config.validate()?;
    let mut problem = problem.clone();
    problem.horizon = config.horizon;
    let finest = *config.taus.last().expect("validated");
    let reference = exact_trajectory(&problem, finest, step_count(finest, config.horizon))?;
    let mut steps = config.taus.clone();
    steps.extend(config.taus.iter().map(|t| t / 2.0));
    let flows = problem.flows(&steps)?;
    let l2 = |v: &StateVector| v.norm();
    sweep(config, &flows, &problem.u0, &reference, &[("l2", &l2)])
}

pub fn allen_cahn_problem(config: &ExperimentConfig) -> Result<ACProblem> {
    let mut problem = ACProblem::standard(config.grid, config.flow == FlowKind::Shear)?.with_substeps(config.substeps)?;
    problem.nu = config.nu;
    problem.horizon = config.horizon;
    Ok(problem)
}

/// Sweep an Allen–Cahn problem against an ETDRK4 reference at `tau_ref`,
/// checking the reference against a half-step run when a gate is set.
pub fn run_allen_cahn(config: &ExperimentConfig, problem: &ACProblem) -> Result<ConvergenceReport> {
    config.validate()?;
    let finest = *config.taus.last().expect("validated");
    let (reference, gap) = match config.gate {
        Some(_) => {
            let (r, g) = reference_with_gate(problem, Terms::ALL, config.tau_ref, finest)?;
            (r, Some(g))
        }
        None => (reference_solve(problem, Terms::ALL, config.tau_ref, finest)?, None),
    };
    if let (Some(limit), Some(g)) = (config.gate, gap) {
        if !(g <= limit) {
            return Err(Error::domain(format!(
                "reference self-convergence gap {g:e} exceeds {limit:e}; reduce tau_ref"
            )));
        }
    }
    type BoxedNorm = Box<dyn Fn(&Field) -> f64 + Sync>;
    let closures: Vec<(NormKind, BoxedNorm)> = config
        .norms
        .iter()
        .map(|&kind| (kind, Box::new(move |f: &Field| discrete_norm(f, kind)) as BoxedNorm))
        .collect();
    let norms: Vec<(&str, Norm<'_, Field>)> = closures.iter().map(|(k, f)| (k.name(), f.as_ref())).collect();
    let mut report = sweep(config, &problem.flows(), &problem.initial, &reference, &norms)?;
    report.reference_gap = gap;
    Ok(report)
}
