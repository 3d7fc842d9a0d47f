//! Pipeline execution: configuration in, deterministic artifacts out.
//!
//! Every mode writes `diagnostics.csv` (key/value rows, always including
//! `diverged`). Forward and graph runs write `mse.csv`, `trace.csv` and
//! `state.csv`; graph runs add the `nodes.csv`/`edges.csv` snapshot; global
//! runs write `global.csv` (supervision-point values); compare runs write
//! both global solves plus `functional.csv` with one functional value per
//! solution path. Divergence is a reportable outcome, not a failure.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use greenline_core::global_solver::{
    assemble_system, convergence_indicator, forward_quadrature_stack, functional_value,
    global_quadrature_stack, reconstruct, solve_global, Boundary, ConvergenceParams,
    GlobalSolution, GlobalSystem, GreensFunction, KernelMode,
};
use greenline_core::graph::{estimate_epsilon, estimate_sigma, run_graph_epochs, ErnGraph};
use greenline_core::integrator::{run_epochs, run_epochs_generated, RunLog, TrainingConfig};
use greenline_core::linalg::dump_vector;
use greenline_core::operators::{
    companion_system, reduced_coefficients, system_from_roots, CompanionSystem, OperatorSpec,
};
use greenline_core::rng::SplitMix64;
use greenline_core::signals::{build_task, permute, TaskKind, Trajectory};

use crate::config::{
    BoundarySpec, GraphParams, Kernel, Mode, OperatorConfig, RunConfig, Shuffle, TaskSpec,
};
use crate::csvio::{fmt_f64, read_trajectory, write_csv, write_text};

/// How a run ended. Maps to process exit codes 0 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Diverged,
}

/// Execute a validated configuration, writing artifacts into `out_dir`.
pub fn execute(config: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let (sys, spec) = build_operator(config)?;
    let traj = build_trajectory(config)?;
    let tc = training_config(config, &traj);
    match config.mode {
        Mode::Forward => {
            let log = run_forward(config, &traj, &sys, &spec, &tc)?;
            write_run_log(out_dir, &log)?;
            write_diagnostics(out_dir, &[("diverged".into(), bool_str(log.diverged))])?;
            Ok(outcome_of(&log))
        }
        Mode::Graph => {
            let (log, graph) = run_graph(config, &traj, &sys, &spec, &tc)?;
            write_run_log(out_dir, &log)?;
            write_graph_snapshot(out_dir, &graph)?;
            write_diagnostics(out_dir, &[("diverged".into(), bool_str(log.diverged))])?;
            Ok(outcome_of(&log))
        }
        Mode::Global => {
            let mode = match config.kernel {
                Kernel::Causal => KernelMode::Causal,
                Kernel::Noncausal => KernelMode::NonCausal,
            };
            let (gs, sol, gf) = run_global(config, &traj, &sys, &spec, mode)?;
            write_global_solution(out_dir, "global.csv", &traj, &sol)?;
            let mut diag = vec![("diverged".into(), bool_str(false))];
            push_global_diag(&mut diag, "", config, &traj, &gs, &sol)?;
            write_diagnostics(out_dir, &diag)?;
            if config.dump_system {
                write_text(&out_dir.join("M.txt"), &gs.m.dump())?;
                write_text(&out_dir.join("rhs.txt"), &dump_vector(&gs.rhs))?;
            }
            let _ = gf;
            Ok(Outcome::Clean)
        }
        Mode::Compare => {
            let log = run_forward(config, &traj, &sys, &spec, &tc)?;
            write_run_log(out_dir, &log)?;
            let fwd_stack = forward_quadrature_stack(&traj, &sys, &spec, &tc, 10)?;
            let phi_forward = functional_value(&fwd_stack, &traj, &spec)?;

            let mut diag = vec![("diverged".into(), bool_str(log.diverged))];
            let mut functional_rows = vec![vec!["forward".to_string(), fmt_f64(phi_forward)]];
            for (label, mode) in
                [("causal", KernelMode::Causal), ("noncausal", KernelMode::NonCausal)]
            {
                let (gs, sol, gf) = run_global(config, &traj, &sys, &spec, mode)?;
                write_global_solution(
                    out_dir,
                    &format!("global_{label}.csv"),
                    &traj,
                    &sol,
                )?;
                let stack =
                    global_quadrature_stack(&gf, &sol, &traj, spec.lambda, spec.order_h, 10)?;
                let phi = functional_value(&stack, &traj, &spec)?;
                functional_rows.push(vec![format!("global_{label}"), fmt_f64(phi)]);
                push_global_diag(&mut diag, &format!("{label}_"), config, &traj, &gs, &sol)?;
            }
            write_csv(&out_dir.join("functional.csv"), &["path", "phi"], &functional_rows)?;
            write_diagnostics(out_dir, &diag)?;
            Ok(outcome_of(&log))
        }
    }
}

fn outcome_of(log: &RunLog) -> Outcome {
    if log.diverged {
        Outcome::Diverged
    } else {
        Outcome::Clean
    }
}

fn bool_str(v: bool) -> String {
    if v { "true".into() } else { "false".into() }
}

/// Companion system plus the spec carrying `lambda` and the impulse scale.
/// Root-specified operators take a unit leading coefficient and derive the
/// dissipation from the trailing reduced coefficient.
fn build_operator(config: &RunConfig) -> Result<(CompanionSystem, OperatorSpec)> {
    match &config.operator {
        OperatorConfig::Alpha { h, alpha, theta, mu } => {
            let spec = OperatorSpec::new(*h, alpha.clone(), *theta, *mu, config.lambda)?;
            let beta = reduced_coefficients(&spec)?;
            let sys = companion_system(&beta)?;
            Ok((sys, spec))
        }
        OperatorConfig::Roots { .. } => {
            let roots = config.roots_as_complex().expect("validated as roots operator");
            let sys = system_from_roots(&roots)?;
            let h = sys.order_h();
            let theta = if h == 1 { sys.beta[1] } else { sys.beta[3] / 2.0 };
            let mut alpha = vec![0.0; h + 1];
            alpha[h] = 1.0;
            let spec = OperatorSpec::new(h, alpha, theta, 0, config.lambda)?;
            Ok((sys, spec))
        }
    }
}

fn build_trajectory(config: &RunConfig) -> Result<Trajectory> {
    match &config.task {
        TaskSpec::Sine => {
            Ok(build_task(TaskKind::Sine, config.tau, config.effective_period())?)
        }
        TaskSpec::Cosine => {
            Ok(build_task(TaskKind::Cosine, config.tau, config.effective_period())?)
        }
        TaskSpec::Csv { path } => {
            let traj = read_trajectory(Path::new(path), config.period)?;
            if (traj.tau - config.tau).abs() > 1e-9 * config.tau.max(1.0) {
                bail!(
                    "field `tau`: config says {} but {} is sampled at {}",
                    config.tau,
                    path,
                    traj.tau
                );
            }
            Ok(traj)
        }
    }
}

fn training_config(config: &RunConfig, traj: &Trajectory) -> TrainingConfig {
    let _ = traj;
    let mut tc = TrainingConfig::new(config.epochs, config.tau);
    tc.tau_prime = config.effective_tau_prime();
    tc.supervised_epochs = config.effective_supervised_epochs();
    tc.initial_state = config.initial_state.clone();
    tc
}

/// Run the plain integrator under the configured shuffle policy. Shuffled
/// data get finite-difference derivatives (the analytic ones belong to the
/// time-ordered stream).
fn run_forward(
    config: &RunConfig,
    traj: &Trajectory,
    sys: &CompanionSystem,
    spec: &OperatorSpec,
    tc: &TrainingConfig,
) -> Result<RunLog> {
    match config.shuffle {
        Shuffle::None => Ok(run_epochs(traj, sys, spec, tc)?),
        Shuffle::Once { seed } => {
            let shuffled = shuffle_with_fd(traj, seed)?;
            Ok(run_epochs(&shuffled, sys, spec, tc)?)
        }
        Shuffle::PerEpoch { seed } => {
            if traj.len() < 2 {
                bail!("field `shuffle`: need at least 2 samples to reshuffle");
            }
            let mut seeder = SplitMix64::new(seed);
            let mut epoch_seeds = Vec::with_capacity(config.epochs);
            for _ in 0..config.epochs {
                epoch_seeds.push(seeder.next_u64());
            }
            Ok(run_epochs_generated(sys, spec, tc, |epoch| {
                shuffle_with_fd(traj, epoch_seeds[epoch - 1])
                    .expect("sample count was checked before the run")
            })?)
        }
    }
}

fn shuffle_with_fd(traj: &Trajectory, seed: u64) -> Result<Trajectory> {
    if traj.len() < 2 {
        bail!("field `shuffle`: need at least 2 samples to reshuffle");
    }
    Ok(permute(traj, seed).with_finite_difference_derivatives()?)
}

fn run_graph(
    config: &RunConfig,
    traj: &Trajectory,
    sys: &CompanionSystem,
    spec: &OperatorSpec,
    tc: &TrainingConfig,
) -> Result<(RunLog, ErnGraph)> {
    let params: &GraphParams = config.graph.as_ref().expect("validated for graph mode");
    let data = match config.shuffle {
        Shuffle::None => traj.clone(),
        Shuffle::Once { seed } => shuffle_with_fd(traj, seed)?,
        Shuffle::PerEpoch { .. } => {
            bail!("field `shuffle`: per-epoch reshuffling is not supported in graph mode")
        }
    };
    let window = || -> Result<&[Vec<f64>]> {
        let warmup = params.warmup.unwrap_or(data.len()).min(data.len());
        if warmup < 2 {
            bail!("field `graph.warmup`: need at least 2 samples to estimate parameters");
        }
        Ok(&data.x[..warmup])
    };
    let epsilon = match params.epsilon {
        Some(e) => e,
        None => estimate_epsilon(window()?)?,
    };
    let sigma = match params.sigma {
        Some(s) => s,
        None => estimate_sigma(window()?)?,
    };
    let mut graph = ErnGraph::new(epsilon, sigma, params.rho, params.eta)?;
    let log = run_graph_epochs(&data, sys, spec, tc, &mut graph)?;
    Ok((log, graph))
}

fn run_global(
    config: &RunConfig,
    traj: &Trajectory,
    sys: &CompanionSystem,
    spec: &OperatorSpec,
    mode: KernelMode,
) -> Result<(GlobalSystem, GlobalSolution, GreensFunction)> {
    let boundary = match &config.boundary {
        BoundarySpec::Periodic => Boundary::Periodic,
        BoundarySpec::Cauchy(values) => Boundary::Cauchy(values.clone()),
    };
    let gf = GreensFunction::for_system(sys, spec, mode)?;
    let gs = assemble_system(traj, &gf, spec.lambda, boundary)?;
    let sol = solve_global(&gs)?;
    Ok((gs, sol, gf))
}

fn push_global_diag(
    diag: &mut Vec<(String, String)>,
    prefix: &str,
    config: &RunConfig,
    traj: &Trajectory,
    gs: &GlobalSystem,
    sol: &GlobalSolution,
) -> Result<()> {
    diag.push((format!("{prefix}cond_estimate"), fmt_f64(gs.cond_estimate)));
    diag.push((format!("{prefix}residual"), fmt_f64(sol.residual)));
    diag.push((format!("{prefix}saturated"), bool_str(gs.saturated)));
    for (l, c) in sol.coeffs.iter().enumerate() {
        diag.push((format!("{prefix}c_{}", l + 1), fmt_f64(*c)));
    }
    if let Some(probe) = &config.convergence_probe {
        let params = ConvergenceParams::new(
            probe.c,
            probe.beta,
            config.lambda,
            traj.len(),
            traj.period,
        )?;
        diag.push((
            format!("{prefix}convergence_indicator"),
            fmt_f64(convergence_indicator(&params)),
        ));
    }
    Ok(())
}

fn write_run_log(out_dir: &Path, log: &RunLog) -> Result<()> {
    let mse_rows: Vec<Vec<String>> = log
        .mse_per_epoch
        .iter()
        .enumerate()
        .map(|(e, m)| vec![(e + 1).to_string(), fmt_f64(*m)])
        .collect();
    write_csv(&out_dir.join("mse.csv"), &["epoch", "mse"], &mse_rows)?;

    let trace_rows: Vec<Vec<String>> = log
        .trace
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                fmt_f64(r.t),
                fmt_f64(r.f_tilde),
                fmt_f64(r.y),
                fmt_f64(r.delta),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("trace.csv"),
        &["k", "t", "f_tilde", "y", "delta"],
        &trace_rows,
    )?;

    let state_rows: Vec<Vec<String>> = log
        .final_state
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), fmt_f64(*v)])
        .collect();
    write_csv(&out_dir.join("state.csv"), &["component", "value"], &state_rows)?;
    Ok(())
}

fn write_graph_snapshot(out_dir: &Path, graph: &ErnGraph) -> Result<()> {
    let dim = graph.nodes.first().map_or(0, |n| n.position.len());
    let mut header: Vec<String> = vec!["id".into()];
    for j in 0..dim {
        header.push(format!("pos_{j}"));
    }
    header.extend(["value".into(), "supervised".into(), "supervision_count".into()]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let node_rows: Vec<Vec<String>> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(id, n)| {
            let mut row = vec![id.to_string()];
            row.extend(n.position.iter().map(|p| fmt_f64(*p)));
            row.push(fmt_f64(n.value));
            row.push(bool_str(n.supervised));
            row.push(n.supervision_count.to_string());
            row
        })
        .collect();
    write_csv(&out_dir.join("nodes.csv"), &header_refs, &node_rows)?;

    let edge_rows: Vec<Vec<String>> = graph
        .edges()
        .iter()
        .map(|(cur, prev, count)| {
            vec![cur.to_string(), prev.to_string(), count.to_string()]
        })
        .collect();
    write_csv(&out_dir.join("edges.csv"), &["cur", "prev", "count"], &edge_rows)?;
    Ok(())
}

fn write_global_solution(
    out_dir: &Path,
    name: &str,
    traj: &Trajectory,
    sol: &GlobalSolution,
) -> Result<()> {
    let rows: Vec<Vec<String>> = traj
        .t
        .iter()
        .zip(sol.fbar.iter())
        .map(|(t, f)| vec![fmt_f64(*t), fmt_f64(*f)])
        .collect();
    write_csv(&out_dir.join(name), &["t", "fbar"], &rows)
}

fn write_diagnostics(out_dir: &Path, pairs: &[(String, String)]) -> Result<()> {
    let rows: Vec<Vec<String>> =
        pairs.iter().map(|(k, v)| vec![k.clone(), v.clone()]).collect();
    write_csv(&out_dir.join("diagnostics.csv"), &["key", "value"], &rows)
}

/// Reconstruction sampler used by tests and notebooks: evaluate the solved
/// global model on an arbitrary time grid.
pub fn sample_reconstruction(
    gf: &GreensFunction,
    sol: &GlobalSolution,
    traj: &Trajectory,
    lambda: f64,
    times: &[f64],
) -> Vec<f64> {
    times
        .iter()
        .map(|&t| reconstruct(gf, &sol.coeffs, traj, &sol.fbar, lambda, t))
        .collect()
}
